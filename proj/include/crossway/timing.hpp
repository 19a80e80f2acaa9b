#pragma once

#include <cmath>

#include <json.hpp>

#include "crossway/core.hpp"

namespace crossway {

// Protocol timing constants, all in milliseconds.
//   d  — geocast window (and announce/echo round granularity)
//   d1 — registration soundness window (membership lookback bound)
//   d2 — progress bound: primitive requests fail after this long
//   d3 — non-interference bound: uncontended grants should land within it
struct TimingParams {
    SimTime d = 400;
    SimTime d1 = 4800;
    SimTime d2 = 60000;
    SimTime d3 = 1000;

    void validate() const {
        if (d <= 0 || d1 <= 0 || d2 <= 0 || d3 <= 0)
            throw ValidationError("timing: all bounds must be positive");
        if (!(d3 < d2)) throw ValidationError("timing: d3 must be smaller than d2");
    }

    // Defaults derived from the network's mean delay: d covers a few message
    // exchanges; d1 covers the longest announce/echo chain that can still
    // land a pid in a finalized list (register + echo rounds + late joins);
    // d3 covers an uncontended request/reply round trip with slack.
    static TimingParams from_mean_delay(double mean_delay_ms) {
        TimingParams t;
        t.d = std::max<SimTime>(1, static_cast<SimTime>(std::llround(4.0 * mean_delay_ms)));
        t.d1 = 12 * t.d;
        t.d2 = 60000;
        t.d3 = std::max<SimTime>(1, static_cast<SimTime>(std::llround(10.0 * mean_delay_ms)));
        if (!(t.d3 < t.d2)) t.d2 = 60 * t.d3;
        return t;
    }
};

inline void to_json(nlohmann::json& j, const TimingParams& t) {
    j = {{"d", t.d}, {"d1", t.d1}, {"d2", t.d2}, {"d3", t.d3}};
}

inline void from_json(const nlohmann::json& j, TimingParams& t) {
    TimingParams def;
    t.d = j.value("d", def.d);
    t.d1 = j.value("d1", def.d1);
    t.d2 = j.value("d2", def.d2);
    t.d3 = j.value("d3", def.d3);
    t.validate();
}

}  // namespace crossway
