#pragma once

#include <array>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "crossway/core.hpp"

namespace crossway {

// Closed record schema. Every simulation observable flows through these
// kinds; the offline monitor, metrics and renderer consume nothing else.
enum class TraceKind {
    RunStart,    // header: schema version, scenario, seed
    Spawn,       // process created: pose, route
    AppLoc,      // application state-machine transition
    GvhPublish,  // a primitive published a gvh slot
    MsgSend,     // one transmission attempt
    MsgDeliver,  // attempt delivered to its destination
    MsgDrop,     // attempt dropped (loss, region, crash, deadline, duplicate)
    MotionTick,  // pose update
    Crash,       // process crash fault
    Violation,   // monitor-detected property violation
    Done,        // process reached its terminal state
    RunStop,     // trailer: final clock
};

inline constexpr std::array<std::pair<TraceKind, std::string_view>, 12> kTraceKindNames{{
    {TraceKind::RunStart, "run_start"},
    {TraceKind::Spawn, "spawn"},
    {TraceKind::AppLoc, "app_loc"},
    {TraceKind::GvhPublish, "gvh_publish"},
    {TraceKind::MsgSend, "msg_send"},
    {TraceKind::MsgDeliver, "msg_deliver"},
    {TraceKind::MsgDrop, "msg_drop"},
    {TraceKind::MotionTick, "motion_tick"},
    {TraceKind::Crash, "crash"},
    {TraceKind::Violation, "violation"},
    {TraceKind::Done, "done"},
    {TraceKind::RunStop, "run_stop"},
}};

inline std::string_view to_string(TraceKind k) {
    for (auto [kind, name] : kTraceKindNames)
        if (kind == k) return name;
    return "?";
}

inline TraceKind trace_kind_from(std::string_view name) {
    for (auto [kind, n] : kTraceKindNames)
        if (n == name) return kind;
    throw MalformedTrace("unknown trace record kind '" + std::string(name) + "'");
}

struct TraceRecord {
    SimTime time = 0;
    Pid pid = kWorldPid;  // kWorldPid renders as "world"
    TraceKind kind = TraceKind::RunStart;
    nlohmann::json data = nlohmann::json::object();

    nlohmann::json to_json() const {
        nlohmann::json j{{"t", time}, {"kind", to_string(kind)}, {"data", data}};
        if (pid == kWorldPid)
            j["pid"] = "world";
        else
            j["pid"] = pid;
        return j;
    }

    static TraceRecord from_json(const nlohmann::json& j) {
        TraceRecord r;
        try {
            r.time = j.at("t").get<SimTime>();
            r.kind = trace_kind_from(j.at("kind").get<std::string>());
            const auto& p = j.at("pid");
            r.pid = p.is_string() ? kWorldPid : p.get<Pid>();
            r.data = j.at("data");
        } catch (const nlohmann::json::exception& e) {
            throw MalformedTrace(std::string("bad trace record: ") + e.what());
        }
        return r;
    }
};

// Append-only, time-ordered record log. nlohmann serializes object keys in
// sorted order, so identical runs produce byte-identical files.
class Trace {
  public:
    void append(TraceRecord rec) { records_.push_back(std::move(rec)); }

    const std::vector<TraceRecord>& records() const { return records_; }
    bool empty() const { return records_.empty(); }
    std::size_t size() const { return records_.size(); }
    const TraceRecord& operator[](std::size_t i) const { return records_[i]; }

    void write_jsonl(std::ostream& out) const {
        for (const auto& rec : records_) out << rec.to_json().dump() << '\n';
    }

    std::string to_jsonl() const {
        std::ostringstream out;
        write_jsonl(out);
        return out.str();
    }

    static Trace read_jsonl(std::istream& in) {
        Trace t;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded())
                throw MalformedTrace("trace line " + std::to_string(lineno) + " is not valid JSON");
            t.append(TraceRecord::from_json(j));
        }
        return t;
    }

    static Trace parse_jsonl(const std::string& text) {
        std::istringstream in(text);
        return read_jsonl(in);
    }

  private:
    std::vector<TraceRecord> records_;
};

}  // namespace crossway
