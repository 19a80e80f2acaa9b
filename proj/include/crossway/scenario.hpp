#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crossway/core.hpp"
#include "crossway/geometry.hpp"
#include "crossway/icp.hpp"
#include "crossway/netmodel.hpp"
#include "crossway/physics.hpp"
#include "crossway/timing.hpp"

namespace crossway {

struct VehicleSpec {
    Pid pid = 0;
    Vec2 start_pos{};
    std::string arrival;
    std::string departure;
    SimTime start_at = 0;
};

inline void to_json(nlohmann::json& j, const VehicleSpec& v) {
    j = {{"pid", v.pid},
         {"pos", v.start_pos},
         {"arrival", v.arrival},
         {"departure", v.departure},
         {"start_at_ms", v.start_at}};
}

inline void from_json(const nlohmann::json& j, VehicleSpec& v) {
    j.at("pid").get_to(v.pid);
    j.at("pos").get_to(v.start_pos);
    j.at("arrival").get_to(v.arrival);
    j.at("departure").get_to(v.departure);
    v.start_at = j.value("start_at_ms", SimTime{0});
    if (v.start_at < 0) throw ValidationError("vehicle start_at_ms must be >= 0");
}

struct MonitorConfig {
    bool halt_on_violation = false;
};

inline void to_json(nlohmann::json& j, const MonitorConfig& m) {
    j = {{"halt_on_violation", m.halt_on_violation}};
}

inline void from_json(const nlohmann::json& j, MonitorConfig& m) {
    m.halt_on_violation = j.value("halt_on_violation", false);
}

struct Scenario {
    std::string name = "unnamed";
    uint64_t master_seed = 0;
    SimTime step_period = 100;
    NetConfig net;
    std::optional<TimingParams> timing;  // absent -> derived from net.mean_delay
    KinematicParams kinematics;
    std::vector<Zone> zones;
    RoutingTable routing;
    Region reg_region = Region::everywhere();
    std::vector<VehicleSpec> vehicles;
    MonitorConfig monitor;

    TimingParams effective_timing() const {
        return timing ? *timing : TimingParams::from_mean_delay(net.mean_delay);
    }

    void validate() const {
        net.validate();
        effective_timing().validate();
        kinematics.validate();
        if (step_period <= 0) throw ValidationError("step_period_ms must be positive");
        ZoneMap zm(zones);  // throws on bad geometry
        std::set<Pid> seen;
        for (const auto& v : vehicles) {
            if (!seen.insert(v.pid).second)
                throw ValidationError("duplicate vehicle pid " + std::to_string(v.pid));
            make_path(routing, v.arrival, v.departure);  // throws IllegalPair
            for (const auto& z : make_path(routing, v.arrival, v.departure).zones)
                zm.at(z);  // throws on unknown zone
        }
    }
};

inline void to_json(nlohmann::json& j, const Scenario& s) {
    j = {{"name", s.name},
         {"master_seed", s.master_seed},
         {"step_period_ms", s.step_period},
         {"net", s.net},
         {"kinematics", s.kinematics},
         {"geometry",
          {{"zones", s.zones}, {"routing", s.routing}, {"reg_region", s.reg_region}}},
         {"vehicles", s.vehicles},
         {"monitor", s.monitor}};
    if (s.timing) j["timing"] = *s.timing;
}

inline void from_json(const nlohmann::json& j, Scenario& s) {
    s.name = j.value("name", std::string("unnamed"));
    s.master_seed = j.value("master_seed", uint64_t{0});
    s.step_period = j.value("step_period_ms", SimTime{100});
    if (j.contains("net")) j.at("net").get_to(s.net);
    if (j.contains("timing")) s.timing = j.at("timing").get<TimingParams>();
    if (j.contains("kinematics")) j.at("kinematics").get_to(s.kinematics);
    const auto& g = j.at("geometry");
    g.at("zones").get_to(s.zones);
    g.at("routing").get_to(s.routing);
    if (g.contains("reg_region")) g.at("reg_region").get_to(s.reg_region);
    j.at("vehicles").get_to(s.vehicles);
    if (j.contains("monitor")) j.at("monitor").get_to(s.monitor);
    s.validate();
}

inline Scenario parse_scenario(const nlohmann::json& j) { return j.get<Scenario>(); }

// Dotted-path override: "net.loss_rate=0.3", "vehicles.1.start_at_ms=50".
// Numeric segments index arrays; the value is parsed as JSON when possible,
// otherwise taken as a string.
inline void apply_override(nlohmann::json& root, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ValidationError("override must look like key.path=value: " + assignment);
    std::string path = assignment.substr(0, eq);
    std::string raw = assignment.substr(eq + 1);

    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    nlohmann::json* node = &root;
    size_t start = 0;
    while (true) {
        size_t dot = path.find('.', start);
        std::string seg = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (seg.empty()) throw ValidationError("empty path segment in override: " + assignment);
        bool numeric = seg.find_first_not_of("0123456789") == std::string::npos;
        bool last = dot == std::string::npos;
        if (numeric && node->is_array()) {
            size_t idx = std::stoul(seg);
            if (idx >= node->size()) throw ValidationError("override index out of range: " + seg);
            node = &(*node)[idx];
        } else {
            if (last) {
                (*node)[seg] = value;
                return;
            }
            node = &(*node)[seg];
        }
        if (last) {
            *node = value;
            return;
        }
        start = dot + 1;
    }
}

// ---- bundled scenarios ------------------------------------------------

namespace detail {

inline Scenario base_scenario() {
    Scenario s;
    s.zones = default_zone_map().zones();
    s.routing = default_routing_table();
    s.reg_region = Region::disc({0.0, 0.0}, 6.0);
    s.net.mean_delay = 100;
    s.net.delay_kind = DelayKind::Exponential;
    return s;
}

inline VehicleSpec vehicle(Pid pid, const std::string& arrival, const std::string& departure,
                           SimTime start_at, const ZoneMap& zm) {
    return VehicleSpec{pid, zm.center(arrival), arrival, departure, start_at};
}

}  // namespace detail

// One vehicle taking the short right-hand turn; the minimal smoke scenario.
inline Scenario scenario_solo() {
    Scenario s = detail::base_scenario();
    s.name = "solo";
    ZoneMap zm(s.zones);
    s.vehicles = {detail::vehicle(0, "A0", "A1", 0, zm)};
    return s;
}

// Four vehicles, one per approach, staggered starts, mixed route lengths.
inline Scenario scenario_fourway() {
    Scenario s = detail::base_scenario();
    s.name = "fourway";
    ZoneMap zm(s.zones);
    s.vehicles = {
        detail::vehicle(0, "C0", "C1", 0, zm),
        detail::vehicle(1, "D0", "B1", 50, zm),
        detail::vehicle(2, "B0", "A1", 100, zm),
        detail::vehicle(3, "A0", "A1", 150, zm),
    };
    return s;
}

// Two vehicles whose interior sets overlap, forcing one to queue.
inline Scenario scenario_contention() {
    Scenario s = detail::base_scenario();
    s.name = "contention";
    ZoneMap zm(s.zones);
    s.vehicles = {
        detail::vehicle(0, "A0", "D1", 0, zm),
        detail::vehicle(1, "C0", "B1", 50, zm),
    };
    return s;
}

// The fourway mix under 20% message loss; retransmission has to carry it.
inline Scenario scenario_lossy() {
    Scenario s = scenario_fourway();
    s.name = "lossy";
    s.net.loss_rate = 0.2;
    return s;
}

// The fourway mix with one vehicle crashing mid-protocol; survivors must
// stay safe even though the run cannot fully complete.
inline Scenario scenario_crash() {
    Scenario s = scenario_fourway();
    s.name = "crash";
    s.net.crash_schedule = {{1, 1800}};
    return s;
}

inline std::vector<std::string> bundled_scenario_names() {
    return {"solo", "fourway", "contention", "lossy", "crash"};
}

inline std::optional<Scenario> bundled_scenario(const std::string& name) {
    if (name == "solo") return scenario_solo();
    if (name == "fourway") return scenario_fourway();
    if (name == "contention") return scenario_contention();
    if (name == "lossy") return scenario_lossy();
    if (name == "crash") return scenario_crash();
    return std::nullopt;
}

}  // namespace crossway
