#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crossway/core.hpp"
#include "crossway/engine.hpp"
#include "crossway/geometry.hpp"

namespace crossway {

enum class ZoneKind { Arrival, Critical, Departure };

inline std::string to_string(ZoneKind k) {
    switch (k) {
        case ZoneKind::Arrival: return "arrival";
        case ZoneKind::Critical: return "critical";
        default: return "departure";
    }
}

inline ZoneKind zone_kind_from(const std::string& s) {
    if (s == "arrival") return ZoneKind::Arrival;
    if (s == "critical") return ZoneKind::Critical;
    if (s == "departure") return ZoneKind::Departure;
    throw ParseError("unknown zone kind '" + s + "'");
}

struct Zone {
    std::string name;
    ZoneKind kind = ZoneKind::Critical;
    Rect footprint;
};

inline void to_json(nlohmann::json& j, const Zone& z) {
    j = {{"name", z.name}, {"kind", to_string(z.kind)}, {"rect", z.footprint}};
}

inline void from_json(const nlohmann::json& j, Zone& z) {
    z.name = j.at("name").get<std::string>();
    z.kind = zone_kind_from(j.at("kind").get<std::string>());
    z.footprint = j.at("rect").get<Rect>();
}

// The named footprints of an intersection. zone_of maps a point to at most one
// zone: containment with a lexicographically-smallest-name tie-break on shared
// boundaries, so boundaries are deterministic.
class ZoneMap {
  public:
    ZoneMap() = default;
    explicit ZoneMap(std::vector<Zone> zones) : zones_(std::move(zones)) { validate(); }

    const std::vector<Zone>& zones() const { return zones_; }

    const Zone* find(const std::string& name) const {
        for (const auto& z : zones_)
            if (z.name == name) return &z;
        return nullptr;
    }

    const Zone& at(const std::string& name) const {
        const Zone* z = find(name);
        if (!z) throw ValidationError("unknown zone '" + name + "'");
        return *z;
    }

    Vec2 center(const std::string& name) const { return at(name).footprint.center(); }

    std::optional<std::string> zone_of(const Vec2& p) const {
        const Zone* best = nullptr;
        for (const auto& z : zones_) {
            if (!z.footprint.contains(p)) continue;
            if (!best || z.name < best->name) best = &z;
        }
        if (!best) return std::nullopt;
        return best->name;
    }

    std::vector<std::string> critical_names() const {
        std::vector<std::string> out;
        for (const auto& z : zones_)
            if (z.kind == ZoneKind::Critical) out.push_back(z.name);
        return out;
    }

    void validate() const {
        for (const auto& z : zones_) {
            if (z.footprint.width() <= 0 || z.footprint.height() <= 0)
                throw ValidationError("zone '" + z.name + "' has non-positive area");
        }
        for (size_t i = 0; i < zones_.size(); ++i) {
            for (size_t j = i + 1; j < zones_.size(); ++j) {
                if (zones_[i].name == zones_[j].name)
                    throw ValidationError("duplicate zone name '" + zones_[i].name + "'");
                if (zones_[i].kind == ZoneKind::Critical && zones_[j].kind == ZoneKind::Critical &&
                    zones_[i].footprint.overlaps(zones_[j].footprint))
                    throw ValidationError("critical zones '" + zones_[i].name + "' and '" +
                                          zones_[j].name + "' overlap");
            }
        }
    }

  private:
    std::vector<Zone> zones_;
};

inline void to_json(nlohmann::json& j, const ZoneMap& m) { j = m.zones(); }
inline void from_json(const nlohmann::json& j, ZoneMap& m) {
    m = ZoneMap(j.get<std::vector<Zone>>());
}

// Four 1m x 1m critical quadrants tiling a 2m x 2m center square, with 1m-wide
// 2m-long arrival/departure lanes capping each approach.
inline ZoneMap default_zone_map() {
    std::vector<Zone> z = {
        {"A", ZoneKind::Critical, {-1, -1, 0, 0}},   // southwest
        {"B", ZoneKind::Critical, {0, -1, 1, 0}},    // southeast
        {"C", ZoneKind::Critical, {-1, 0, 0, 1}},    // northwest
        {"D", ZoneKind::Critical, {0, 0, 1, 1}},     // northeast
        {"A0", ZoneKind::Arrival, {-1, -3, 0, -1}},  // south approach
        {"A1", ZoneKind::Departure, {-3, -1, -1, 0}},
        {"B0", ZoneKind::Arrival, {1, -1, 3, 0}},  // east approach
        {"B1", ZoneKind::Departure, {0, -3, 1, -1}},
        {"C0", ZoneKind::Arrival, {-3, 0, -1, 1}},  // west approach
        {"C1", ZoneKind::Departure, {-1, 1, 0, 3}},
        {"D0", ZoneKind::Arrival, {0, 1, 1, 3}},  // north approach
        {"D1", ZoneKind::Departure, {1, 0, 3, 1}},
    };
    return ZoneMap(std::move(z));
}

struct KinematicParams {
    double v_max = 0.3;          // m/s
    double robot_radius = 0.15;  // m
    double eps = 0.08;           // arrival tolerance, m
    SimTime tick_period = 50;    // ms
    SimTime stall_timeout = 30000;

    void validate() const {
        if (v_max <= 0) throw ValidationError("kinematics.v_max must be positive");
        if (robot_radius <= 0) throw ValidationError("kinematics.robot_radius must be positive");
        if (eps <= 0) throw ValidationError("kinematics.eps must be positive");
        if (tick_period <= 0) throw ValidationError("kinematics.tick_period_ms must be positive");
        if (stall_timeout <= 0)
            throw ValidationError("kinematics.stall_timeout_ms must be positive");
    }
};

inline void to_json(nlohmann::json& j, const KinematicParams& k) {
    j = {{"v_max", k.v_max},
         {"robot_radius", k.robot_radius},
         {"eps", k.eps},
         {"tick_period_ms", k.tick_period},
         {"stall_timeout_ms", k.stall_timeout}};
}

inline void from_json(const nlohmann::json& j, KinematicParams& k) {
    k.v_max = j.value("v_max", 0.3);
    k.robot_radius = j.value("robot_radius", 0.15);
    k.eps = j.value("eps", 0.08);
    k.tick_period = j.value("tick_period_ms", SimTime{50});
    k.stall_timeout = j.value("stall_timeout_ms", SimTime{30000});
    k.validate();
}

enum class MotionFlag { Idle, InMotion, Done, Fail };

inline std::string to_string(MotionFlag f) {
    switch (f) {
        case MotionFlag::Idle: return "idle";
        case MotionFlag::InMotion: return "in_motion";
        case MotionFlag::Done: return "done";
        default: return "fail";
    }
}

// The 2D world: holonomic point robots with a speed cap, stepped by one global
// motion tick while anything is moving. Collisions halt the run.
class World {
  public:
    using FlagHook = std::function<void(Pid, MotionFlag)>;

    World(Engine& eng, ZoneMap zones, KinematicParams kin)
        : eng_(eng), zones_(std::move(zones)), kin_(kin) {}

    const ZoneMap& zones() const { return zones_; }
    const KinematicParams& kinematics() const { return kin_; }

    // Called on every motionflag change; the sim mirrors flags into gvh slots.
    void set_flag_hook(FlagHook hook) { flag_hook_ = std::move(hook); }

    void add_robot(Pid pid, Vec2 pos) {
        if (bodies_.count(pid)) throw DuplicatePid("robot " + std::to_string(pid) + " already added");
        bodies_[pid] = Body{pos, 0.0, std::nullopt, std::nullopt, MotionFlag::Idle, 0, 0};
    }

    bool has_robot(Pid pid) const { return bodies_.count(pid) != 0; }

    Vec2 pose(Pid pid) const { return body(pid).pos; }
    double heading(Pid pid) const { return body(pid).heading; }
    MotionFlag flag(Pid pid) const { return body(pid).flag; }
    std::optional<Vec2> target(Pid pid) const { return body(pid).target; }

    void do_move(Pid pid, Vec2 target, std::optional<Region> avoid = std::nullopt) {
        Body& b = mut_body(pid);
        if (eng_.crashed(pid)) throw SimError("do_move for crashed robot " + std::to_string(pid));
        b.target = target;
        b.avoid = avoid;
        b.moved_at = eng_.now();
        b.progress_at = eng_.now();
        b.best_dist = distance(b.pos, target);
        if (avoid && avoid->contains(target)) {
            set_flag(pid, b, MotionFlag::Fail);  // unreachable by construction
            b.target = std::nullopt;
            b.avoid = std::nullopt;
            return;
        }
        set_flag(pid, b, MotionFlag::InMotion);
        engage_tick();
    }

    void stop_motion(Pid pid) {
        Body& b = mut_body(pid);
        b.target = std::nullopt;
        b.avoid = std::nullopt;
        if (b.flag == MotionFlag::InMotion) set_flag(pid, b, MotionFlag::Idle);
    }

    // Departure: the robot leaves the modeled area and stops being a body.
    void remove_robot(Pid pid) {
        body(pid);  // throws on unknown pid
        bodies_.erase(pid);
    }

    void freeze(Pid pid) {  // crash: body stays put as an obstacle
        Body& b = mut_body(pid);
        b.frozen = true;
        b.target = std::nullopt;
        b.avoid = std::nullopt;
    }

    std::vector<std::pair<Pid, Pid>> detect_collisions() const {
        std::vector<std::pair<Pid, Pid>> out;
        for (auto i = bodies_.begin(); i != bodies_.end(); ++i) {
            auto j = i;
            for (++j; j != bodies_.end(); ++j) {
                if (distance(i->second.pos, j->second.pos) < 2 * kin_.robot_radius)
                    out.emplace_back(i->first, j->first);
            }
        }
        return out;
    }

    // Advances one robot by dt milliseconds toward its target, detouring
    // around the avoid disc and never entering it. Public so tests can drive
    // kinematics without an engine clock.
    void step_motion(Pid pid, SimTime dt) {
        Body& b = mut_body(pid);
        if (b.flag != MotionFlag::InMotion || !b.target || dt <= 0) return;
        Vec2 goal = steer_goal(b);
        Vec2 delta = goal - b.pos;
        double max_step = kin_.v_max * (static_cast<double>(dt) / 1000.0);
        double len = delta.norm();
        Vec2 next = len <= max_step ? goal : b.pos + delta.unit() * max_step;
        if (b.avoid) next = push_outside(*b.avoid, next);
        if (distance(next, b.pos) > 1e-12) b.heading = std::atan2(next.y - b.pos.y, next.x - b.pos.x);
        b.pos = next;

        double dist = distance(b.pos, *b.target);
        if (dist + 1e-9 < b.best_dist) {
            b.best_dist = dist;
            b.progress_at = eng_.now();
        }
        if (dist <= kin_.eps) {
            b.target = std::nullopt;
            b.avoid = std::nullopt;
            set_flag(pid, b, MotionFlag::Done);
        } else if (eng_.now() - b.progress_at >= kin_.stall_timeout) {
            b.target = std::nullopt;
            b.avoid = std::nullopt;
            set_flag(pid, b, MotionFlag::Fail);
        }
    }

  private:
    struct Body {
        Vec2 pos;
        double heading = 0.0;
        std::optional<Vec2> target;
        std::optional<Region> avoid;
        MotionFlag flag = MotionFlag::Idle;
        SimTime moved_at = 0;
        SimTime progress_at = 0;
        double best_dist = 0.0;
        bool frozen = false;
    };

    const Body& body(Pid pid) const {
        auto it = bodies_.find(pid);
        if (it == bodies_.end()) throw UnknownPid("no robot " + std::to_string(pid));
        return it->second;
    }
    Body& mut_body(Pid pid) { return const_cast<Body&>(body(pid)); }

    void set_flag(Pid pid, Body& b, MotionFlag f) {
        if (b.flag == f) return;
        b.flag = f;
        if (flag_hook_) flag_hook_(pid, f);
    }

    // Clearance radius used for planning; the hard guarantee is push_outside.
    double plan_clearance(const Region& avoid) const {
        return avoid.radius + kin_.robot_radius + 0.5 * kin_.robot_radius;
    }

    Vec2 steer_goal(const Body& b) const {
        if (!b.avoid || b.avoid->shape == Region::Shape::Everywhere) return *b.target;
        const Vec2 c = b.avoid->center;
        const double clear = plan_clearance(*b.avoid);
        if (segment_distance(b.pos, *b.target, c) >= clear) return *b.target;
        // Detour waypoint: offset sideways from the disc, on the side of the
        // straight segment the center is not on.
        Vec2 d = *b.target - b.pos;
        if (d.norm() < 1e-12) return *b.target;
        Vec2 u = d.unit();
        double along = dot(c - b.pos, u);
        Vec2 closest = b.pos + u * std::clamp(along, 0.0, d.norm());
        Vec2 away = closest - c;
        if (away.norm() < 1e-9) away = u.perp();
        return c + away.unit() * (clear * 1.3);
    }

    Vec2 push_outside(const Region& avoid, Vec2 p) const {
        if (avoid.shape == Region::Shape::Everywhere) return p;  // do_move rejected this target
        Vec2 away = p - avoid.center;
        double r = avoid.radius;
        if (away.norm() > r) return p;
        if (away.norm() < 1e-12) away = {1.0, 0.0};
        return avoid.center + away.unit() * (r + 1e-9);
    }

    void engage_tick() {
        if (tick_scheduled_) return;
        tick_scheduled_ = true;
        last_tick_ = eng_.now();
        schedule_tick();
    }

    void schedule_tick() {
        eng_.schedule_in(kin_.tick_period, EventKind::MotionTick, kWorldPid, [this] { on_tick(); });
    }

    void on_tick() {
        SimTime now = eng_.now();
        SimTime dt = now - last_tick_;
        last_tick_ = now;
        bool any_moving = false;
        for (auto& [pid, b] : bodies_) {
            if (b.frozen || b.flag != MotionFlag::InMotion) continue;
            step_motion(pid, dt);
            nlohmann::json tick{{"pos", b.pos},
                                {"target", b.target ? nlohmann::json(*b.target) : nlohmann::json()},
                                {"flag", to_string(b.flag)}};
            if (b.avoid) tick["avoid"] = *b.avoid;
            eng_.emit(pid, TraceKind::MotionTick, std::move(tick));
            if (b.flag == MotionFlag::InMotion) any_moving = true;
        }
        auto hits = detect_collisions();
        if (!hits.empty()) {
            nlohmann::json w = nlohmann::json::array();
            for (auto& [a, c] : hits) w.push_back({a, c});
            eng_.emit(kWorldPid, TraceKind::Violation,
                      {{"property", "collision_fault"},
                       {"witnesses", w},
                       {"detail", "robot bodies closer than 2*robot_radius"}});
            eng_.halt("collision");
            tick_scheduled_ = false;
            return;
        }
        if (any_moving) {
            schedule_tick();
        } else {
            tick_scheduled_ = false;
        }
    }

    Engine& eng_;
    ZoneMap zones_;
    KinematicParams kin_;
    FlagHook flag_hook_;
    std::map<Pid, Body> bodies_;
    bool tick_scheduled_ = false;
    SimTime last_tick_ = 0;
};

}  // namespace crossway
