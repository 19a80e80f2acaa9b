#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "crossway/core.hpp"
#include "crossway/geometry.hpp"
#include "crossway/mutex.hpp"
#include "crossway/physics.hpp"

namespace crossway {

// arrival -> departure -> interior critical zones, in traversal order.
using RoutingTable = std::map<std::string, std::map<std::string, std::vector<std::string>>>;

// Right-hand traversal table for the four-quadrant intersection: the short
// turn crosses one quadrant, straight crosses two, the long turn three.
inline RoutingTable default_routing_table() {
    return {
        {"A0", {{"A1", {"A"}}, {"C1", {"A", "C"}}, {"D1", {"A", "C", "D"}}}},
        {"B0", {{"B1", {"B"}}, {"D1", {"B", "D"}}, {"A1", {"B", "D", "A"}}}},
        {"C0", {{"C1", {"C"}}, {"A1", {"C", "A"}}, {"B1", {"C", "A", "B"}}}},
        {"D0", {{"D1", {"D"}}, {"B1", {"D", "B"}}, {"C1", {"D", "B", "C"}}}},
    };
}

struct Route {
    std::string arrival;
    std::string departure;
    std::vector<std::string> zones;  // [arrival, interiors..., departure]
};

inline Route make_path(const RoutingTable& table, const std::string& arrival,
                       const std::string& departure) {
    auto row = table.find(arrival);
    if (row == table.end()) throw IllegalPair("no routes start at '" + arrival + "'");
    auto entry = row->second.find(departure);
    if (entry == row->second.end())
        throw IllegalPair("no route " + arrival + " -> " + departure +
                          " (U-turn or unknown exit)");
    Route r{arrival, departure, {arrival}};
    r.zones.insert(r.zones.end(), entry->second.begin(), entry->second.end());
    r.zones.push_back(departure);
    return r;
}

// The zone list without its endpoints: the set a vehicle must lock.
inline std::vector<std::string> mid_zones(const std::vector<std::string>& seq) {
    if (seq.size() < 2) throw TooShort("mid of a sequence shorter than 2");
    return std::vector<std::string>(seq.begin() + 1, seq.end() - 1);
}

enum class IcpLoc { S0, RegWait, MutexWait, MoveWait, S1, Done, Stuck };

inline std::string to_string(IcpLoc l) {
    switch (l) {
        case IcpLoc::S0: return "S0";
        case IcpLoc::RegWait: return "reg_wait";
        case IcpLoc::MutexWait: return "mutex_wait";
        case IcpLoc::MoveWait: return "move_wait";
        case IcpLoc::S1: return "S1";
        case IcpLoc::Done: return "done";
        default: return "stuck";
    }
}

// What the state machine sees each step: a gvh snapshot plus pose and clock.
struct IcpView {
    std::optional<std::vector<Pid>> rlist;
    bool crit = false;
    bool mux_failed = false;
    MotionFlag motion = MotionFlag::Idle;
    Vec2 pose{};
    SimTime now = 0;
};

// Effects are returned, never executed inline; the process adapter carries
// them out against the real primitives.
struct FxRegister {};
struct FxMutex {
    ZoneSet zones;
    std::vector<Pid> plist;
};
struct FxMove {
    Vec2 target;
};
struct FxRelease {
    ZoneSet zones;
};
struct FxUnregister {};
struct FxStopMotion {};
using IcpEffect = std::variant<FxRegister, FxMutex, FxMove, FxRelease, FxUnregister, FxStopMotion>;

// Per-vehicle protocol state machine:
//   S0 -> reg_wait -> mutex_wait -> move_wait -> S1 -> done
// Registers, locks the interior of its route as one set, then drives zone
// center to zone center, releasing each interior zone once its pose is inside
// the next zone. A primitive failure parks the vehicle in the terminal
// `stuck` state.
class IcpCore {
  public:
    IcpCore(Pid pid, Route route, const ZoneMap* zones)
        : pid_(pid), route_(std::move(route)), zones_(zones), myseq_(route_.zones) {}

    Pid pid() const { return pid_; }
    IcpLoc loc() const { return loc_; }
    const Route& route() const { return route_; }
    const std::vector<std::string>& myseq() const { return myseq_; }
    const std::optional<std::string>& pre_destination() const { return pre_destination_; }
    const std::string& stuck_reason() const { return stuck_reason_; }
    bool terminal() const { return loc_ == IcpLoc::Done || loc_ == IcpLoc::Stuck; }

    // The interior zones the vehicle has not yet finished crossing.
    ZoneSet remaining_interiors() const {
        ZoneSet out;
        for (const auto& z : myseq_)
            if (zones_->at(z).kind == ZoneKind::Critical) out.insert(z);
        return out;
    }

    ZoneSet full_request() const {
        auto mid = mid_zones(route_.zones);
        return ZoneSet(mid.begin(), mid.end());
    }

    std::vector<IcpEffect> step(const IcpView& v) {
        std::vector<IcpEffect> fx;
        switch (loc_) {
            case IcpLoc::S0:
                fx.push_back(FxRegister{});
                loc_ = IcpLoc::RegWait;
                break;
            case IcpLoc::RegWait:
                if (v.rlist) {
                    plist_ = *v.rlist;
                    fx.push_back(FxMutex{full_request(), plist_});
                    loc_ = IcpLoc::MutexWait;
                }
                break;
            case IcpLoc::MutexWait:
                if (v.mux_failed) {
                    park("mutex_failed");
                    break;
                }
                if (v.crit) {
                    pre_destination_ = myseq_.front();
                    fx.push_back(FxMove{zones_->center(myseq_[1])});
                    loc_ = IcpLoc::MoveWait;
                }
                break;
            case IcpLoc::MoveWait: {
                if (v.motion == MotionFlag::Fail) {
                    park("motion_failed");
                    break;
                }
                if (v.motion != MotionFlag::Done) break;
                if (!zones_->at(myseq_[1]).footprint.contains(v.pose)) {
                    fx.push_back(FxMove{zones_->center(myseq_[1])});  // finish entering it
                    break;
                }
                // We are inside the next zone: the one behind us is crossed.
                if (zones_->at(myseq_.front()).kind == ZoneKind::Critical)
                    fx.push_back(FxRelease{{myseq_.front()}});
                myseq_.erase(myseq_.begin());
                if (myseq_.size() == 1) {
                    fx.push_back(FxMove{zones_->center(route_.departure)});
                    loc_ = IcpLoc::S1;
                } else {
                    fx.push_back(FxMove{zones_->center(myseq_[1])});
                }
                break;
            }
            case IcpLoc::S1: {
                if (v.motion == MotionFlag::Fail) {
                    park("motion_failed");
                    break;
                }
                if (v.motion != MotionFlag::Done) break;
                ZoneSet rest = remaining_interiors();
                if (!rest.empty()) fx.push_back(FxRelease{rest});
                fx.push_back(FxUnregister{});
                fx.push_back(FxStopMotion{});
                loc_ = IcpLoc::Done;
                break;
            }
            case IcpLoc::Done:
            case IcpLoc::Stuck: break;
        }
        return fx;
    }

  private:
    void park(std::string reason) {
        stuck_reason_ = std::move(reason);
        loc_ = IcpLoc::Stuck;
    }

    Pid pid_;
    Route route_;
    const ZoneMap* zones_;
    std::vector<std::string> myseq_;
    std::vector<Pid> plist_;
    std::optional<std::string> pre_destination_;
    std::string stuck_reason_;
    IcpLoc loc_ = IcpLoc::S0;
};

}  // namespace crossway
