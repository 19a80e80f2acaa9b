#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crossway/engine.hpp"
#include "crossway/gvh.hpp"
#include "crossway/icp.hpp"
#include "crossway/mutex.hpp"
#include "crossway/physics.hpp"
#include "crossway/scenario.hpp"
#include "crossway/trace.hpp"

namespace crossway {

struct MonitorOptions {
    bool halt_on_violation = false;
};

// Checks safety properties over the event stream. The same per-record
// checker serves two modes:
//   * online  — attach() hooks the engine and turns findings into violation
//               records as the run unfolds (optionally halting it);
//   * offline — feed a stored trace through check_event() record by record
//               and collect the findings.
// Both modes see the identical record sequence, so they derive identical
// violations; replay_equivalence() below asserts exactly that.
//
// Properties (latched: each (property, witnesses) pair fires once):
//   traffic_safety     two robot centers inside the same critical zone
//   mutex_safety       two processes hold the same zone at once
//   zone_guarantee     a moving vehicle's remaining interior zones are not
//                      all covered by its held set
//   request_shape      a lock request differs from the route's interior set
//   gvh_single_writer  a slot written by two different writers
//   avoid_safety       a robot center inside its own keep-out disc
// collision_fault is emitted by the physics engine itself (which also halts
// the run); the monitor passes those records through untouched.
class Monitor {
  public:
    using Options = MonitorOptions;

    explicit Monitor(Options opts = {}) : opts_(opts) {}

    // Online mode: scan records appended by each event, emit findings.
    void attach(Engine& eng) {
        eng.add_post_event_hook([this, &eng] {
            const auto& recs = eng.trace().records();
            while (scanned_ < recs.size()) {
                const TraceRecord rec = recs[scanned_++];  // copy: emit() reallocates
                if (rec.kind == TraceKind::Violation) continue;
                for (auto& v : check_event(rec)) {
                    eng.emit(kWorldPid, TraceKind::Violation, v.data);
                    if (opts_.halt_on_violation) eng.halt("violation: " + property_of(v));
                }
            }
        });
    }

    // Feeds one record; returns any violations it newly establishes.
    // Violation records in the input are counted but never re-checked.
    std::vector<TraceRecord> check_event(const TraceRecord& rec) {
        if (rec.kind == TraceKind::Violation) return {};
        std::vector<TraceRecord> out;
        switch (rec.kind) {
            case TraceKind::RunStart: on_run_start(rec); break;
            case TraceKind::Spawn: on_spawn(rec); break;
            case TraceKind::Crash: crashed_.insert(rec.pid); break;
            case TraceKind::Done: pose_.erase(rec.pid); break;  // body left the world
            case TraceKind::MotionTick: on_motion(rec, out); break;
            case TraceKind::GvhPublish: on_publish(rec, out); break;
            case TraceKind::AppLoc: on_app_loc(rec, out); break;
            default: break;
        }
        return out;
    }

    const std::vector<TraceRecord>& violations() const { return found_; }

    static std::string property_of(const TraceRecord& v) {
        return v.data.value("property", "?");
    }

  private:
    void on_run_start(const TraceRecord& rec) {
        if (!rec.data.contains("scenario")) return;
        auto sc = rec.data.at("scenario").get<Scenario>();
        zones_.emplace(sc.zones);
        for (const auto& v : sc.vehicles)
            routes_[v.pid] = make_path(sc.routing, v.arrival, v.departure);
    }

    void on_spawn(const TraceRecord& rec) {
        pose_[rec.pid] = rec.data.at("pos").get<Vec2>();
        if (rec.data.contains("route") && !routes_.count(rec.pid)) {
            Route r;
            r.arrival = rec.data.value("arrival", std::string{});
            r.departure = rec.data.value("departure", std::string{});
            r.zones = rec.data.at("route").get<std::vector<std::string>>();
            routes_[rec.pid] = std::move(r);
        }
    }

    void on_motion(const TraceRecord& rec, std::vector<TraceRecord>& out) {
        pose_[rec.pid] = rec.data.at("pos").get<Vec2>();
        if (rec.data.contains("avoid")) {
            auto avoid = rec.data.at("avoid").get<Region>();
            if (avoid.shape == Region::Shape::Disc &&
                distance(pose_[rec.pid], avoid.center) < avoid.radius - 1e-6)
                flag(rec, "avoid_safety", {{"pid", rec.pid}, {"avoid", avoid}},
                     "robot center inside its keep-out disc", out);
        }
        check_traffic(rec, out);
    }

    void check_traffic(const TraceRecord& rec, std::vector<TraceRecord>& out) {
        if (!zones_) return;
        auto here = zones_->zone_of(pose_[rec.pid]);
        if (!here || zones_->at(*here).kind != ZoneKind::Critical) return;
        for (const auto& [other, p] : pose_) {
            if (other == rec.pid) continue;
            auto theirs = zones_->zone_of(p);
            if (theirs && *theirs == *here)
                flag(rec, "traffic_safety",
                     {{"zone", *here}, {"pids", sorted_pair(rec.pid, other)}},
                     "two robots inside one conflict zone", out);
        }
    }

    void on_publish(const TraceRecord& rec, std::vector<TraceRecord>& out) {
        const auto key = rec.data.at("key").get<std::string>();
        const auto writer = rec.data.at("writer").get<std::string>();
        auto claim = writers_.find({rec.pid, key});
        if (claim == writers_.end()) {
            writers_[{rec.pid, key}] = writer;
        } else if (claim->second != writer) {
            flag(rec, "gvh_single_writer",
                 {{"pid", rec.pid}, {"key", key},
                  {"writers", nlohmann::json::array({claim->second, writer})}},
                 "slot written by a second writer", out);
        }
        SlotValue val = slot_value_from_json(rec.data.at("value"));
        if (key == "mux.crit_set") {
            auto zl = std::get_if<std::vector<std::string>>(&val);
            held_[rec.pid] = zl ? ZoneSet(zl->begin(), zl->end()) : ZoneSet{};
            check_mutex(rec, out);
            check_zone_guarantee(rec, rec.pid, out);
        } else if (key == "mux.requested") {
            if (auto zl = std::get_if<std::vector<std::string>>(&val))
                check_request_shape(rec, ZoneSet(zl->begin(), zl->end()), out);
        }
    }

    void check_mutex(const TraceRecord& rec, std::vector<TraceRecord>& out) {
        const ZoneSet& mine = held_[rec.pid];
        for (const auto& [other, theirs] : held_) {
            if (other == rec.pid) continue;
            for (const auto& z : mine)
                if (theirs.count(z))
                    flag(rec, "mutex_safety",
                         {{"zone", z}, {"pids", sorted_pair(rec.pid, other)}},
                         "zone granted to two holders", out);
        }
    }

    void check_request_shape(const TraceRecord& rec, const ZoneSet& asked,
                             std::vector<TraceRecord>& out) {
        auto route = routes_.find(rec.pid);
        if (route == routes_.end()) return;
        auto mid = mid_zones(route->second.zones);
        ZoneSet want(mid.begin(), mid.end());
        if (asked != want)
            flag(rec, "request_shape",
                 {{"pid", rec.pid}, {"asked", to_sorted_vec(asked)}, {"expected", to_sorted_vec(want)}},
                 "lock request is not the route's interior set", out);
    }

    void on_app_loc(const TraceRecord& rec, std::vector<TraceRecord>& out) {
        loc_[rec.pid] = rec.data.value("loc", std::string{});
        if (rec.data.contains("myseq"))
            myseq_[rec.pid] = rec.data.at("myseq").get<std::vector<std::string>>();
        check_zone_guarantee(rec, rec.pid, out);
    }

    // While a vehicle is crossing, every interior zone still ahead of it must
    // sit inside its own held set.
    void check_zone_guarantee(const TraceRecord& rec, Pid pid, std::vector<TraceRecord>& out) {
        if (!zones_) return;
        auto l = loc_.find(pid);
        if (l == loc_.end() || (l->second != "move_wait" && l->second != "S1")) return;
        auto seq = myseq_.find(pid);
        if (seq == myseq_.end()) return;
        std::vector<std::string> missing;
        for (const auto& z : seq->second) {
            if (!zones_->find(z) || zones_->at(z).kind != ZoneKind::Critical) continue;
            if (!held_[pid].count(z)) missing.push_back(z);
        }
        if (!missing.empty())
            flag(rec, "zone_guarantee", {{"pid", pid}, {"missing", missing}},
                 "moving without holding the zones still ahead", out);
    }

    static nlohmann::json sorted_pair(Pid a, Pid b) {
        return nlohmann::json::array({std::min(a, b), std::max(a, b)});
    }

    void flag(const TraceRecord& at, const std::string& property, nlohmann::json witnesses,
              const std::string& detail, std::vector<TraceRecord>& out) {
        std::string latch = property + "|" + witnesses.dump();
        if (!fired_.insert(latch).second) return;
        TraceRecord v;
        v.time = at.time;
        v.pid = kWorldPid;
        v.kind = TraceKind::Violation;
        v.data = {{"property", property}, {"witnesses", std::move(witnesses)}, {"detail", detail}};
        found_.push_back(v);
        out.push_back(found_.back());
    }

    Options opts_;
    size_t scanned_ = 0;
    std::optional<ZoneMap> zones_;
    std::map<Pid, Route> routes_;
    std::map<Pid, Vec2> pose_;
    std::map<Pid, ZoneSet> held_;
    std::map<Pid, std::string> loc_;
    std::map<Pid, std::vector<std::string>> myseq_;
    std::map<std::pair<Pid, std::string>, std::string> writers_;
    std::set<Pid> crashed_;
    std::set<std::string> fired_;
    std::vector<TraceRecord> found_;
};

// ---- offline trace analysis -------------------------------------------

// Runs a stored trace back through a fresh Monitor and compares what it
// derives with the violation records the run actually logged (physics-owned
// collision_fault records are excluded: the monitor never produces those).
inline nlohmann::json replay_equivalence(const Trace& trace) {
    Monitor m;
    std::vector<std::string> derived, recorded;
    auto sig = [](const TraceRecord& r) {
        return std::to_string(r.time) + "|" + Monitor::property_of(r) + "|" +
               r.data.value("witnesses", nlohmann::json()).dump();
    };
    for (const auto& rec : trace.records()) {
        if (rec.kind == TraceKind::Violation) {
            if (Monitor::property_of(rec) != "collision_fault") recorded.push_back(sig(rec));
            continue;
        }
        for (auto& v : m.check_event(rec)) derived.push_back(sig(v));
    }
    std::sort(derived.begin(), derived.end());
    std::sort(recorded.begin(), recorded.end());
    std::vector<std::string> missing, extra;
    std::set_difference(recorded.begin(), recorded.end(), derived.begin(), derived.end(),
                        std::back_inserter(missing));
    std::set_difference(derived.begin(), derived.end(), recorded.begin(), recorded.end(),
                        std::back_inserter(extra));
    return {{"equivalent", missing.empty() && extra.empty()},
            {"derived", derived.size()},
            {"recorded", recorded.size()},
            {"missing", missing},
            {"extra", extra}};
}

// Geocast audit. For every geocast family:
//   * exclusion — no delivery to a receiver whose tracked position was
//     outside the region at delivery time (checked unconditionally);
//   * inclusion — every process spawned before the send, alive through the
//     window, and inside the region for the whole window got the message
//     (meaningful for loss-free runs; reported regardless);
//   * latency — time from first send to each first delivery.
// Assumes every spawned process is a network endpoint, which holds for
// traces produced by this simulator.
inline nlohmann::json check_geocast_trace(const Trace& trace) {
    struct Family {
        Pid src;
        SimTime t0 = 0, deadline = 0;
        Region region;
        std::set<Pid> delivered;
        SimTime last_first_delivery = 0;
    };
    std::map<std::uint64_t, Family> fams;
    std::map<Pid, std::vector<std::pair<SimTime, Vec2>>> track;  // pose history
    std::map<Pid, SimTime> spawned, crashed, departed;
    nlohmann::json exclusion = nlohmann::json::array();

    auto pose_at = [&](Pid pid, SimTime t) -> std::optional<Vec2> {
        auto it = track.find(pid);
        if (it == track.end() || it->second.front().first > t) return std::nullopt;
        Vec2 last = it->second.front().second;
        for (const auto& [when, p] : it->second) {
            if (when > t) break;
            last = p;
        }
        return last;
    };

    for (const auto& rec : trace.records()) {
        switch (rec.kind) {
            case TraceKind::Spawn:
                spawned.emplace(rec.pid, rec.time);
                track[rec.pid].push_back({rec.time, rec.data.at("pos").get<Vec2>()});
                break;
            case TraceKind::MotionTick:
                track[rec.pid].push_back({rec.time, rec.data.at("pos").get<Vec2>()});
                break;
            case TraceKind::Crash: crashed.emplace(rec.pid, rec.time); break;
            case TraceKind::Done: departed.emplace(rec.pid, rec.time); break;
            case TraceKind::MsgSend: {
                if (rec.data.value("mode", "") != "geocast") break;
                auto id = rec.data.at("msg_id").get<std::uint64_t>();
                if (fams.count(id)) break;  // later attempts repeat the header
                Family f;
                f.src = rec.pid;
                f.t0 = rec.data.at("t0").get<SimTime>();
                f.deadline = rec.data.at("deadline_at").get<SimTime>();
                f.region = rec.data.at("region").get<Region>();
                fams.emplace(id, std::move(f));
                break;
            }
            case TraceKind::MsgDeliver: {
                auto id = rec.data.at("msg_id").get<std::uint64_t>();
                auto fam = fams.find(id);
                if (fam == fams.end()) break;  // unicast (acks etc.)
                Pid dst = rec.data.at("dst").get<Pid>();
                if (fam->second.delivered.insert(dst).second)
                    fam->second.last_first_delivery =
                        std::max(fam->second.last_first_delivery, rec.time - fam->second.t0);
                auto p = pose_at(dst, rec.time);
                if (p && !fam->second.region.contains(*p))
                    exclusion.push_back({{"msg_id", id}, {"dst", dst}, {"t", rec.time}});
                break;
            }
            default: break;
        }
    }

    nlohmann::json inclusion = nlohmann::json::array();
    SimTime max_latency = 0;
    for (const auto& [id, f] : fams) {
        max_latency = std::max(max_latency, f.last_first_delivery);
        for (const auto& [pid, at] : spawned) {
            if (pid == f.src || at > f.t0) continue;
            if (crashed.count(pid) && crashed[pid] <= f.deadline) continue;
            if (departed.count(pid) && departed[pid] <= f.deadline) continue;
            bool inside_throughout = true;
            for (SimTime probe : {f.t0, f.deadline}) {
                auto p = pose_at(pid, probe);
                if (!p || !f.region.contains(*p)) inside_throughout = false;
            }
            for (const auto& [when, p] : track[pid])
                if (when >= f.t0 && when <= f.deadline && !f.region.contains(p))
                    inside_throughout = false;
            if (inside_throughout && !f.delivered.count(pid))
                inclusion.push_back({{"msg_id", id}, {"pid", pid}});
        }
    }
    return {{"families", fams.size()},
            {"exclusion_violations", exclusion},
            {"inclusion_violations", inclusion},
            {"max_first_latency", max_latency}};
}

// Registration audit over the gvh publish stream: collects each process's
// final roster and timestamp, groups identical rosters, and checks
// soundness: every listed member announced itself (published
// reg.registering=true) at most d1 before the roster was finalized. The d1
// window comes from the scenario embedded in the run header; without one
// only announce-existence is checked. Crashed members are exempt from the
// recency bound — they can neither re-announce nor leave, so survivors
// legitimately keep listing them on roster reruns.
inline nlohmann::json check_registration_trace(const Trace& trace) {
    std::map<Pid, std::vector<Pid>> first_rlist, last_rlist;
    std::map<Pid, SimTime> first_ts, last_ts;
    std::map<Pid, SimTime> last_announce, crashed_at;
    std::optional<SimTime> d1;
    nlohmann::json unsound = nlohmann::json::array();

    for (const auto& rec : trace.records()) {
        if (rec.kind == TraceKind::RunStart && rec.data.contains("scenario")) {
            d1 = rec.data.at("scenario").get<Scenario>().effective_timing().d1;
            continue;
        }
        if (rec.kind == TraceKind::Crash) {
            crashed_at.emplace(rec.pid, rec.time);
            continue;
        }
        if (rec.kind != TraceKind::GvhPublish) continue;
        auto key = rec.data.at("key").get<std::string>();
        SlotValue val = slot_value_from_json(rec.data.at("value"));
        if (key == "reg.registering") {
            if (auto b = std::get_if<bool>(&val); b && *b) last_announce[rec.pid] = rec.time;
        } else if (key == "reg.rlist") {
            if (auto pl = std::get_if<std::vector<Pid>>(&val)) {
                if (!first_rlist.count(rec.pid)) first_rlist[rec.pid] = *pl;
                last_rlist[rec.pid] = *pl;
                for (Pid q : *pl) {
                    auto ann = last_announce.find(q);
                    if (ann == last_announce.end()) {
                        unsound.push_back({{"pid", rec.pid}, {"lists", q}, {"t", rec.time},
                                           {"reason", "never_announced"}});
                    } else if (d1 && rec.time - ann->second > *d1 &&
                               !(crashed_at.count(q) && crashed_at[q] <= rec.time)) {
                        unsound.push_back({{"pid", rec.pid}, {"lists", q}, {"t", rec.time},
                                           {"announced_at", ann->second},
                                           {"reason", "stale_announce"}});
                    }
                }
            } else {
                last_rlist.erase(rec.pid);
            }
        } else if (key == "reg.ts") {
            if (auto t = std::get_if<SimTime>(&val)) {
                if (!first_ts.count(rec.pid)) first_ts[rec.pid] = *t;
                last_ts[rec.pid] = *t;
            }
        }
    }

    // Agreement is judged on each process's first finalized roster: later
    // reruns legitimately shrink the roster as members depart.
    std::map<std::vector<Pid>, std::vector<Pid>> by_roster;
    for (const auto& [pid, r] : first_rlist) by_roster[r].push_back(pid);
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& [roster, members] : by_roster) {
        SimTime lo = 0, hi = 0;
        bool first = true;
        for (Pid m : members) {
            if (!first_ts.count(m)) continue;
            lo = first ? first_ts[m] : std::min(lo, first_ts[m]);
            hi = first ? first_ts[m] : std::max(hi, first_ts[m]);
            first = false;
        }
        groups.push_back({{"roster", roster}, {"members", members}, {"ts_spread", hi - lo}});
    }
    nlohmann::json per_pid = nlohmann::json::object();
    for (const auto& [pid, r] : first_rlist) {
        nlohmann::json e{{"first_rlist", r}};
        if (first_ts.count(pid)) e["first_ts"] = first_ts[pid];
        if (last_rlist.count(pid)) e["rlist"] = last_rlist[pid];
        if (last_ts.count(pid)) e["ts"] = last_ts[pid];
        per_pid[std::to_string(pid)] = e;
    }
    return {{"per_pid", per_pid},
            {"groups", groups},
            {"sound", unsound.empty()},
            {"unsound", unsound}};
}

// Run summary: per-vehicle final protocol state and timing, violation
// counts by property, and whether every vehicle finished.
inline nlohmann::json progress_report(const Trace& trace) {
    struct V {
        SimTime spawned_at = -1, done_at = -1;
        std::string loc = "?";
        bool crashed = false;
    };
    std::map<Pid, V> vs;
    std::map<std::string, int> by_property;
    SimTime end = 0;
    bool halted = false;

    for (const auto& rec : trace.records()) {
        switch (rec.kind) {
            case TraceKind::Spawn: vs[rec.pid].spawned_at = rec.time; break;
            case TraceKind::Crash:
                vs[rec.pid].crashed = true;
                vs[rec.pid].loc = "crashed";
                break;
            case TraceKind::AppLoc: {
                auto& v = vs[rec.pid];
                if (!v.crashed) {
                    v.loc = rec.data.value("loc", std::string("?"));
                    if (v.loc == "done") v.done_at = rec.time;
                }
                break;
            }
            case TraceKind::Violation: by_property[Monitor::property_of(rec)]++; break;
            case TraceKind::RunStop:
                end = rec.data.value("clock", rec.time);
                halted = rec.data.value("halted", false);
                break;
            default: break;
        }
    }

    nlohmann::json vehicles = nlohmann::json::object();
    int done = 0, stuck = 0;
    for (const auto& [pid, v] : vs) {
        nlohmann::json e{{"loc", v.loc}, {"spawned_at", v.spawned_at}};
        if (v.done_at >= 0) {
            e["done_at"] = v.done_at;
            e["duration"] = v.done_at - v.spawned_at;
            done++;
        }
        if (v.loc == "stuck" || v.crashed) stuck++;
        vehicles[std::to_string(pid)] = e;
    }
    nlohmann::json viols = nlohmann::json::object();
    for (const auto& [p, n] : by_property) viols[p] = n;
    return {{"vehicles", vehicles},
            {"done", done},
            {"stuck", stuck},
            {"all_done", !vs.empty() && done == static_cast<int>(vs.size())},
            {"end_time", end},
            {"halted", halted},
            {"violations", viols}};
}

}  // namespace crossway
