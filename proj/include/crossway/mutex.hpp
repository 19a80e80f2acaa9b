#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crossway/core.hpp"
#include "crossway/engine.hpp"
#include "crossway/gvh.hpp"
#include "crossway/netmodel.hpp"
#include "crossway/timing.hpp"

namespace crossway {

struct LamportStamp {
    std::uint64_t clock = 0;
    Pid pid = 0;

    friend bool operator==(const LamportStamp&, const LamportStamp&) = default;
    friend bool operator<(const LamportStamp& a, const LamportStamp& b) {
        return std::pair(a.clock, a.pid) < std::pair(b.clock, b.pid);
    }
};

inline void to_json(nlohmann::json& j, const LamportStamp& s) {
    j = {{"clock", s.clock}, {"pid", s.pid}};
}
inline void from_json(const nlohmann::json& j, LamportStamp& s) {
    j.at("clock").get_to(s.clock);
    j.at("pid").get_to(s.pid);
}

using ZoneSet = std::set<std::string>;

inline std::vector<std::string> to_sorted_vec(const ZoneSet& z) {
    return std::vector<std::string>(z.begin(), z.end());
}

inline bool intersects(const ZoneSet& a, const ZoneSet& b) {
    for (const auto& x : a)
        if (b.count(x)) return true;
    return false;
}

// Multi-resource mutual exclusion: totally ordered whole-set requests with a
// (Lamport clock, pid) priority. A request is granted atomically once every
// group member has replied OK; zones may then be released one at a time.
struct MutexOptions {
    // Fault-injection switch for checker sensitivity tests: reply OK to
    // every request unconditionally, breaking the safety argument.
    bool always_ok = false;
};

// Requests are retransmitted (receivers deduplicate and re-reply) so message
// loss stalls progress only temporarily.
class Mutex {
  public:
    using Options = MutexOptions;

    Mutex(Engine& eng, Net& net, Gvh& gvh, Pid self, TimingParams timing, Options opt = {})
        : eng_(eng), net_(net), gvh_(gvh), self_(self), timing_(timing), opt_(opt) {
        gvh_.register_slot("mux", "mux.crit");
        gvh_.register_slot("mux", "mux.failed");
        gvh_.register_slot("mux", "mux.crit_set");
        gvh_.register_slot("mux", "mux.requested");
        gvh_.publish("mux", "mux.crit", false);
        gvh_.publish("mux", "mux.failed", false);
        gvh_.publish("mux", "mux.crit_set", std::vector<std::string>{});
    }

    void set_xid(std::string xid) { xid_ = std::move(xid); }

    bool crit() const { return crit_; }
    bool failed() const { return failed_; }
    const ZoneSet& crit_set() const { return crit_set_; }
    bool has_pending() const { return pending_.has_value(); }
    ZoneSet pending_zones() const { return pending_ ? pending_->zones : ZoneSet{}; }
    SimTime last_grant_latency() const { return last_grant_latency_; }

    // Pure decision rule, exposed for table-driven tests: should a process in
    // state (held, mine) defer a request for `zones` stamped `stamp`?
    static bool defers(const ZoneSet& held, const std::optional<std::pair<ZoneSet, LamportStamp>>& mine,
                       const ZoneSet& zones, const LamportStamp& stamp) {
        if (intersects(held, zones)) return true;
        return mine && intersects(mine->first, zones) && mine->second < stamp;
    }

    void do_mutex(const ZoneSet& zones, const std::vector<Pid>& plist) {
        if (pending_) throw RequestPending("pid " + std::to_string(self_) + " already has a request");
        if (zones.empty()) throw ValidationError("do_mutex: empty zone set");
        if (std::find(plist.begin(), plist.end(), self_) == plist.end())
            throw NotInPlist("do_mutex: self not in plist");
        lamport_ += 1;
        Pending p;
        p.zones = zones;
        p.stamp = {lamport_, self_};
        p.requested_at = eng_.now();
        for (Pid m : plist)
            if (m != self_) p.waiting_on.insert(m);
        plist_ = plist;
        pending_ = std::move(p);
        epoch_ += 1;
        gvh_.publish("mux", "mux.requested", to_sorted_vec(zones));
        if (pending_->waiting_on.empty()) {
            grant();
            return;
        }
        send_requests(pending_->waiting_on);
        arm_retx(epoch_);
        std::uint64_t ep = epoch_;
        eng_.schedule_in(timing_.d2, EventKind::TimerFire, self_, [this, ep] {
            if (ep != epoch_ || !pending_) return;
            pending_.reset();
            failed_ = true;
            gvh_.publish("mux", "mux.failed", true);
            gvh_.publish("mux", "mux.requested", std::monostate{});
            service_deferred();  // our priority no longer blocks anyone
        });
    }

    void release(const ZoneSet& zones) {
        for (const auto& z : zones)
            if (!crit_set_.count(z)) throw NotHeld("release of zone '" + z + "' not held");
        for (const auto& z : zones) crit_set_.erase(z);
        gvh_.publish("mux", "mux.crit_set", to_sorted_vec(crit_set_));
        if (crit_set_.empty() && crit_) {
            crit_ = false;
            gvh_.publish("mux", "mux.crit", false);
        }
        for (Pid m : plist_)
            if (m != self_ && !eng_.crashed(m))
                net_.unicast(self_, m,
                             {{"type", "RELEASE-NOTIFY"},
                              {"xid", xid_},
                              {"zones", to_sorted_vec(zones)}});
        service_deferred();
    }

    void on_message(const Message& m) {
        const auto& p = m.payload;
        auto type = p.value("type", "");
        if (type == "REQUEST") {
            LamportStamp stamp = p.at("stamp").get<LamportStamp>();
            ZoneSet zones;
            for (const auto& z : p.at("zones")) zones.insert(z.get<std::string>());
            lamport_ = std::max(lamport_, stamp.clock) + 1;
            on_request(m.src, zones, stamp);
        } else if (type == "OK") {
            LamportStamp stamp = p.at("stamp").get<LamportStamp>();
            lamport_ = std::max(lamport_, stamp.clock) + 1;
            on_ok(m.src, stamp);
        } else if (type == "RELEASE-NOTIFY") {
            // Informational: grant bookkeeping happens via deferred-reply OKs.
        }
    }

  private:
    struct Pending {
        ZoneSet zones;
        LamportStamp stamp;
        SimTime requested_at = 0;
        std::set<Pid> waiting_on;
    };

    struct PeerRequest {
        ZoneSet zones;
        LamportStamp stamp;
        bool deferred = false;
    };

    void send_requests(const std::set<Pid>& members) {
        for (Pid m : members) {
            if (eng_.crashed(m)) continue;
            net_.unicast(self_, m,
                         {{"type", "REQUEST"},
                          {"xid", xid_},
                          {"zones", to_sorted_vec(pending_->zones)},
                          {"stamp", pending_->stamp}});
        }
    }

    void arm_retx(std::uint64_t ep) {
        eng_.schedule_in(timing_.d, EventKind::TimerFire, self_, [this, ep] {
            if (ep != epoch_ || !pending_ || eng_.crashed(self_)) return;
            send_requests(pending_->waiting_on);
            arm_retx(ep);
        });
    }

    void on_request(Pid from, const ZoneSet& zones, const LamportStamp& stamp) {
        auto it = peers_.find(from);
        if (it != peers_.end() && it->second.stamp == stamp) {
            if (it->second.deferred) return;  // duplicate of a request we are sitting on
            reply_ok(from, stamp);            // duplicate of one we answered; the OK was lost
            return;
        }
        std::optional<std::pair<ZoneSet, LamportStamp>> mine;
        if (pending_) mine = std::make_pair(pending_->zones, pending_->stamp);
        bool defer = !opt_.always_ok && defers(crit_set_, mine, zones, stamp);
        peers_[from] = PeerRequest{zones, stamp, defer};
        if (!defer) reply_ok(from, stamp);
    }

    void reply_ok(Pid to, const LamportStamp& stamp) {
        if (eng_.crashed(self_)) return;
        net_.unicast(self_, to, {{"type", "OK"}, {"xid", xid_}, {"stamp", stamp}});
    }

    void on_ok(Pid from, const LamportStamp& stamp) {
        if (!pending_ || !(stamp == pending_->stamp)) return;
        pending_->waiting_on.erase(from);
        if (pending_->waiting_on.empty()) grant();
    }

    void grant() {
        for (const auto& z : pending_->zones) crit_set_.insert(z);
        last_grant_latency_ = eng_.now() - pending_->requested_at;
        pending_.reset();
        epoch_ += 1;  // disarms the retransmit and timeout timers
        crit_ = true;
        gvh_.publish("mux", "mux.crit_set", to_sorted_vec(crit_set_));
        gvh_.publish("mux", "mux.crit", true);
        gvh_.publish("mux", "mux.requested", std::monostate{});
    }

    // After a release (or request failure), deferred requests whose conflicts
    // cleared get their OKs.
    void service_deferred() {
        for (auto& [from, peer] : peers_) {
            if (!peer.deferred) continue;
            std::optional<std::pair<ZoneSet, LamportStamp>> mine;
            if (pending_) mine = std::make_pair(pending_->zones, pending_->stamp);
            if (defers(crit_set_, mine, peer.zones, peer.stamp)) continue;
            peer.deferred = false;
            reply_ok(from, peer.stamp);
        }
    }

    Engine& eng_;
    Net& net_;
    Gvh& gvh_;
    Pid self_;
    TimingParams timing_;
    Options opt_;
    std::string xid_ = "x0";
    std::uint64_t lamport_ = 0;
    std::uint64_t epoch_ = 0;
    std::optional<Pending> pending_;
    std::vector<Pid> plist_;
    ZoneSet crit_set_;
    std::map<Pid, PeerRequest> peers_;
    bool crit_ = false;
    bool failed_ = false;
    SimTime last_grant_latency_ = -1;
};

}  // namespace crossway
