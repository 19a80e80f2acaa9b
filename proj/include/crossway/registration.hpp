#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crossway/core.hpp"
#include "crossway/engine.hpp"
#include "crossway/geometry.hpp"
#include "crossway/gvh.hpp"
#include "crossway/netmodel.hpp"
#include "crossway/timing.hpp"

namespace crossway {

enum class RegPhase { Idle, Announcing, Echoing, Done };

inline std::string to_string(RegPhase p) {
    switch (p) {
        case RegPhase::Idle: return "idle";
        case RegPhase::Announcing: return "announcing";
        case RegPhase::Echoing: return "echoing";
        default: return "done";
    }
}

// Group registration over geocast: an announce round (JOIN) followed by an
// echo round (ECHO carrying the candidate set as heard), finalizing
// rList = everything heard, stamped ts. A LEAVE makes the remaining members
// null their lists and rerun the echo round; a JOIN heard after finalization
// does the same with the newcomer added. Both reruns restart the soundness
// window: surviving members count as re-invoking registration.
class Registration {
  public:
    Registration(Engine& eng, Net& net, Gvh& gvh, Pid self, TimingParams timing, Region area,
                 std::string xid = "x0")
        : eng_(eng), net_(net), gvh_(gvh), self_(self), timing_(timing), area_(area),
          xid_(std::move(xid)) {
        gvh_.register_slot("reg", "reg.rlist");
        gvh_.register_slot("reg", "reg.ts");
        gvh_.register_slot("reg", "reg.registering");
        gvh_.publish("reg", "reg.registering", false);
    }

    RegPhase phase() const { return phase_; }
    std::optional<std::vector<Pid>> rlist() const { return rlist_; }
    std::optional<SimTime> ts() const { return ts_; }
    const std::set<Pid>& candidates() const { return candidates_; }

    void do_register() {
        if (phase_ != RegPhase::Idle)
            throw AlreadyRegistering("pid " + std::to_string(self_) + " registration already active");
        phase_ = RegPhase::Announcing;
        candidates_ = {self_};
        echo_union_.clear();
        left_.clear();
        gvh_.publish("reg", "reg.registering", true);
        std::uint64_t ep = ++epoch_;
        send_join();
        at(timing_.d, ep, [this] { send_join(); });
        at(2 * timing_.d, ep, [this, ep] {
            phase_ = RegPhase::Echoing;
            send_echo();
            at(timing_.d, ep, [this] { send_echo(); });
            at(2 * timing_.d, ep, [this] { finalize(); });
        });
    }

    // Allowed any time after the first finalization, including while a
    // roster rerun is in flight (phase briefly back in Echoing).
    void unregister() {
        if (!registered_)
            throw NotRegistered("pid " + std::to_string(self_) + " is not registered");
        registered_ = false;
        net_.geocast_send(self_, {{"type", "LEAVE"}, {"xid", xid_}, {"pid", self_}}, area_,
                          timing_.d);
        epoch_ += 1;
        phase_ = RegPhase::Idle;
        rlist_.reset();
        ts_.reset();
        candidates_.clear();
        echo_union_.clear();
        left_.clear();
        gvh_.publish("reg", "reg.rlist", std::monostate{});
        gvh_.publish("reg", "reg.ts", std::monostate{});
        gvh_.publish("reg", "reg.registering", false);
    }

    void on_message(const Message& m) {
        const auto& p = m.payload;
        auto type = p.value("type", "");
        if (type == "JOIN") {
            Pid who = p.at("pid").get<Pid>();
            if (phase_ == RegPhase::Announcing || phase_ == RegPhase::Echoing) {
                candidates_.insert(who);
                left_.erase(who);
            } else if (phase_ == RegPhase::Done && rlist_ &&
                       std::find(rlist_->begin(), rlist_->end(), who) == rlist_->end()) {
                std::set<Pid> base(rlist_->begin(), rlist_->end());
                base.insert(who);
                rerun_echo_round(std::move(base));
            }
        } else if (type == "ECHO") {
            if (phase_ != RegPhase::Announcing && phase_ != RegPhase::Echoing) return;
            for (const auto& j : p.at("pids")) {
                Pid who = j.get<Pid>();
                if (!left_.count(who)) echo_union_.insert(who);
            }
        } else if (type == "LEAVE") {
            Pid who = p.at("pid").get<Pid>();
            left_.insert(who);
            candidates_.erase(who);
            echo_union_.erase(who);
            if (phase_ == RegPhase::Done && rlist_ &&
                std::find(rlist_->begin(), rlist_->end(), who) != rlist_->end()) {
                std::set<Pid> base(rlist_->begin(), rlist_->end());
                base.erase(who);
                rerun_echo_round(std::move(base));
            }
        }
    }

  private:
    void at(SimTime delay, std::uint64_t ep, std::function<void()> fn) {
        eng_.schedule_in(delay, EventKind::TimerFire, self_, [this, ep, fn = std::move(fn)] {
            if (ep != epoch_ || eng_.crashed(self_)) return;
            fn();
        });
    }

    void send_join() {
        net_.geocast_send(self_, {{"type", "JOIN"}, {"xid", xid_}, {"pid", self_}}, area_,
                          timing_.d);
    }

    void send_echo() {
        std::set<Pid> known = knowledge();
        net_.geocast_send(
            self_, {{"type", "ECHO"}, {"xid", xid_}, {"pids", std::vector<Pid>(known.begin(), known.end())}},
            area_, timing_.d);
    }

    std::set<Pid> knowledge() const {
        std::set<Pid> known = candidates_;
        known.insert(echo_union_.begin(), echo_union_.end());
        known.insert(self_);
        for (Pid p : left_) known.erase(p);
        return known;
    }

    void finalize() {
        std::set<Pid> known = knowledge();
        rlist_ = std::vector<Pid>(known.begin(), known.end());
        ts_ = eng_.now();
        phase_ = RegPhase::Done;
        registered_ = true;
        gvh_.publish("reg", "reg.rlist", *rlist_);
        gvh_.publish("reg", "reg.ts", *ts_);
    }

    // A membership change observed after Done: null the published pair and
    // rerun the echo round over the new base set.
    void rerun_echo_round(std::set<Pid> base) {
        phase_ = RegPhase::Echoing;
        candidates_ = std::move(base);
        candidates_.insert(self_);
        echo_union_.clear();
        rlist_.reset();
        ts_.reset();
        gvh_.publish("reg", "reg.rlist", std::monostate{});
        gvh_.publish("reg", "reg.ts", std::monostate{});
        gvh_.publish("reg", "reg.registering", true);
        std::uint64_t ep = ++epoch_;
        send_echo();
        at(timing_.d, ep, [this] { send_echo(); });
        at(2 * timing_.d, ep, [this] { finalize(); });
    }

    Engine& eng_;
    Net& net_;
    Gvh& gvh_;
    Pid self_;
    TimingParams timing_;
    Region area_;
    std::string xid_;
    RegPhase phase_ = RegPhase::Idle;
    bool registered_ = false;
    std::uint64_t epoch_ = 0;
    std::set<Pid> candidates_;
    std::set<Pid> echo_union_;
    std::set<Pid> left_;
    std::optional<std::vector<Pid>> rlist_;
    std::optional<SimTime> ts_;
};

}  // namespace crossway
