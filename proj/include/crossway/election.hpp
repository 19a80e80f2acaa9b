#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
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

enum class ElectionAlgo { Bully, RandomBallot };

// Leader election by ballot collection: every participant sends its ballot to
// the whole group and decides once it holds one ballot per member; the winner
// is the largest (ballot, pid) pair, so bully (ballot = pid) picks the
// highest id and random ballots break ties toward the larger pid. Everyone
// computes the winner from the same full ballot set, so decided values agree.
// The computed leader also announces itself (COORD) so a participant can
// adopt the result directly. Times out to `fail` after d2.
class Election {
  public:
    Election(Engine& eng, Net& net, Gvh& gvh, Pid self, TimingParams timing,
             ElectionAlgo algo = ElectionAlgo::Bully)
        : eng_(eng), net_(net), gvh_(gvh), self_(self), timing_(timing), algo_(algo) {
        gvh_.register_slot("el", "el.leader");
        gvh_.register_slot("el", "el.failed");
        gvh_.publish("el", "el.failed", false);
    }

    bool running() const { return running_; }
    std::optional<Pid> leader() const { return leader_; }
    bool failed() const { return failed_; }

    static Pid winner(const std::map<Pid, std::uint64_t>& ballots) {
        auto best = ballots.begin();
        for (auto it = std::next(ballots.begin()); it != ballots.end(); ++it) {
            if (std::pair(it->second, it->first) > std::pair(best->second, best->first)) best = it;
        }
        return best->first;
    }

    void do_election(const std::vector<Pid>& plist) {
        if (plist.empty() || std::find(plist.begin(), plist.end(), self_) == plist.end())
            throw NotInPlist("do_election: self not in plist");
        plist_ = plist;
        running_ = true;
        std::uint64_t ballot = algo_ == ElectionAlgo::Bully
                                   ? static_cast<std::uint64_t>(self_)
                                   : eng_.rng().stream("election.ballot").bits();
        ballots_[self_] = ballot;
        if (try_decide()) return;
        std::uint64_t ep = ++epoch_;
        send_ballots();
        arm_retx(ep);
        eng_.schedule_in(timing_.d2, EventKind::TimerFire, self_, [this, ep] {
            if (ep != epoch_ || !running_) return;
            running_ = false;
            failed_ = true;
            gvh_.publish("el", "el.failed", true);
        });
    }

    void on_message(const Message& m) {
        const auto& p = m.payload;
        auto type = p.value("type", "");
        if (type == "ELECT") {
            Pid from = p.at("from").get<Pid>();
            ballots_[from] = p.at("ballot").get<std::uint64_t>();
            if (running_) {
                try_decide();
            } else if (leader_) {
                // A retransmitted ballot from a straggler: re-announce the
                // result, since the one-shot COORD may have been lost.
                net_.unicast(self_, from, {{"type", "COORD"}, {"leader", *leader_}});
            }
        } else if (type == "COORD") {
            if (running_) decide(p.at("leader").get<Pid>());
        }
    }

  private:
    void send_ballots() {
        for (Pid m : plist_) {
            if (m == self_ || eng_.crashed(m)) continue;
            net_.unicast(self_, m,
                         {{"type", "ELECT"}, {"round", 0}, {"from", self_}, {"ballot", ballots_[self_]}});
        }
    }

    void arm_retx(std::uint64_t ep) {
        eng_.schedule_in(timing_.d, EventKind::TimerFire, self_, [this, ep] {
            if (ep != epoch_ || !running_ || eng_.crashed(self_)) return;
            send_ballots();
            arm_retx(ep);
        });
    }

    bool try_decide() {
        for (Pid m : plist_)
            if (!ballots_.count(m)) return false;
        std::map<Pid, std::uint64_t> group;
        for (Pid m : plist_) group[m] = ballots_[m];
        Pid lead = winner(group);
        decide(lead);
        if (lead == self_) {
            for (Pid m : plist_)
                if (m != self_ && !eng_.crashed(m))
                    net_.unicast(self_, m, {{"type", "COORD"}, {"leader", lead}});
        }
        return true;
    }

    void decide(Pid lead) {
        running_ = false;
        epoch_ += 1;  // disarms retransmit and timeout timers
        leader_ = lead;
        gvh_.publish("el", "el.leader", lead);
    }

    Engine& eng_;
    Net& net_;
    Gvh& gvh_;
    Pid self_;
    TimingParams timing_;
    ElectionAlgo algo_;
    std::vector<Pid> plist_;
    std::map<Pid, std::uint64_t> ballots_;
    std::uint64_t epoch_ = 0;
    bool running_ = false;
    bool failed_ = false;
    std::optional<Pid> leader_;
};

}  // namespace crossway
