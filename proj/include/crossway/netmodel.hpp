#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "crossway/core.hpp"
#include "crossway/engine.hpp"
#include "crossway/geometry.hpp"
#include "crossway/gvh.hpp"
#include "crossway/physics.hpp"

namespace crossway {

enum class DelayKind { Constant, Uniform, Exponential };

struct CrashEntry {
    Pid pid = 0;
    SimTime at = 0;
};

inline void to_json(nlohmann::json& j, const CrashEntry& c) { j = {{"pid", c.pid}, {"at", c.at}}; }
inline void from_json(const nlohmann::json& j, CrashEntry& c) {
    j.at("pid").get_to(c.pid);
    j.at("at").get_to(c.at);
}

struct NetConfig {
    double mean_delay = 100.0;  // ms
    DelayKind delay_kind = DelayKind::Exponential;
    double delay_lo = 0.0, delay_hi = 0.0;  // uniform bounds
    double loss_rate = 0.0;
    std::vector<CrashEntry> crash_schedule;

    void validate() const {
        if (mean_delay < 0) throw ValidationError("net.mean_delay must be >= 0");
        if (loss_rate < 0 || loss_rate > 1) throw ValidationError("net.loss_rate must be in [0,1]");
        if (delay_kind == DelayKind::Uniform && (delay_lo < 0 || delay_hi < delay_lo))
            throw ValidationError("net.delay uniform bounds must satisfy 0 <= lo <= hi");
        for (const auto& c : crash_schedule)
            if (c.at < 0) throw ValidationError("net.crash_schedule times must be nonnegative");
    }

    SimTime retx_period() const {
        return std::max<SimTime>(1, static_cast<SimTime>(std::llround(mean_delay / 2.0)));
    }
};

inline void to_json(nlohmann::json& j, const NetConfig& c) {
    j = {{"mean_delay", c.mean_delay}, {"loss_rate", c.loss_rate}, {"crash_schedule", c.crash_schedule}};
    switch (c.delay_kind) {
        case DelayKind::Constant: j["delay_distribution"] = "constant"; break;
        case DelayKind::Exponential: j["delay_distribution"] = "exponential"; break;
        case DelayKind::Uniform:
            j["delay_distribution"] = {{"uniform", {c.delay_lo, c.delay_hi}}};
            break;
    }
}

inline void from_json(const nlohmann::json& j, NetConfig& c) {
    c.mean_delay = j.value("mean_delay", 100.0);
    c.loss_rate = j.value("loss_rate", 0.0);
    c.crash_schedule = j.value("crash_schedule", std::vector<CrashEntry>{});
    auto d = j.value("delay_distribution", nlohmann::json("exponential"));
    if (d.is_string()) {
        auto s = d.get<std::string>();
        if (s == "constant") c.delay_kind = DelayKind::Constant;
        else if (s == "exponential") c.delay_kind = DelayKind::Exponential;
        else throw ParseError("net.delay_distribution: unknown kind '" + s + "'");
    } else if (d.is_object() && d.contains("uniform")) {
        c.delay_kind = DelayKind::Uniform;
        c.delay_lo = d.at("uniform").at(0).get<double>();
        c.delay_hi = d.at("uniform").at(1).get<double>();
    } else {
        throw ParseError("net.delay_distribution: expected a kind name or {\"uniform\":[lo,hi]}");
    }
    c.validate();
}

struct UnicastMode {
    Pid dst = 0;
};
struct GeocastMode {
    Region area;
    SimTime window = 0;  // d: retransmission/delivery window from sent_at
};

struct Message {
    std::uint64_t msg_id = 0;
    Pid src = 0;
    Vec2 origin_pos{};
    nlohmann::json payload;
    SimTime sent_at = 0;
    std::variant<UnicastMode, GeocastMode> mode;
};

// Simulated wireless network. Unicasts take one sampled delay and may be
// lost. Geocasts replicate to every attached endpoint, filter on the
// receiver's position at each delivery attempt, and retransmit unacked
// replicas every retx_period until the window closes.
class Net {
  public:
    using Handler = std::function<void(const Message&)>;

    Net(Engine& eng, NetConfig cfg, World* world = nullptr)
        : eng_(eng), cfg_(cfg), world_(world) {
        cfg_.validate();
        for (const auto& c : cfg_.crash_schedule) crash(c.pid, c.at);
    }

    const NetConfig& config() const { return cfg_; }

    // Attaching a handler makes pid a network endpoint (a geocast recipient).
    void set_handler(Pid pid, Handler h) { handlers_[pid] = std::move(h); }

    // Used to publish the per-sender geocast completion flag.
    void attach_gvh(Pid pid, Gvh* gvh) {
        gvhs_[pid] = gvh;
        if (gvh && !gvh->has_slot(kGcastFlagSlot)) gvh->register_slot("net", kGcastFlagSlot);
    }

    void crash(Pid pid, SimTime at) { eng_.schedule_crash(pid, at); }

    std::uint64_t unicast(Pid src, Pid dst, nlohmann::json payload) {
        if (eng_.crashed(src)) throw SenderCrashed("unicast from crashed pid " + std::to_string(src));
        std::uint64_t id = next_id_++;
        Message m{id, src, origin_of(src), std::move(payload), eng_.now(), UnicastMode{dst}};
        transmit(m, dst, 0);
        return id;
    }

    std::uint64_t geocast_send(Pid src, nlohmann::json payload, Region area, SimTime window,
                               std::function<void(bool all_acked)> on_complete = nullptr) {
        if (eng_.crashed(src)) throw SenderCrashed("geocast from crashed pid " + std::to_string(src));
        std::uint64_t id = next_id_++;
        auto st = std::make_shared<Gcast>();
        st->msg = Message{id, src, origin_of(src), std::move(payload), eng_.now(),
                          GeocastMode{area, window}};
        st->deadline_at = eng_.now() + window;
        st->on_complete = std::move(on_complete);
        for (const auto& [pid, h] : handlers_)
            if (pid != src && !eng_.crashed(pid)) st->pending.insert(pid);
        gcasts_[id] = st;
        if (auto it = gvhs_.find(src); it != gvhs_.end() && it->second)
            it->second->publish("net", kGcastFlagSlot, false);

        attempt_round(st);
        if (st->pending.empty()) {
            // No recipients: completes on its own immediately.
            eng_.schedule_in(0, EventKind::TimerFire, src, [this, st] { complete(st); });
        } else {
            schedule_retx(st);
            eng_.schedule(st->deadline_at, EventKind::TimerFire, src,
                          [this, st] { complete(st); });
        }
        return id;
    }

    static bool deliverable(const Message& m, Vec2 receiver_pos) {
        const auto* g = std::get_if<GeocastMode>(&m.mode);
        if (!g) throw SimError("deliverable: message is not a geocast");
        return g->area.contains(receiver_pos);
    }

  private:
    static constexpr const char* kGcastFlagSlot = "net.gcastflag";

    struct Gcast {
        Message msg;
        SimTime deadline_at = 0;
        std::set<Pid> pending;    // endpoints that have not acked
        std::set<Pid> delivered;  // endpoints that got the payload at least once
        std::uint32_t attempts = 1;
        bool completed = false;
        std::function<void(bool)> on_complete;
    };

    Vec2 origin_of(Pid src) const {
        if (world_ && world_->has_robot(src)) return world_->pose(src);
        return {};
    }

    std::string kind_of(const nlohmann::json& payload) const {
        return payload.is_object() ? payload.value("type", "?") : "?";
    }

    SimTime sample_delay() {
        double d = 0.0;
        switch (cfg_.delay_kind) {
            case DelayKind::Constant: d = cfg_.mean_delay; break;
            case DelayKind::Uniform:
                d = eng_.rng().stream("net.delay").uniform(cfg_.delay_lo, cfg_.delay_hi);
                break;
            case DelayKind::Exponential:
                d = std::min(eng_.rng().stream("net.delay").exponential(
                                 std::max(cfg_.mean_delay, 1e-9)),
                             10.0 * cfg_.mean_delay);
                break;
        }
        return std::max<SimTime>(0, static_cast<SimTime>(std::llround(d)));
    }

    nlohmann::json send_data(const Message& m, Pid dst, std::uint32_t attempt) const {
        nlohmann::json j{{"msg_id", m.msg_id},
                         {"attempt", attempt},
                         {"dst", dst},
                         {"kind", kind_of(m.payload)},
                         {"payload", m.payload}};
        if (const auto* g = std::get_if<GeocastMode>(&m.mode)) {
            j["mode"] = "geocast";
            j["region"] = g->area;
            j["origin"] = m.origin_pos;
            j["t0"] = m.sent_at;
            j["deadline_at"] = m.sent_at + g->window;
        } else {
            j["mode"] = "unicast";
        }
        return j;
    }

    nlohmann::json end_data(const Message& m, Pid dst, std::uint32_t attempt) const {
        return {{"msg_id", m.msg_id}, {"attempt", attempt}, {"kind", kind_of(m.payload)}, {"dst", dst}};
    }

    void drop(const Message& m, Pid dst, std::uint32_t attempt, const std::string& reason) {
        auto j = end_data(m, dst, attempt);
        j["reason"] = reason;
        eng_.emit(dst, TraceKind::MsgDrop, std::move(j));
    }

    // One transmission of m toward dst: a send record plus, eventually,
    // exactly one terminal record (deliver or drop).
    void transmit(const Message& m, Pid dst, std::uint32_t attempt) {
        eng_.emit(m.src, TraceKind::MsgSend, send_data(m, dst, attempt));
        if (cfg_.loss_rate > 0 &&
            eng_.rng().stream("net.loss").bernoulli(cfg_.loss_rate)) {
            drop(m, dst, attempt, "loss");
            return;
        }
        SimTime delay = sample_delay();
        eng_.schedule_in(delay, EventKind::MessageDelivery, dst,
                         [this, m, dst, attempt] { arrive(m, dst, attempt); });
    }

    void arrive(const Message& m, Pid dst, std::uint32_t attempt) {
        if (eng_.crashed(dst)) {
            drop(m, dst, attempt, "crashed");
            return;
        }
        if (std::holds_alternative<GeocastMode>(m.mode)) {
            // A receiver whose body left the world has left every region.
            if (!receiver_present(dst) || !deliverable(m, receiver_pos(dst))) {
                drop(m, dst, attempt, "region");
                return;
            }
            auto it = gcasts_.find(m.msg_id);
            bool dup = it != gcasts_.end() && it->second->delivered.count(dst) != 0;
            auto j = end_data(m, dst, attempt);
            j["dup"] = dup;
            eng_.emit(dst, TraceKind::MsgDeliver, std::move(j));
            if (it != gcasts_.end()) it->second->delivered.insert(dst);
            // Ack every arrival so a lost ack is eventually repaired.
            if (!eng_.crashed(m.src))
                unicast(dst, m.src,
                        {{"type", "GEO-ACK"}, {"ack_of", m.msg_id}});
            if (!dup) dispatch(dst, m);
            return;
        }
        if (m.payload.is_object() && m.payload.value("type", "") == "GEO-ACK") {
            eng_.emit(dst, TraceKind::MsgDeliver, end_data(m, dst, attempt));
            on_ack(m.payload.at("ack_of").get<std::uint64_t>(), m.src);
            return;
        }
        eng_.emit(dst, TraceKind::MsgDeliver, end_data(m, dst, attempt));
        dispatch(dst, m);
    }

    bool receiver_present(Pid dst) const {
        if (!world_) throw SimError("geocast requires a world for receiver positions");
        return world_->has_robot(dst);
    }

    Vec2 receiver_pos(Pid dst) const {
        if (!world_) throw SimError("geocast requires a world for receiver positions");
        return world_->pose(dst);
    }

    void dispatch(Pid dst, const Message& m) {
        auto it = handlers_.find(dst);
        if (it != handlers_.end() && it->second) it->second(m);
    }

    void on_ack(std::uint64_t msg_id, Pid from) {
        auto it = gcasts_.find(msg_id);
        if (it == gcasts_.end()) return;
        auto& st = it->second;
        st->pending.erase(from);
        if (st->pending.empty() && !st->completed) complete(st);
    }

    void attempt_round(const std::shared_ptr<Gcast>& st) {
        for (Pid dst : st->pending) {
            if (eng_.crashed(dst)) continue;
            transmit(st->msg, dst, st->attempts - 1);
        }
    }

    void schedule_retx(const std::shared_ptr<Gcast>& st) {
        SimTime next = eng_.now() + cfg_.retx_period();
        if (next > st->deadline_at) return;
        eng_.schedule(next, EventKind::TimerFire, st->msg.src, [this, st] {
            if (st->completed || eng_.crashed(st->msg.src)) return;
            st->attempts += 1;
            attempt_round(st);
            schedule_retx(st);
        });
    }

    void complete(const std::shared_ptr<Gcast>& st) {
        if (st->completed || eng_.crashed(st->msg.src)) return;
        st->completed = true;
        bool all_acked = st->pending.empty();
        if (auto it = gvhs_.find(st->msg.src); it != gvhs_.end() && it->second)
            it->second->publish("net", kGcastFlagSlot, true);
        if (st->on_complete) st->on_complete(all_acked);
    }

    Engine& eng_;
    NetConfig cfg_;
    World* world_;
    std::uint64_t next_id_ = 1;
    std::map<Pid, Handler> handlers_;
    std::map<Pid, Gvh*> gvhs_;
    std::map<std::uint64_t, std::shared_ptr<Gcast>> gcasts_;
};

}  // namespace crossway
