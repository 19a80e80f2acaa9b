#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "crossway/core.hpp"
#include "crossway/rng.hpp"
#include "crossway/trace.hpp"

namespace crossway {

enum class EventKind { MessageDelivery, TimerFire, MotionTick, AppStep, Crash };

struct Event {
    SimTime fire_at = 0;
    std::uint64_t seq = 0;  // insertion order; ties at equal fire_at replay identically
    Pid target = kWorldPid;
    EventKind kind = EventKind::TimerFire;
    std::function<void()> action;  // empty for AppStep: the engine steps the process itself
};

enum class StepStatus { Running, Terminal };

// A process behavior is stepped once per AppStep event and reports whether it
// has reached a terminal state.
using Behavior = std::function<StepStatus(SimTime now)>;

struct StopCondition {
    enum class Mode { Until, Quiescence, AllDone } mode = Mode::Quiescence;
    SimTime until = 0;

    static StopCondition until_time(SimTime t) { return {Mode::Until, t}; }
    static StopCondition quiescence() { return {Mode::Quiescence, 0}; }
    // Stops once every spawned process is terminal (or crashed), the queue
    // drains, or the clock would pass `bound`.
    static StopCondition all_done(SimTime bound) { return {Mode::AllDone, bound}; }
};

// Deterministic single-threaded discrete-event core: virtual clock, ordered
// event queue, cooperative process scheduler, named rng streams, trace sink.
// All cross-process interaction flows through scheduled events.
class Engine {
  public:
    static constexpr SimTime kDefaultStepPeriod = 100;  // ms between AppSteps

    explicit Engine(std::uint64_t master_seed = 0) : rng_(master_seed) {}

    SimTime now() const { return clock_; }
    bool halted() const { return halted_; }
    std::uint64_t master_seed() const { return rng_.master_seed(); }

    std::uint64_t schedule(SimTime fire_at, EventKind kind, Pid target,
                           std::function<void()> action) {
        if (fire_at < clock_)
            throw SchedulingInPast("schedule at t=" + std::to_string(fire_at) + " < now=" +
                                   std::to_string(clock_));
        std::uint64_t id = next_seq_++;
        queue_.push(Event{fire_at, id, target, kind, std::move(action)});
        return id;
    }

    std::uint64_t schedule_in(SimTime delay, EventKind kind, Pid target,
                              std::function<void()> action) {
        return schedule(clock_ + delay, kind, target, std::move(action));
    }

    void spawn_process(Pid pid, Behavior behavior, SimTime start_at,
                       SimTime step_period = kDefaultStepPeriod) {
        if (procs_.count(pid)) throw DuplicatePid("pid " + std::to_string(pid) + " already spawned");
        auto [it, ok] = procs_.emplace(pid, Proc{std::move(behavior), step_period, false, false});
        (void)ok;
        schedule(start_at, EventKind::AppStep, pid, nullptr);
    }

    bool spawned(Pid pid) const { return procs_.count(pid) != 0; }
    bool crashed(Pid pid) const {
        auto it = procs_.find(pid);
        return it != procs_.end() && it->second.crashed;
    }
    bool terminal(Pid pid) const {
        auto it = procs_.find(pid);
        return it != procs_.end() && it->second.terminal;
    }

    std::vector<Pid> process_ids() const {
        std::vector<Pid> out;
        out.reserve(procs_.size());
        for (const auto& [pid, p] : procs_) out.push_back(pid);
        return out;
    }

    bool all_settled() const {
        for (const auto& [pid, p] : procs_)
            if (!p.terminal && !p.crashed) return false;
        return true;
    }

    // Crash fault: from `at` on, the process neither steps nor exchanges
    // messages. Its physical body is the world's concern (see on_crash hooks).
    // The pid must exist by the time the crash fires; it may be scheduled
    // before the process is spawned.
    void schedule_crash(Pid pid, SimTime at) {
        schedule(at, EventKind::Crash, pid, [this, pid] {
            auto it = procs_.find(pid);
            if (it == procs_.end())
                throw UnknownPid("crash of unspawned pid " + std::to_string(pid));
            auto& p = it->second;
            if (p.crashed) return;
            p.crashed = true;
            emit(pid, TraceKind::Crash, {});
            for (auto& hook : crash_hooks_) hook(pid);
        });
    }

    void add_crash_hook(std::function<void(Pid)> hook) { crash_hooks_.push_back(std::move(hook)); }

    // Invoked after every dispatched event; the monitor lives here.
    void add_post_event_hook(std::function<void()> hook) {
        post_event_hooks_.push_back(std::move(hook));
    }

    void halt(const std::string& reason) {
        halted_ = true;
        halt_reason_ = reason;
    }
    const std::string& halt_reason() const { return halt_reason_; }

    // Named deterministic draws.
    double draw_uniform01(const std::string& stream) { return rng_.stream(stream).uniform01(); }
    double draw_exponential(const std::string& stream, double mean) {
        return rng_.stream(stream).exponential(mean);
    }
    double draw_bernoulli(const std::string& stream, double p) {
        return rng_.stream(stream).bernoulli(p);
    }
    RngSuite& rng() { return rng_; }

    Trace& trace() { return trace_; }
    const Trace& trace() const { return trace_; }

    void emit(Pid pid, TraceKind kind, nlohmann::json data) {
        trace_.append(TraceRecord{clock_, pid, kind, std::move(data)});
    }

    // Merged into the next run_start record; the scenario header lives here.
    void set_run_header(nlohmann::json extra) { run_header_ = std::move(extra); }

    const Trace& run(StopCondition stop) {
        nlohmann::json start{{"schema", 1}, {"seed", master_seed()}, {"stop", stop_name(stop)}};
        if (stop.mode != StopCondition::Mode::Quiescence) start["bound"] = stop.until;
        for (auto& [k, v] : run_header_.items()) start[k] = v;
        run_header_ = nlohmann::json::object();
        emit(kWorldPid, TraceKind::RunStart, start);

        while (!halted_) {
            if (stop.mode == StopCondition::Mode::AllDone && !procs_.empty() && all_settled())
                break;
            if (queue_.empty()) {
                if (stop.mode == StopCondition::Mode::Until && stop.until > clock_)
                    clock_ = stop.until;
                break;
            }
            const Event& top = queue_.top();
            if (stop.mode != StopCondition::Mode::Quiescence && top.fire_at > stop.until) {
                if (stop.mode == StopCondition::Mode::Until) clock_ = stop.until;
                break;
            }
            Event ev = top;
            queue_.pop();
            clock_ = ev.fire_at;  // fire_at >= clock_ holds by the scheduling precondition
            dispatch(ev);
            for (auto& hook : post_event_hooks_) hook();
        }

        emit(kWorldPid, TraceKind::RunStop, {{"clock", clock_}, {"halted", halted_}});
        return trace_;
    }

  private:
    struct Proc {
        Behavior behavior;
        SimTime step_period;
        bool crashed = false;
        bool terminal = false;
    };

    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return std::pair(a.fire_at, a.seq) > std::pair(b.fire_at, b.seq);
        }
    };

    static std::string stop_name(StopCondition s) {
        switch (s.mode) {
            case StopCondition::Mode::Until: return "until";
            case StopCondition::Mode::Quiescence: return "quiescence";
            default: return "all_done";
        }
    }

    void dispatch(const Event& ev) {
        if (ev.kind == EventKind::AppStep) {
            auto it = procs_.find(ev.target);
            if (it == procs_.end()) return;
            Proc& p = it->second;
            if (p.crashed || p.terminal) return;
            if (p.behavior(clock_) == StepStatus::Terminal) {
                p.terminal = true;
            } else {
                schedule(clock_ + p.step_period, EventKind::AppStep, ev.target, nullptr);
            }
            return;
        }
        if (ev.action) ev.action();
    }

    SimTime clock_ = 0;
    std::uint64_t next_seq_ = 0;
    bool halted_ = false;
    std::string halt_reason_;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::map<Pid, Proc> procs_;
    std::vector<std::function<void()>> post_event_hooks_;
    std::vector<std::function<void(Pid)>> crash_hooks_;
    RngSuite rng_;
    Trace trace_;
    nlohmann::json run_header_ = nlohmann::json::object();
};

}  // namespace crossway
