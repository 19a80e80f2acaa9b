#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crossway/engine.hpp"
#include "crossway/gvh.hpp"
#include "crossway/icp.hpp"
#include "crossway/monitor.hpp"
#include "crossway/mutex.hpp"
#include "crossway/netmodel.hpp"
#include "crossway/physics.hpp"
#include "crossway/registration.hpp"
#include "crossway/scenario.hpp"
#include "crossway/trace.hpp"

namespace crossway {

// Glues a scenario into a runnable system: one engine, world, and network,
// plus one vehicle stack (gvh + registration + mutex + protocol core) per
// configured vehicle, with the monitor attached. Processes interact only
// through messages and their own gvh slots; the adapter below carries the
// protocol core's effects to the primitives and mirrors the primitives'
// state back into slot reads.
class Sim {
  public:
    struct Vehicle {
        VehicleSpec spec;
        Route route;
        Gvh gvh;
        Registration reg;
        Mutex mux;
        IcpCore core;
        std::string last_loc;
        std::vector<std::string> last_myseq;

        Vehicle(Sim& sim, const VehicleSpec& s)
            : spec(s),
              route(make_path(sim.sc_.routing, s.arrival, s.departure)),
              gvh(s.pid, sim.make_publish_hook(s.pid)),
              reg(sim.eng_, sim.net_, gvh, s.pid, sim.timing_, sim.sc_.reg_region),
              mux(sim.eng_, sim.net_, gvh, s.pid, sim.timing_, {sim.rig_always_ok_}),
              core(s.pid, route, &sim.world_.zones()) {
            gvh.register_slot("moat", "moat.inmotion");
            gvh.register_slot("moat", "moat.failed");
            gvh.publish("moat", "moat.inmotion", false);
            gvh.publish("moat", "moat.failed", false);
        }
    };

    // rig_always_ok disables the lock algorithm's defer rule on every
    // vehicle — a deliberate fault injection for exercising the monitor.
    explicit Sim(Scenario sc, bool rig_always_ok = false)
        : sc_(std::move(sc)),
          rig_always_ok_(rig_always_ok),
          eng_(sc_.master_seed),
          world_(eng_, ZoneMap(sc_.zones), sc_.kinematics),
          net_(eng_, sc_.net, &world_),
          timing_(sc_.effective_timing()),
          monitor_({sc_.monitor.halt_on_violation}) {
        sc_.validate();
        eng_.set_run_header({{"scenario", sc_}});
        monitor_.attach(eng_);
        eng_.add_crash_hook([this](Pid pid) {
            if (world_.has_robot(pid)) world_.freeze(pid);
        });
        world_.set_flag_hook([this](Pid pid, MotionFlag f) {
            auto it = by_pid_.find(pid);
            if (it == by_pid_.end()) return;
            it->second->gvh.publish("moat", "moat.inmotion", f == MotionFlag::InMotion);
            it->second->gvh.publish("moat", "moat.failed", f == MotionFlag::Fail);
        });
        for (const auto& vs : sc_.vehicles) add_vehicle(vs);
    }

    const Scenario& scenario() const { return sc_; }
    Engine& engine() { return eng_; }
    World& world() { return world_; }
    Net& net() { return net_; }
    const TimingParams& timing() const { return timing_; }
    const Trace& trace() const { return eng_.trace(); }

    Vehicle& vehicle(Pid pid) { return *by_pid_.at(pid); }

    const Trace& run(SimTime max_time = 300000) {
        started_ = true;
        return eng_.run(StopCondition::all_done(max_time));
    }

  private:
    friend struct Vehicle;

    // Slot writes become trace records once the run starts; construction-time
    // writes only establish the documented initial values.
    Gvh::PublishHook make_publish_hook(Pid pid) {
        return [this, pid](const std::string& key, const SlotValue& value, std::uint64_t version,
                           const std::string& writer) {
            if (!started_) return;
            eng_.emit(pid, TraceKind::GvhPublish,
                      {{"key", key},
                       {"value", slot_value_to_json(value)},
                       {"version", version},
                       {"writer", writer}});
        };
    }

    void add_vehicle(const VehicleSpec& vs) {
        vehicles_.push_back(std::make_unique<Vehicle>(*this, vs));
        Vehicle* v = vehicles_.back().get();
        by_pid_[vs.pid] = v;
        world_.add_robot(vs.pid, vs.start_pos);
        net_.set_handler(vs.pid, [this, v](const Message& m) { route_message(*v, m); });
        // The spawn record is scheduled before the process so it precedes the
        // first protocol step at the same instant.
        eng_.schedule(vs.start_at, EventKind::TimerFire, vs.pid, [this, v] {
            eng_.emit(v->spec.pid, TraceKind::Spawn,
                      {{"pos", world_.pose(v->spec.pid)},
                       {"arrival", v->route.arrival},
                       {"departure", v->route.departure},
                       {"route", v->route.zones},
                       {"start_at", v->spec.start_at}});
        });
        eng_.spawn_process(
            vs.pid, [this, v](SimTime) { return step_vehicle(*v); }, vs.start_at, sc_.step_period);
    }

    void route_message(Vehicle& v, const Message& m) {
        if (!m.payload.is_object()) return;
        auto type = m.payload.value("type", "");
        if (type == "JOIN" || type == "ECHO" || type == "LEAVE")
            v.reg.on_message(m);
        else if (type == "REQUEST" || type == "OK" || type == "RELEASE-NOTIFY")
            v.mux.on_message(m);
    }

    IcpView build_view(Vehicle& v) {
        IcpView view;
        view.now = eng_.now();
        view.pose = world_.pose(v.spec.pid);
        if (!v.gvh.is_null("reg.rlist"))
            view.rlist = v.gvh.read_or<std::vector<Pid>>("reg.rlist", {});
        view.crit = v.gvh.read_or<bool>("mux.crit", false);
        view.mux_failed = v.gvh.read_or<bool>("mux.failed", false);
        if (v.gvh.read_or<bool>("moat.failed", false))
            view.motion = MotionFlag::Fail;
        else if (v.gvh.read_or<bool>("moat.inmotion", false))
            view.motion = MotionFlag::InMotion;
        else
            view.motion = MotionFlag::Done;
        return view;
    }

    StepStatus step_vehicle(Vehicle& v) {
        auto fx = v.core.step(build_view(v));
        // The location record goes out before the effects so every observer
        // sees the new plan before its consequences.
        if (to_string(v.core.loc()) != v.last_loc || v.core.myseq() != v.last_myseq) {
            v.last_loc = to_string(v.core.loc());
            v.last_myseq = v.core.myseq();
            nlohmann::json d{{"loc", v.last_loc}, {"myseq", v.last_myseq}};
            if (v.core.loc() == IcpLoc::Stuck) d["stuck_reason"] = v.core.stuck_reason();
            eng_.emit(v.spec.pid, TraceKind::AppLoc, d);
        }
        for (const auto& f : fx) apply(v, f);
        // A finished vehicle has driven off: its body leaves the world so the
        // departure spot is free for whoever exits through the same zone. A
        // stuck vehicle stays parked as an obstacle.
        if (v.core.loc() == IcpLoc::Done && world_.has_robot(v.spec.pid)) {
            eng_.emit(v.spec.pid, TraceKind::Done, {});
            world_.remove_robot(v.spec.pid);
        }
        return v.core.terminal() ? StepStatus::Terminal : StepStatus::Running;
    }

    void apply(Vehicle& v, const IcpEffect& f) {
        if (std::holds_alternative<FxRegister>(f)) {
            v.reg.do_register();
        } else if (const auto* m = std::get_if<FxMutex>(&f)) {
            v.mux.do_mutex(m->zones, m->plist);
        } else if (const auto* mv = std::get_if<FxMove>(&f)) {
            world_.do_move(v.spec.pid, mv->target);
        } else if (const auto* r = std::get_if<FxRelease>(&f)) {
            v.mux.release(r->zones);
        } else if (std::holds_alternative<FxUnregister>(f)) {
            v.reg.unregister();
        } else if (std::holds_alternative<FxStopMotion>(f)) {
            world_.stop_motion(v.spec.pid);
        }
    }

    Scenario sc_;
    bool rig_always_ok_ = false;
    Engine eng_;
    World world_;
    Net net_;
    TimingParams timing_;
    Monitor monitor_;
    bool started_ = false;
    std::vector<std::unique_ptr<Vehicle>> vehicles_;
    std::map<Pid, Vehicle*> by_pid_;
};

}  // namespace crossway
