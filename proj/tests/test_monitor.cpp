#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include <crossway/monitor.hpp>
#include <crossway/scenario.hpp>
#include <crossway/sim.hpp>

using namespace crossway;

namespace {

TraceRecord rec(SimTime t, Pid pid, TraceKind kind, nlohmann::json data) {
    TraceRecord r;
    r.time = t;
    r.pid = pid;
    r.kind = kind;
    r.data = std::move(data);
    return r;
}

TraceRecord run_start_with(const Scenario& sc) {
    return rec(0, kWorldPid, TraceKind::RunStart, {{"schema", 1}, {"scenario", sc}});
}

TraceRecord publish(SimTime t, Pid pid, const std::string& key, SlotValue value,
                    const std::string& writer = "mux", std::uint64_t version = 1) {
    return rec(t, pid, TraceKind::GvhPublish,
               {{"key", key},
                {"value", slot_value_to_json(std::move(value))},
                {"version", version},
                {"writer", writer}});
}

TraceRecord tick(SimTime t, Pid pid, Vec2 pos) {
    return rec(t, pid, TraceKind::MotionTick,
               {{"pos", pos}, {"target", nullptr}, {"flag", "in_motion"}});
}

std::vector<std::string> props(const std::vector<TraceRecord>& vs) {
    std::vector<std::string> out;
    for (const auto& v : vs) out.push_back(Monitor::property_of(v));
    return out;
}

}  // namespace

TEST_CASE("traffic_safety: two robots in one conflict zone") {
    Monitor m;
    m.check_event(run_start_with(*bundled_scenario("fourway")));
    m.check_event(rec(10, 0, TraceKind::Spawn, {{"pos", Vec2{-0.5, -2.0}}}));
    m.check_event(rec(10, 1, TraceKind::Spawn, {{"pos", Vec2{2.0, 0.5}}}));

    // Both drive into critical zone A.
    CHECK(m.check_event(tick(100, 0, {-0.5, -0.5})).empty());
    auto vs = m.check_event(tick(150, 1, {-0.3, -0.4}));
    REQUIRE(props(vs) == std::vector<std::string>{"traffic_safety"});
    CHECK(vs[0].data.at("witnesses").at("zone") == "A");
    CHECK(vs[0].data.at("witnesses").at("pids") == nlohmann::json::array({0, 1}));

    // Latched: the same pair in the same zone does not fire again.
    CHECK(m.check_event(tick(200, 1, {-0.2, -0.2})).empty());

    // A different zone is a different finding.
    m.check_event(tick(300, 0, {0.5, 0.5}));
    auto vs2 = m.check_event(tick(350, 1, {0.4, 0.4}));
    REQUIRE(props(vs2) == std::vector<std::string>{"traffic_safety"});
    CHECK(vs2[0].data.at("witnesses").at("zone") == "D");
}

TEST_CASE("traffic_safety ignores shared non-critical zones") {
    Monitor m;
    m.check_event(run_start_with(*bundled_scenario("fourway")));
    m.check_event(rec(10, 0, TraceKind::Spawn, {{"pos", Vec2{-0.5, -2.0}}}));
    m.check_event(rec(10, 1, TraceKind::Spawn, {{"pos", Vec2{-0.4, -2.1}}}));
    CHECK(m.check_event(tick(100, 0, {-0.5, -2.0})).empty());
    CHECK(m.check_event(tick(100, 1, {-0.4, -2.2})).empty());  // both in arrival A0
}

TEST_CASE("mutex_safety: one zone granted to two holders") {
    Monitor m;
    CHECK(m.check_event(publish(100, 0, "mux.crit_set", std::vector<std::string>{"A", "C"}))
              .empty());
    auto vs = m.check_event(publish(150, 1, "mux.crit_set", std::vector<std::string>{"A"}));
    REQUIRE(props(vs) == std::vector<std::string>{"mutex_safety"});
    CHECK(vs[0].data.at("witnesses").at("zone") == "A");
    CHECK(vs[0].data.at("witnesses").at("pids") == nlohmann::json::array({0, 1}));

    // Releasing clears the overlap; disjoint holds are fine.
    CHECK(m.check_event(publish(200, 0, "mux.crit_set", std::vector<std::string>{"C"}))
              .empty());
    CHECK(m.check_event(publish(250, 1, "mux.crit_set", std::vector<std::string>{"A", "B"}))
              .empty());
}

TEST_CASE("zone_guarantee: moving without holding the zones ahead") {
    Monitor m;
    m.check_event(run_start_with(*bundled_scenario("solo")));

    // In mutex_wait the guarantee does not apply.
    CHECK(m.check_event(rec(100, 0, TraceKind::AppLoc,
                            {{"loc", "mutex_wait"},
                             {"myseq", std::vector<std::string>{"A0", "A", "A1"}}}))
              .empty());

    // move_wait with no held zones: A is ahead and uncovered.
    auto vs = m.check_event(rec(200, 0, TraceKind::AppLoc,
                                {{"loc", "move_wait"},
                                 {"myseq", std::vector<std::string>{"A0", "A", "A1"}}}));
    REQUIRE(props(vs) == std::vector<std::string>{"zone_guarantee"});
    CHECK(vs[0].data.at("witnesses").at("missing") ==
          nlohmann::json::array({"A"}));
}

TEST_CASE("zone_guarantee holds while the set is covered and re-checks on release") {
    Monitor m;
    m.check_event(run_start_with(*bundled_scenario("solo")));
    m.check_event(publish(100, 0, "mux.crit_set", std::vector<std::string>{"A"}));
    CHECK(m.check_event(rec(200, 0, TraceKind::AppLoc,
                            {{"loc", "move_wait"},
                             {"myseq", std::vector<std::string>{"A0", "A", "A1"}}}))
              .empty());

    // Premature release while still in move_wait with A ahead.
    auto vs = m.check_event(publish(300, 0, "mux.crit_set", std::vector<std::string>{}));
    REQUIRE(props(vs) == std::vector<std::string>{"zone_guarantee"});
}

TEST_CASE("request_shape: the asked set must be the route interior") {
    Monitor m;
    m.check_event(run_start_with(*bundled_scenario("fourway")));

    // Vehicle 0 goes C0 -> C1: the interior is exactly {C}.
    auto vs = m.check_event(publish(100, 0, "mux.requested", std::vector<std::string>{"A"}));
    REQUIRE(props(vs) == std::vector<std::string>{"request_shape"});
    CHECK(vs[0].data.at("witnesses").at("asked") == nlohmann::json::array({"A"}));
    CHECK(vs[0].data.at("witnesses").at("expected") == nlohmann::json::array({"C"}));

    CHECK(m.check_event(publish(150, 0, "mux.requested", std::vector<std::string>{"C"}))
              .empty());
    // Null (withdrawn request) is not a shape claim.
    CHECK(m.check_event(publish(200, 0, "mux.requested", std::monostate{})).empty());
}

TEST_CASE("gvh_single_writer: slots have one writer for life") {
    Monitor m;
    CHECK(m.check_event(publish(10, 0, "reg.rlist", std::vector<Pid>{0}, "reg")).empty());
    CHECK(m.check_event(publish(20, 0, "reg.rlist", std::vector<Pid>{0, 1}, "reg")).empty());
    auto vs = m.check_event(publish(30, 0, "reg.rlist", std::vector<Pid>{1}, "icp"));
    REQUIRE(props(vs) == std::vector<std::string>{"gvh_single_writer"});
    CHECK(vs[0].data.at("witnesses").at("writers") ==
          nlohmann::json::array({"reg", "icp"}));

    // The same writer name on another process is a different slot.
    CHECK(m.check_event(publish(40, 1, "reg.rlist", std::vector<Pid>{1}, "reg")).empty());
}

TEST_CASE("avoid_safety: a robot strictly inside its keep-out disc") {
    Monitor m;
    m.check_event(rec(10, 0, TraceKind::Spawn, {{"pos", Vec2{2, 0}}}));

    nlohmann::json inside{{"pos", Vec2{0.2, 0.0}},
                          {"target", nullptr},
                          {"flag", "in_motion"},
                          {"avoid", Region::disc({0, 0}, 1.0)}};
    auto vs = m.check_event(rec(100, 0, TraceKind::MotionTick, inside));
    REQUIRE(props(vs) == std::vector<std::string>{"avoid_safety"});

    nlohmann::json boundary{{"pos", Vec2{1.0, 0.0}},
                            {"target", nullptr},
                            {"flag", "in_motion"},
                            {"avoid", Region::disc({0, 0}, 1.0)}};
    CHECK(m.check_event(rec(200, 0, TraceKind::MotionTick, boundary)).empty());
}

TEST_CASE("attached monitor emits violation records online and can halt") {
    Engine eng;
    MonitorOptions opts;
    opts.halt_on_violation = true;
    Monitor mon(opts);
    mon.attach(eng);

    auto emit_publish = [&](Pid pid, std::vector<std::string> zones) {
        eng.emit(pid, TraceKind::GvhPublish,
                 {{"key", "mux.crit_set"},
                  {"value", slot_value_to_json(zones)},
                  {"version", 1},
                  {"writer", "mux"}});
    };
    eng.schedule(10, EventKind::TimerFire, kWorldPid, [&] { emit_publish(0, {"A"}); });
    eng.schedule(20, EventKind::TimerFire, kWorldPid, [&] { emit_publish(1, {"A"}); });
    eng.schedule(30, EventKind::TimerFire, kWorldPid, [&] { emit_publish(1, {"B"}); });
    eng.run(StopCondition::quiescence());

    CHECK(eng.halted());
    CHECK(eng.halt_reason() == "violation: mutex_safety");
    int violations = 0;
    for (const auto& r : eng.trace().records())
        if (r.kind == TraceKind::Violation) {
            ++violations;
            CHECK(r.data.at("property") == "mutex_safety");
            CHECK(r.time == 20);
        }
    CHECK(violations == 1);

    // The stored trace replays to the identical findings.
    auto eq = replay_equivalence(eng.trace());
    CHECK(eq.at("equivalent") == true);
    CHECK(eq.at("derived") == 1);
    CHECK(eq.at("recorded") == 1);
}

TEST_CASE("replay equivalence flags traces whose violations do not rederive") {
    Trace t;
    t.append(rec(0, kWorldPid, TraceKind::RunStart, {{"schema", 1}}));
    t.append(rec(50, kWorldPid, TraceKind::Violation,
                 {{"property", "mutex_safety"}, {"witnesses", {{"zone", "A"}}}}));
    t.append(rec(60, kWorldPid, TraceKind::RunStop, {{"clock", 60}}));
    auto eq = replay_equivalence(t);
    CHECK(eq.at("equivalent") == false);
    CHECK(eq.at("recorded") == 1);
    CHECK(eq.at("derived") == 0);
    CHECK(eq.at("missing").size() == 1);

    // Physics-owned collision records are not the monitor's to rederive.
    Trace t2;
    t2.append(rec(0, kWorldPid, TraceKind::RunStart, {{"schema", 1}}));
    t2.append(rec(50, kWorldPid, TraceKind::Violation,
                  {{"property", "collision_fault"}, {"witnesses", nlohmann::json::array()}}));
    CHECK(replay_equivalence(t2).at("equivalent") == true);
}

TEST_CASE("clean run: no violations online or on replay") {
    Sim sim(*bundled_scenario("solo"));
    sim.run();
    for (const auto& r : sim.trace().records()) CHECK(r.kind != TraceKind::Violation);
    auto eq = replay_equivalence(sim.trace());
    CHECK(eq.at("equivalent") == true);
    CHECK(eq.at("derived") == 0);
}

TEST_CASE("rigged run still replays equivalently") {
    Sim sim(*bundled_scenario("contention"), /*rig_always_ok=*/true);
    sim.run();
    CHECK(replay_equivalence(sim.trace()).at("equivalent") == true);
}

TEST_CASE("geocast audit on synthetic traces") {
    auto send = [](SimTime t, Pid src, std::uint64_t id, Region region, SimTime t0,
                   SimTime deadline) {
        return rec(t, src, TraceKind::MsgSend,
                   {{"msg_id", id},
                    {"attempt", 0},
                    {"dst", 1},
                    {"kind", "JOIN"},
                    {"payload", nlohmann::json::object()},
                    {"mode", "geocast"},
                    {"region", region},
                    {"origin", Vec2{0, 0}},
                    {"t0", t0},
                    {"deadline_at", deadline}});
    };
    auto deliver = [](SimTime t, std::uint64_t id, Pid dst) {
        return rec(t, dst, TraceKind::MsgDeliver,
                   {{"msg_id", id}, {"attempt", 0}, {"kind", "JOIN"}, {"dst", dst}, {"dup", false}});
    };

    SECTION("delivery outside the region is an exclusion violation") {
        Trace t;
        t.append(rec(0, 1, TraceKind::Spawn, {{"pos", Vec2{10, 0}}}));
        t.append(send(10, 0, 5, Region::disc({0, 0}, 5.0), 10, 410));
        t.append(deliver(110, 5, 1));
        auto audit = check_geocast_trace(t);
        CHECK(audit.at("families") == 1);
        REQUIRE(audit.at("exclusion_violations").size() == 1);
        CHECK(audit.at("exclusion_violations")[0].at("dst") == 1);
    }
    SECTION("a covered receiver that never hears it is an inclusion violation") {
        Trace t;
        t.append(rec(0, 1, TraceKind::Spawn, {{"pos", Vec2{1, 0}}}));
        t.append(send(10, 0, 5, Region::disc({0, 0}, 5.0), 10, 410));
        auto audit = check_geocast_trace(t);
        REQUIRE(audit.at("inclusion_violations").size() == 1);
        CHECK(audit.at("inclusion_violations")[0].at("pid") == 1);
        CHECK(audit.at("exclusion_violations").empty());
    }
    SECTION("delivery latency is measured from first send to first delivery") {
        Trace t;
        t.append(rec(0, 1, TraceKind::Spawn, {{"pos", Vec2{1, 0}}}));
        t.append(send(10, 0, 5, Region::disc({0, 0}, 5.0), 10, 410));
        t.append(deliver(170, 5, 1));
        t.append(deliver(220, 5, 1));  // dup does not move the latency
        auto audit = check_geocast_trace(t);
        CHECK(audit.at("max_first_latency") == 160);
        CHECK(audit.at("inclusion_violations").empty());
        CHECK(audit.at("exclusion_violations").empty());
    }
    SECTION("receivers that crash or depart within the window are exempt") {
        Trace t;
        t.append(rec(0, 1, TraceKind::Spawn, {{"pos", Vec2{1, 0}}}));
        t.append(rec(0, 2, TraceKind::Spawn, {{"pos", Vec2{2, 0}}}));
        t.append(send(10, 0, 5, Region::disc({0, 0}, 5.0), 10, 410));
        t.append(rec(100, 1, TraceKind::Crash, {}));
        t.append(rec(120, 2, TraceKind::Done, {}));
        CHECK(check_geocast_trace(t).at("inclusion_violations").empty());
    }
}

TEST_CASE("geocast audit on a real run") {
    // solo would be vacuous: geocasts with no other endpoints send nothing.
    Sim sim(*bundled_scenario("fourway"));
    sim.run();
    auto audit = check_geocast_trace(sim.trace());
    CHECK(audit.at("families").get<int>() > 0);
    CHECK(audit.at("exclusion_violations").empty());
    CHECK(audit.at("inclusion_violations").empty());
}

TEST_CASE("registration audit groups rosters and checks announce soundness") {
    SECTION("real four-way run is sound with one agreed roster") {
        Sim sim(*bundled_scenario("fourway"));
        sim.run();
        auto audit = check_registration_trace(sim.trace());
        CHECK(audit.at("sound") == true);
        REQUIRE(audit.at("groups").size() == 1);
        CHECK(audit.at("groups")[0].at("roster") == nlohmann::json::array({0, 1, 2, 3}));
        CHECK(audit.at("groups")[0].at("members").size() == 4);
        CHECK(audit.at("groups")[0].at("ts_spread").get<SimTime>() <= 400);
    }
    SECTION("a listed member that never announced is unsound") {
        Trace t;
        t.append(publish(0, 0, "reg.registering", true, "reg"));
        t.append(publish(1600, 0, "reg.rlist", std::vector<Pid>{0, 1}, "reg"));
        auto audit = check_registration_trace(t);
        CHECK(audit.at("sound") == false);
        REQUIRE(audit.at("unsound").size() == 1);
        CHECK(audit.at("unsound")[0].at("lists") == 1);
        CHECK(audit.at("unsound")[0].at("reason") == "never_announced");
    }
    SECTION("an announce older than the soundness window is stale") {
        Trace t;
        t.append(run_start_with(*bundled_scenario("solo")));  // d1 = 4800
        t.append(publish(0, 1, "reg.registering", true, "reg"));
        t.append(publish(5000, 0, "reg.registering", true, "reg"));
        t.append(publish(6000, 0, "reg.rlist", std::vector<Pid>{0, 1}, "reg"));
        auto audit = check_registration_trace(t);
        CHECK(audit.at("sound") == false);
        REQUIRE(audit.at("unsound").size() == 1);
        CHECK(audit.at("unsound")[0].at("lists") == 1);
        CHECK(audit.at("unsound")[0].at("reason") == "stale_announce");
        CHECK(audit.at("unsound")[0].at("announced_at") == 0);
    }
    SECTION("crashed members are exempt from the recency bound") {
        Trace t;
        t.append(run_start_with(*bundled_scenario("solo")));
        t.append(publish(0, 1, "reg.registering", true, "reg"));
        t.append(publish(5000, 0, "reg.registering", true, "reg"));
        t.append(rec(3000, 1, TraceKind::Crash, {}));
        t.append(publish(6000, 0, "reg.rlist", std::vector<Pid>{0, 1}, "reg"));
        CHECK(check_registration_trace(t).at("sound") == true);
    }
}

TEST_CASE("progress report summarizes vehicle outcomes") {
    SECTION("clean solo run") {
        Sim sim(*bundled_scenario("solo"));
        sim.run();
        auto report = progress_report(sim.trace());
        CHECK(report.at("done") == 1);
        CHECK(report.at("stuck") == 0);
        CHECK(report.at("all_done") == true);
        CHECK(report.at("halted") == false);
        CHECK(report.at("violations").empty());
        CHECK(report.at("vehicles").at("0").at("duration").get<SimTime>() > 0);
        CHECK(report.at("end_time").get<SimTime>() > 0);
    }
    SECTION("crash scenario leaves survivors stuck") {
        Sim sim(*bundled_scenario("crash"));
        sim.run();
        auto report = progress_report(sim.trace());
        CHECK(report.at("done") == 1);
        CHECK(report.at("all_done") == false);
        CHECK(report.at("stuck") == 3);  // one crashed, two blocked on its zones
        CHECK(report.at("vehicles").at("1").at("loc") == "crashed");
    }
}
