#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <optional>
#include <vector>

#include <crossway/mutex.hpp>

using namespace crossway;

namespace {

NetConfig constant_net(double delay, double loss = 0.0) {
    NetConfig cfg;
    cfg.mean_delay = delay;
    cfg.delay_kind = DelayKind::Constant;
    cfg.loss_rate = loss;
    return cfg;
}

TimingParams short_timing() {
    TimingParams t;
    t.d = 50;
    t.d1 = 600;
    t.d2 = 500;
    t.d3 = 40;
    return t;
}

int count_sends(const Trace& t, const std::string& kind, Pid dst) {
    int n = 0;
    for (const auto& rec : t.records())
        if (rec.kind == TraceKind::MsgSend && rec.data.at("kind") == kind &&
            rec.data.at("dst").get<Pid>() == dst)
            ++n;
    return n;
}

}  // namespace

TEST_CASE("lamport stamp ordering is clock-major then pid") {
    CHECK(LamportStamp{1, 5} < LamportStamp{2, 0});
    CHECK(LamportStamp{2, 3} < LamportStamp{2, 7});
    CHECK_FALSE(LamportStamp{2, 7} < LamportStamp{2, 3});
    CHECK(LamportStamp{3, 1} == LamportStamp{3, 1});
    nlohmann::json j = LamportStamp{4, 2};
    CHECK(j.get<LamportStamp>() == LamportStamp{4, 2});
}

TEST_CASE("zone set helpers") {
    CHECK(intersects({"A", "C"}, {"C", "D"}));
    CHECK_FALSE(intersects({"A"}, {"B"}));
    CHECK_FALSE(intersects({}, {"B"}));
    CHECK(to_sorted_vec({"D", "A", "C"}) == std::vector<std::string>{"A", "C", "D"});
}

TEST_CASE("defer decision rule") {
    using Mine = std::optional<std::pair<ZoneSet, LamportStamp>>;
    LamportStamp older{1, 0}, newer{2, 5};

    // Held zones always win.
    CHECK(Mutex::defers({"A"}, std::nullopt, {"A", "B"}, newer));
    CHECK(Mutex::defers({"A"}, Mine{{{"C"}, newer}}, {"A"}, older));

    // Nothing held, nothing pending: grant.
    CHECK_FALSE(Mutex::defers({}, std::nullopt, {"A"}, older));

    // Pending request defers only younger conflicting requests.
    CHECK(Mutex::defers({}, Mine{{{"A", "C"}, older}}, {"C", "D"}, newer));
    CHECK_FALSE(Mutex::defers({}, Mine{{{"A", "C"}, newer}}, {"C", "D"}, older));
    CHECK_FALSE(Mutex::defers({}, Mine{{{"A"}, older}}, {"B"}, newer));  // disjoint
    CHECK_FALSE(Mutex::defers({}, Mine{{{"A"}, older}}, {"A"}, older));  // same stamp
}

TEST_CASE("two overlapping requests resolve by stamp order") {
    Engine eng;
    Net net(eng, constant_net(10));
    Gvh g0(0), g1(1);
    Mutex m0(eng, net, g0, 0, TimingParams{});
    Mutex m1(eng, net, g1, 1, TimingParams{});
    net.set_handler(0, [&](const Message& m) { m0.on_message(m); });
    net.set_handler(1, [&](const Message& m) { m1.on_message(m); });
    std::vector<Pid> plist{0, 1};

    // Both ask at t=0; stamps (1,0) and (1,1), so pid 0 wins the conflict on C.
    m0.do_mutex({"A", "C"}, plist);
    m1.do_mutex({"C", "D"}, plist);

    eng.schedule(30, EventKind::TimerFire, kWorldPid, [&] {
        CHECK(m0.crit());
        CHECK(m0.crit_set() == ZoneSet{"A", "C"});
        CHECK(m0.last_grant_latency() == 20);  // request at 0, both OKs by 20
        CHECK_FALSE(m1.crit());
        CHECK(m1.has_pending());
    });
    eng.schedule(100, EventKind::TimerFire, kWorldPid, [&] { m0.release({"A"}); });
    eng.schedule(150, EventKind::TimerFire, kWorldPid, [&] {
        // A alone does not unblock a request for {C, D}.
        CHECK_FALSE(m1.crit());
        CHECK(m0.crit());  // still holds C
    });
    eng.schedule(200, EventKind::TimerFire, kWorldPid, [&] { m0.release({"C"}); });
    eng.schedule(250, EventKind::TimerFire, kWorldPid, [&] {
        CHECK_FALSE(m0.crit());
        CHECK(m0.crit_set().empty());
        CHECK(m1.crit());
        CHECK(m1.crit_set() == ZoneSet{"C", "D"});
        CHECK(m1.last_grant_latency() == 210);  // deferred OK arrived at t=210
    });
    eng.run(StopCondition::quiescence());

    // Exactly one REQUEST and one OK each way; retransmit timers were
    // disarmed by the grants before they could fire.
    CHECK(count_sends(eng.trace(), "REQUEST", 1) == 1);
    CHECK(count_sends(eng.trace(), "REQUEST", 0) == 1);
    CHECK(count_sends(eng.trace(), "OK", 0) == 1);
    CHECK(count_sends(eng.trace(), "OK", 1) == 1);
}

TEST_CASE("disjoint zone sets are held concurrently") {
    Engine eng;
    Net net(eng, constant_net(10));
    Gvh g0(0), g1(1);
    Mutex m0(eng, net, g0, 0, TimingParams{});
    Mutex m1(eng, net, g1, 1, TimingParams{});
    net.set_handler(0, [&](const Message& m) { m0.on_message(m); });
    net.set_handler(1, [&](const Message& m) { m1.on_message(m); });

    m0.do_mutex({"A"}, {0, 1});
    m1.do_mutex({"B"}, {0, 1});
    eng.schedule(30, EventKind::TimerFire, kWorldPid, [&] {
        CHECK(m0.crit());
        CHECK(m1.crit());
    });
    eng.run(StopCondition::quiescence());
    CHECK(m0.crit_set() == ZoneSet{"A"});
    CHECK(m1.crit_set() == ZoneSet{"B"});
}

TEST_CASE("a group of one grants synchronously") {
    Engine eng;
    Net net(eng, constant_net(10));
    Gvh g(0);
    Mutex m(eng, net, g, 0, TimingParams{});
    m.do_mutex({"D", "C", "A"}, {0});
    CHECK(m.crit());
    CHECK(m.crit_set() == ZoneSet{"A", "C", "D"});
    CHECK(m.last_grant_latency() == 0);
    CHECK(g.read_or<bool>("mux.crit", false) == true);
    CHECK(g.read_or<std::vector<std::string>>("mux.crit_set", {}) ==
          std::vector<std::string>{"A", "C", "D"});
    CHECK(g.is_null("mux.requested"));
    CHECK(count_sends(eng.trace(), "REQUEST", 0) == 0);
}

TEST_CASE("request validation") {
    Engine eng;
    Net net(eng, constant_net(10));
    Gvh g(0);
    Mutex m(eng, net, g, 0, TimingParams{});
    CHECK_THROWS_AS(m.do_mutex({}, {0}), ValidationError);
    CHECK_THROWS_AS(m.do_mutex({"A"}, {1, 2}), NotInPlist);
    m.do_mutex({"A"}, {0, 1});
    CHECK_THROWS_AS(m.do_mutex({"B"}, {0, 1}), RequestPending);
}

TEST_CASE("release validation and partial release") {
    Engine eng;
    Net net(eng, constant_net(10));
    Gvh g(0);
    Mutex m(eng, net, g, 0, TimingParams{});
    CHECK_THROWS_AS(m.release({"A"}), NotHeld);

    m.do_mutex({"A", "C", "D"}, {0});
    m.release({"A"});
    CHECK(m.crit());  // still in the critical section while anything is held
    CHECK(m.crit_set() == ZoneSet{"C", "D"});
    CHECK(g.read_or<bool>("mux.crit", false) == true);
    CHECK_THROWS_AS(m.release({"A"}), NotHeld);  // already gone
    m.release({"C", "D"});
    CHECK_FALSE(m.crit());
    CHECK(m.crit_set().empty());
    CHECK(g.read_or<bool>("mux.crit", true) == false);
}

TEST_CASE("an unresponsive group member fails the request at the timeout") {
    Engine eng;
    Net net(eng, constant_net(10));
    Gvh g(0);
    TimingParams timing = short_timing();  // d2 = 500
    Mutex m(eng, net, g, 0, timing);
    net.set_handler(0, [&](const Message& msg) { m.on_message(msg); });

    // Pid 99 is not an endpoint: requests to it vanish into the void.
    m.do_mutex({"A"}, {0, 99});
    eng.run(StopCondition::quiescence());

    CHECK(m.failed());
    CHECK_FALSE(m.crit());
    CHECK_FALSE(m.has_pending());
    CHECK(g.read_or<bool>("mux.failed", false) == true);
    CHECK(g.is_null("mux.requested"));
    // The request was retransmitted every d until the timeout.
    CHECK(count_sends(eng.trace(), "REQUEST", 99) >= 5);
}

TEST_CASE("retransmission survives heavy message loss") {
    Engine eng(77);
    Net net(eng, constant_net(20, 0.3));
    Gvh g0(0);
    Gvh g1(1);
    TimingParams timing;
    timing.d = 80;
    Mutex m0(eng, net, g0, 0, timing);
    Mutex m1(eng, net, g1, 1, timing);
    net.set_handler(0, [&](const Message& m) { m0.on_message(m); });
    net.set_handler(1, [&](const Message& m) { m1.on_message(m); });

    SimTime granted0 = -1, granted1 = -1;
    m0.do_mutex({"A", "C"}, {0, 1});
    m1.do_mutex({"C", "D"}, {0, 1});

    // Poll: as soon as pid 0 holds its zones, give them back so pid 1 can win.
    std::function<void()> watch = [&] {
        if (granted0 < 0 && m0.crit()) {
            granted0 = eng.now();
            eng.schedule_in(100, EventKind::TimerFire, kWorldPid,
                            [&] { m0.release({"A", "C"}); });
        }
        if (granted1 < 0 && m1.crit()) granted1 = eng.now();
        if (granted1 < 0) eng.schedule_in(10, EventKind::TimerFire, kWorldPid, watch);
    };
    eng.schedule(0, EventKind::TimerFire, kWorldPid, watch);
    eng.run(StopCondition::quiescence());

    REQUIRE(granted0 >= 0);
    REQUIRE(granted1 > granted0);
    CHECK(granted1 < 60000);  // long before the failure timeout
    CHECK(m1.crit_set() == ZoneSet{"C", "D"});
    CHECK(m0.crit_set().empty());
}

TEST_CASE("duplicate requests are answered idempotently") {
    Engine eng;
    Net net(eng, constant_net(10));
    Gvh g(1);
    Mutex m(eng, net, g, 1, TimingParams{});

    auto request_from = [&](Pid src, std::uint64_t clock, ZoneSet zones) {
        Message msg;
        msg.src = src;
        msg.payload = {{"type", "REQUEST"},
                       {"xid", "x0"},
                       {"zones", to_sorted_vec(zones)},
                       {"stamp", LamportStamp{clock, src}}};
        msg.mode = UnicastMode{1};
        m.on_message(msg);
    };

    // Fresh request while idle: immediate OK. The duplicate (its OK was
    // presumed lost) is answered again.
    request_from(7, 5, {"A"});
    CHECK(count_sends(eng.trace(), "OK", 7) == 1);
    request_from(7, 5, {"A"});
    CHECK(count_sends(eng.trace(), "OK", 7) == 2);

    // Holding A: a conflicting request is deferred, and its duplicate stays
    // deferred without a reply.
    m.do_mutex({"A"}, {1});
    REQUIRE(m.crit());
    request_from(8, 6, {"A"});
    request_from(8, 6, {"A"});
    CHECK(count_sends(eng.trace(), "OK", 8) == 0);

    // Release finally answers the deferred request.
    m.release({"A"});
    CHECK(count_sends(eng.trace(), "OK", 8) == 1);
}

TEST_CASE("receiving a request advances the logical clock") {
    Engine eng;
    Net net(eng, constant_net(10));
    Gvh g(1);
    Mutex m(eng, net, g, 1, TimingParams{});

    Message msg;
    msg.src = 7;
    msg.payload = {{"type", "REQUEST"},
                   {"xid", "x0"},
                   {"zones", std::vector<std::string>{"B"}},
                   {"stamp", LamportStamp{41, 7}}};
    msg.mode = UnicastMode{1};
    m.on_message(msg);

    // Next own request must be stamped past the observed clock.
    m.do_mutex({"D"}, {1, 9});
    bool saw = false;
    for (const auto& rec : eng.trace().records()) {
        if (rec.kind == TraceKind::MsgSend && rec.data.at("kind") == "REQUEST") {
            saw = true;
            CHECK(rec.data.at("payload").at("stamp").get<LamportStamp>() ==
                  LamportStamp{43, 1});
        }
    }
    CHECK(saw);
}

TEST_CASE("release notifications are informational only") {
    Engine eng;
    Net net(eng, constant_net(10));
    Gvh g(1);
    Mutex m(eng, net, g, 1, TimingParams{});

    Message msg;
    msg.src = 7;
    msg.payload = {{"type", "RELEASE-NOTIFY"},
                   {"xid", "x0"},
                   {"zones", std::vector<std::string>{"A"}}};
    msg.mode = UnicastMode{1};
    m.on_message(msg);  // no state change, no reply

    CHECK_FALSE(m.crit());
    CHECK(count_sends(eng.trace(), "OK", 7) == 0);

    // The logical clock did not advance: the next request is stamped 1.
    m.do_mutex({"A"}, {1, 9});
    for (const auto& rec : eng.trace().records())
        if (rec.kind == TraceKind::MsgSend && rec.data.at("kind") == "REQUEST")
            CHECK(rec.data.at("payload").at("stamp").get<LamportStamp>() == LamportStamp{1, 1});
}

TEST_CASE("always_ok rig answers conflicting requests immediately") {
    Engine eng;
    Net net(eng, constant_net(10));
    Gvh g(1);
    MutexOptions rig;
    rig.always_ok = true;
    Mutex m(eng, net, g, 1, TimingParams{}, rig);
    m.do_mutex({"A"}, {1});
    REQUIRE(m.crit());

    Message msg;
    msg.src = 8;
    msg.payload = {{"type", "REQUEST"},
                   {"xid", "x0"},
                   {"zones", std::vector<std::string>{"A"}},
                   {"stamp", LamportStamp{6, 8}}};
    msg.mode = UnicastMode{1};
    m.on_message(msg);
    CHECK(count_sends(eng.trace(), "OK", 8) == 1);  // the unsafe reply
}
