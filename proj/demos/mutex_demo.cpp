// Use the coordination primitives without the traffic application: three
// processes contend for overlapping zone sets over a simulated network and
// report the grant order the mutual-exclusion layer produced. Grants are
// observed the same way applications do it: through the published status
// slots.
#include <iostream>
#include <map>
#include <memory>
#include <vector>

#include <crossway/mutex.hpp>
#include <crossway/netmodel.hpp>

using namespace crossway;

int main() {
    Engine eng(/*master_seed=*/3);
    NetConfig cfg;
    cfg.mean_delay = 30;
    cfg.delay_kind = DelayKind::Exponential;
    Net net(eng, cfg);
    TimingParams timing = TimingParams::from_mean_delay(cfg.mean_delay);

    const std::vector<Pid> plist{0, 1, 2};
    const std::map<Pid, ZoneSet> wants{
        {0, {"A", "C"}},
        {1, {"C", "D"}},
        {2, {"D"}},
    };

    std::map<Pid, std::unique_ptr<Gvh>> gvhs;
    std::map<Pid, std::unique_ptr<Mutex>> muxes;
    for (Pid p : plist) {
        gvhs[p] = std::make_unique<Gvh>(
            p, [&eng, &muxes, p](const std::string& key, const SlotValue& value, std::uint64_t,
                                 const std::string&) {
                if (key != "mux.crit" || !std::holds_alternative<bool>(value) ||
                    !std::get<bool>(value))
                    return;
                std::cout << "t=" << eng.now() << " ms: process " << p << " enters (waited "
                          << muxes[p]->last_grant_latency() << " ms)\n";
                // Work for 200 ms, then hand the zones back.
                eng.schedule_in(200, EventKind::TimerFire, p, [&eng, &muxes, p] {
                    std::cout << "t=" << eng.now() << " ms: process " << p << " releases\n";
                    ZoneSet held = muxes[p]->crit_set();
                    muxes[p]->release(held);
                });
            });
        muxes[p] = std::make_unique<Mutex>(eng, net, *gvhs[p], p, timing);
        net.set_handler(p, [&muxes, p](const Message& m) { muxes[p]->on_message(m); });
    }

    for (Pid p : plist) {
        SimTime at = 10 * (p + 1);
        eng.schedule(at, EventKind::TimerFire, p,
                     [&muxes, &wants, plist, p] { muxes[p]->do_mutex(wants.at(p), plist); });
    }

    eng.run(StopCondition::quiescence());
    for (Pid p : plist)
        if (!muxes[p]->crit_set().empty() || muxes[p]->failed()) return 1;
    std::cout << "all grants served, holdings empty\n";
    return 0;
}
