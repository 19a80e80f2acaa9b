// Assemble a scenario in code instead of JSON: two vehicles on crossing
// routes over a lossy network, then audit the stored trace offline.
#include <iostream>
#include <sstream>

#include <crossway/monitor.hpp>
#include <crossway/scenario.hpp>
#include <crossway/sim.hpp>

using namespace crossway;

int main() {
    Scenario sc;
    sc.name = "head-to-head";
    sc.master_seed = 7;
    sc.zones = default_zone_map().zones();
    sc.routing = default_routing_table();
    sc.reg_region = Region::disc({0.0, 0.0}, 6.0);
    sc.net.mean_delay = 60;
    sc.net.loss_rate = 0.15;  // retransmission has to carry the protocol
    ZoneMap zm(sc.zones);
    sc.vehicles = {
        {0, zm.center("A0"), "A0", "D1", 0},   // long left turn: A, C, D
        {1, zm.center("D0"), "D0", "C1", 40},  // long left turn: D, B, C
    };
    sc.validate();

    Sim sim(sc);
    const Trace& trace = sim.run();

    // Round-trip the trace through its serialized form, as a file would.
    std::stringstream stored(trace.to_jsonl());
    Trace replayed = Trace::read_jsonl(stored);

    std::cout << "replay equivalent: " << replay_equivalence(replayed).at("equivalent") << "\n";
    std::cout << "registration sound: " << check_registration_trace(replayed).at("sound") << "\n";
    std::cout << "geocast exclusions: "
              << check_geocast_trace(replayed).at("exclusion_violations").size() << "\n";

    nlohmann::json report = progress_report(replayed);
    std::cout << "done " << report.at("done") << "/2 in " << report.at("end_time")
              << " ms of virtual time\n";
    return report.at("all_done") == true ? 0 : 1;
}
