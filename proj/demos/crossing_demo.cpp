// Run the bundled four-way crossing, print the per-vehicle outcome, and drop
// an SVG snapshot of the intersection mid-run.
#include <fstream>
#include <iostream>

#include <crossway/monitor.hpp>
#include <crossway/render.hpp>
#include <crossway/scenario.hpp>
#include <crossway/sim.hpp>

using namespace crossway;

int main() {
    Scenario sc = *bundled_scenario("fourway");
    sc.master_seed = 42;

    Sim sim(sc);
    const Trace& trace = sim.run();

    nlohmann::json report = progress_report(trace);
    std::cout << "all done: " << report.at("all_done") << "\n";
    for (const auto& [pid, v] : report.at("vehicles").items())
        std::cout << "  vehicle " << pid << ": " << v.at("loc").get<std::string>()
                  << (v.contains("duration")
                          ? " after " + std::to_string(v.at("duration").get<SimTime>()) + " ms"
                          : "")
                  << "\n";
    std::cout << "violations: " << report.at("violations").dump() << "\n";

    std::ofstream svg("fourway_t5000.svg");
    svg << render_snapshot(trace, 5000);
    std::cout << "wrote fourway_t5000.svg\n";
    return report.at("all_done") == true ? 0 : 1;
}
