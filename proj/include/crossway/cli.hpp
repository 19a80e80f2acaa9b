#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crossway/monitor.hpp"
#include "crossway/render.hpp"
#include "crossway/scenario.hpp"
#include "crossway/sim.hpp"

namespace crossway {

// Resolves a --scenario argument: a bundled name, a path to a JSON file, or
// a path whose stem matches a bundled name ("out/fourway.json" -> fourway).
inline nlohmann::json load_scenario_json(const std::string& arg) {
    if (auto sc = bundled_scenario(arg)) return nlohmann::json(*sc);
    std::ifstream in(arg);
    if (in) {
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw ParseError("scenario file is not valid JSON: " + arg);
        return j;
    }
    if (auto sc = bundled_scenario(std::filesystem::path(arg).stem().string()))
        return nlohmann::json(*sc);
    throw ParseError("no such scenario file or bundled name: " + arg);
}

inline Scenario load_scenario(const std::string& arg, const std::vector<std::string>& overrides,
                              std::optional<uint64_t> seed) {
    nlohmann::json doc = load_scenario_json(arg);
    for (const auto& ov : overrides) apply_override(doc, ov);
    if (seed) doc["master_seed"] = *seed;
    return parse_scenario(doc);
}

namespace cli_detail {

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SimError("cannot open for writing: " + path);
    out << content;
}

inline Trace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SimError("cannot open trace file: " + path);
    return Trace::read_jsonl(in);
}

inline int run_command(const std::string& scenario_arg, const std::vector<std::string>& overrides,
                       std::optional<uint64_t> seed, const std::string& trace_path, bool summary,
                       const std::vector<SimTime>& snapshot_at, const std::string& snapshot_dir,
                       bool halt_on_violation, SimTime max_time) {
    Scenario sc = load_scenario(scenario_arg, overrides, seed);
    if (halt_on_violation) sc.monitor.halt_on_violation = true;
    Sim sim(std::move(sc));
    const Trace& tr = sim.run(max_time);

    if (!trace_path.empty()) {
        std::ofstream out(trace_path, std::ios::binary);
        if (!out) throw SimError("cannot open for writing: " + trace_path);
        tr.write_jsonl(out);
    }
    for (SimTime t : snapshot_at) {
        std::filesystem::path dir(snapshot_dir.empty() ? "." : snapshot_dir);
        std::filesystem::create_directories(dir);
        auto file = dir / (sim.scenario().name + "_t" + std::to_string(t) + ".svg");
        write_file(file.string(), render_snapshot(tr, t));
    }

    nlohmann::json report = progress_report(tr);
    if (summary) std::cout << report.dump(2) << "\n";
    int done = report.value("done", 0);
    int total = static_cast<int>(sim.scenario().vehicles.size());
    int violations = 0;
    for (const auto& [prop, n] : report.at("violations").items())
        violations += n.get<int>();
    std::cout << "scenario " << sim.scenario().name << " seed " << sim.scenario().master_seed
              << ": " << done << "/" << total << " done, " << violations << " violation"
              << (violations == 1 ? "" : "s") << ", end t=" << report.value("end_time", SimTime{0})
              << "ms" << (report.value("halted", false) ? " (halted)" : "") << "\n";
    return (violations == 0 && report.value("all_done", false)) ? 0 : 1;
}

inline int check_command(const std::string& trace_path, bool show) {
    Trace tr = read_trace(trace_path);
    nlohmann::json out{{"replay", replay_equivalence(tr)},
                       {"geocast", check_geocast_trace(tr)},
                       {"registration", check_registration_trace(tr)},
                       {"progress", progress_report(tr)}};
    if (show) std::cout << out.dump(2) << "\n";
    bool clean = out["replay"].value("equivalent", false) &&
                 out["geocast"]["exclusion_violations"].empty() &&
                 out["registration"].value("sound", false) &&
                 out["progress"]["violations"].empty();
    std::cout << "check " << trace_path << ": " << (clean ? "clean" : "problems found") << "\n";
    return clean ? 0 : 1;
}

inline int render_command(const std::string& trace_path, SimTime at, const std::string& out_path) {
    Trace tr = read_trace(trace_path);
    std::string svg = render_snapshot(tr, at);
    if (out_path.empty())
        std::cout << svg;
    else
        write_file(out_path, svg);
    return 0;
}

inline int scenarios_command() {
    for (const auto& name : bundled_scenario_names()) {
        Scenario sc = *bundled_scenario(name);
        std::cout << name << ": " << sc.vehicles.size() << " vehicle"
                  << (sc.vehicles.size() == 1 ? "" : "s");
        if (sc.net.loss_rate > 0) std::cout << ", loss " << sc.net.loss_rate;
        if (!sc.net.crash_schedule.empty())
            std::cout << ", " << sc.net.crash_schedule.size() << " crash";
        std::cout << "\n";
    }
    return 0;
}

}  // namespace cli_detail

// Entry point shared by the binary and the tests. Returns the process exit
// code: 0 all vehicles done and no violations, 1 violations or an incomplete
// run, 2 usage or configuration errors.
inline int run_main(std::vector<std::string> args) {
    CLI::App app{"deterministic intersection-coordination simulator"};
    app.require_subcommand(1);

    std::string scenario_arg = "fourway";
    std::vector<std::string> overrides;
    std::optional<uint64_t> seed;
    std::string trace_path;
    bool summary = false;
    std::vector<SimTime> snapshot_at;
    std::string snapshot_dir;
    bool halt_on_violation = false;
    SimTime max_time = 300000;

    auto* run = app.add_subcommand("run", "run a scenario");
    run->add_option("--scenario", scenario_arg, "bundled name or JSON file");
    run->add_option("--seed", seed, "override the master seed");
    run->add_option("--trace", trace_path, "write the run trace as JSONL");
    run->add_flag("--summary", summary, "print the full progress report");
    run->add_option("--snapshot-at", snapshot_at, "render an SVG snapshot at time (ms); repeatable");
    run->add_option("--snapshot-dir", snapshot_dir, "directory for snapshots (default .)");
    run->add_option("--set", overrides, "override a scenario field, e.g. net.loss_rate=0.3");
    run->add_flag("--halt-on-violation", halt_on_violation, "stop at the first violation");
    run->add_option("--max-time", max_time, "virtual time bound in ms");

    std::string check_trace;
    bool check_show = false;
    auto* check = app.add_subcommand("check", "audit a stored trace");
    check->add_option("--trace", check_trace, "trace file to audit")->required();
    check->add_flag("--report", check_show, "print the full audit JSON");

    std::string render_trace, render_out;
    SimTime render_at = 0;
    auto* render = app.add_subcommand("render", "draw an SVG snapshot from a trace");
    render->add_option("--trace", render_trace, "trace file")->required();
    render->add_option("--at", render_at, "virtual time (ms)")->required();
    render->add_option("--out", render_out, "output file (default stdout)");

    auto* scenarios = app.add_subcommand("scenarios", "list bundled scenarios");

    std::vector<const char*> argv{"crossway"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed())
            return cli_detail::run_command(scenario_arg, overrides, seed, trace_path, summary,
                                           snapshot_at, snapshot_dir, halt_on_violation, max_time);
        if (check->parsed()) return cli_detail::check_command(check_trace, check_show);
        if (render->parsed())
            return cli_detail::render_command(render_trace, render_at, render_out);
        if (scenarios->parsed()) return cli_detail::scenarios_command();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace crossway
