#pragma once

#include <algorithm>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossway/core.hpp"
#include "crossway/geometry.hpp"
#include "crossway/gvh.hpp"
#include "crossway/physics.hpp"
#include "crossway/scenario.hpp"
#include "crossway/trace.hpp"

namespace crossway {

// Reconstructs the world at virtual time t from a stored trace and draws it
// as a standalone SVG: zone footprints (held ones tinted by holder), robot
// discs with headings, and dotted route centerlines.
inline std::string render_snapshot(const Trace& trace, SimTime t) {
    if (trace.records().empty()) throw MalformedTrace("empty trace");
    SimTime end = trace.records().back().time;
    std::optional<Scenario> sc;
    for (const auto& rec : trace.records()) {
        if (rec.kind == TraceKind::RunStart && rec.data.contains("scenario"))
            sc = rec.data.at("scenario").get<Scenario>();
        if (rec.kind == TraceKind::RunStop) end = rec.data.value("clock", rec.time);
    }
    if (t < 0 || t > end)
        throw TimeOutOfRange("t=" + std::to_string(t) + " outside [0," + std::to_string(end) + "]");

    std::map<Pid, Vec2> pose;
    std::map<Pid, ZoneSet> held;
    std::map<Pid, std::vector<std::string>> route;
    std::map<Pid, std::string> loc;
    std::set<Pid> crashed;
    for (const auto& rec : trace.records()) {
        if (rec.time > t) break;
        switch (rec.kind) {
            case TraceKind::Spawn:
                pose[rec.pid] = rec.data.at("pos").get<Vec2>();
                if (rec.data.contains("route"))
                    route[rec.pid] = rec.data.at("route").get<std::vector<std::string>>();
                break;
            case TraceKind::MotionTick: pose[rec.pid] = rec.data.at("pos").get<Vec2>(); break;
            case TraceKind::Crash: crashed.insert(rec.pid); break;
            case TraceKind::Done: pose.erase(rec.pid); break;  // departed
            case TraceKind::AppLoc: loc[rec.pid] = rec.data.value("loc", ""); break;
            case TraceKind::GvhPublish: {
                if (rec.data.value("key", "") != "mux.crit_set") break;
                SlotValue v = slot_value_from_json(rec.data.at("value"));
                auto zl = std::get_if<std::vector<std::string>>(&v);
                held[rec.pid] = zl ? ZoneSet(zl->begin(), zl->end()) : ZoneSet{};
                break;
            }
            default: break;
        }
    }

    const double radius = sc ? sc->kinematics.robot_radius : 0.15;
    std::vector<Zone> zones = sc ? sc->zones : std::vector<Zone>{};

    double x0 = -1, y0 = -1, x1 = 1, y1 = 1;
    bool first = true;
    auto grow = [&](double px, double py) {
        if (first) {
            x0 = x1 = px;
            y0 = y1 = py;
            first = false;
        }
        x0 = std::min(x0, px), x1 = std::max(x1, px);
        y0 = std::min(y0, py), y1 = std::max(y1, py);
    };
    for (const auto& z : zones) grow(z.footprint.x0, z.footprint.y0), grow(z.footprint.x1, z.footprint.y1);
    for (const auto& [pid, p] : pose) grow(p.x - radius, p.y - radius), grow(p.x + radius, p.y + radius);
    const double pad = 0.4, scale = 110.0;
    x0 -= pad, y0 -= pad, x1 += pad, y1 += pad;
    const double W = (x1 - x0) * scale, H = (y1 - y0) * scale;
    auto X = [&](double wx) { return (wx - x0) * scale; };
    auto Y = [&](double wy) { return H - (wy - y0) * scale; };  // world y up, svg y down

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};
    std::map<Pid, const char*> color;
    for (const auto& [pid, p] : pose) color[pid] = palette[color.size() % 8];

    std::map<std::string, Pid> holder;
    for (const auto& [pid, zs] : held)
        for (const auto& z : zs) holder[z] = pid;

    std::ostringstream s;
    s << std::fixed << std::setprecision(1);
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H + 26
      << "\" viewBox=\"0 0 " << W << " " << H + 26 << "\">\n";
    s << "<rect width=\"" << W << "\" height=\"" << H + 26 << "\" fill=\"#fafafa\"/>\n";

    for (const auto& z : zones) {
        const char* fill = z.kind == ZoneKind::Critical ? "#f3e6e6"
                           : z.kind == ZoneKind::Arrival ? "#e6ecf3"
                                                         : "#e6f3e9";
        std::string stroke = "#999";
        std::string extra;
        auto h = holder.find(z.name);
        if (h != holder.end()) {
            stroke = color.count(h->second) ? color[h->second] : "#333";
            extra = " stroke-width=\"3\"";
        }
        s << "<rect x=\"" << X(z.footprint.x0) << "\" y=\"" << Y(z.footprint.y1) << "\" width=\""
          << z.footprint.width() * scale << "\" height=\"" << z.footprint.height() * scale
          << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"" << extra << "/>\n";
        Vec2 c = z.footprint.center();
        s << "<text x=\"" << X(c.x) << "\" y=\"" << Y(c.y) + 4
          << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#666\" text-anchor=\"middle\">"
          << z.name;
        if (h != holder.end()) s << " (held by " << h->second << ")";
        s << "</text>\n";
    }

    if (sc) {
        ZoneMap zm(sc->zones);
        for (const auto& [pid, zs] : route) {
            if (!pose.count(pid)) continue;
            s << "<polyline fill=\"none\" stroke=\"" << color[pid]
              << "\" stroke-dasharray=\"4 5\" stroke-opacity=\"0.55\" points=\"";
            for (const auto& z : zs)
                if (zm.find(z)) s << X(zm.center(z).x) << "," << Y(zm.center(z).y) << " ";
            s << "\"/>\n";
        }
    }

    for (const auto& [pid, p] : pose) {
        bool dead = crashed.count(pid) != 0;
        s << "<circle cx=\"" << X(p.x) << "\" cy=\"" << Y(p.y) << "\" r=\"" << radius * scale
          << "\" fill=\"" << color[pid] << "\" fill-opacity=\"" << (dead ? "0.25" : "0.85")
          << "\" stroke=\"" << (dead ? "#900" : "#222") << "\"/>\n";
        s << "<text x=\"" << X(p.x) << "\" y=\"" << Y(p.y) + 4
          << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#fff\" text-anchor=\"middle\">"
          << pid << "</text>\n";
        auto l = loc.find(pid);
        if (l != loc.end() || dead) {
            s << "<text x=\"" << X(p.x) << "\" y=\"" << Y(p.y) - radius * scale - 4
              << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#444\" text-anchor=\"middle\">"
              << (dead ? "crashed" : l->second) << "</text>\n";
        }
    }

    s << "<text x=\"6\" y=\"" << H + 17
      << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">"
      << (sc ? sc->name : std::string("trace")) << "  t=" << t << "ms</text>\n";
    s << "</svg>\n";
    return s.str();
}

}  // namespace crossway
