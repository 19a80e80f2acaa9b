#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "crossway/core.hpp"

namespace crossway {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;

    double norm() const { return std::hypot(x, y); }
    Vec2 unit() const {
        double n = norm();
        return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
    }
    // 90 degrees counterclockwise.
    Vec2 perp() const { return {-y, x}; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

// Shortest distance from point p to segment [a, b].
inline double segment_distance(Vec2 a, Vec2 b, Vec2 p) {
    Vec2 ab = b - a;
    double len2 = dot(ab, ab);
    if (len2 <= 0.0) return distance(a, p);
    double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return distance(a + ab * t, p);
}

// Axis-aligned rectangle, closed on all sides.
struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    bool contains(Vec2 p) const {
        return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    }
    Vec2 center() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }

    // Open-interior overlap; shared edges do not count.
    bool overlaps(const Rect& o) const {
        return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
    }
    friend bool operator==(const Rect&, const Rect&) = default;
};

// Geocast / avoid region: a disc or the whole plane.
struct Region {
    enum class Shape { Disc, Everywhere };

    Shape shape = Shape::Everywhere;
    Vec2 center{};
    double radius = 0.0;

    static Region disc(Vec2 c, double r) { return Region{Shape::Disc, c, r}; }
    static Region everywhere() { return Region{}; }

    bool contains(Vec2 p) const {
        return shape == Shape::Everywhere || distance(center, p) <= radius;
    }
    friend bool operator==(const Region&, const Region&) = default;
};

inline void to_json(nlohmann::json& j, const Vec2& v) {
    j = nlohmann::json{{"x", v.x}, {"y", v.y}};
}
inline void from_json(const nlohmann::json& j, Vec2& v) {
    j.at("x").get_to(v.x);
    j.at("y").get_to(v.y);
}

inline void to_json(nlohmann::json& j, const Rect& r) {
    j = nlohmann::json{{"x0", r.x0}, {"y0", r.y0}, {"x1", r.x1}, {"y1", r.y1}};
}
inline void from_json(const nlohmann::json& j, Rect& r) {
    j.at("x0").get_to(r.x0);
    j.at("y0").get_to(r.y0);
    j.at("x1").get_to(r.x1);
    j.at("y1").get_to(r.y1);
}

inline void to_json(nlohmann::json& j, const Region& r) {
    if (r.shape == Region::Shape::Everywhere) {
        j = nlohmann::json{{"shape", "everywhere"}};
    } else {
        j = nlohmann::json{{"shape", "disc"}, {"center", r.center}, {"radius", r.radius}};
    }
}
inline void from_json(const nlohmann::json& j, Region& r) {
    auto shape = j.at("shape").get<std::string>();
    if (shape == "everywhere") {
        r = Region::everywhere();
    } else if (shape == "disc") {
        r = Region::disc(j.at("center").get<Vec2>(), j.at("radius").get<double>());
        if (!(r.radius > 0.0)) throw ValidationError("region: disc radius must be > 0");
    } else {
        throw ParseError("region: unknown shape '" + shape + "'");
    }
}

}  // namespace crossway
