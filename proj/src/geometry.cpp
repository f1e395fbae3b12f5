#include "landreuse/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "landreuse/error.hpp"

namespace landreuse::geo {

std::string kind_name(const Geometry& g) {
    switch (g.index()) {
        case 0: return "point";
        case 1: return "line";
        case 2: return "polygon";
        default: return "multipolygon";
    }
}

double signed_area2(const Ring& ring) {
    double s = 0.0;
    for (std::size_t i = 0, n = ring.size(); i < n; ++i) {
        const auto& a = ring[i];
        const auto& b = ring[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    return s;
}

int orientation(const Point& a, const Point& b, const Point& c) {
    const double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    return (v > 0.0) - (v < 0.0);
}

bool on_segment(const Point& p, const Point& a, const Point& b) {
    return orientation(a, b, p) == 0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d) {
    const int o1 = orientation(a, b, c);
    const int o2 = orientation(a, b, d);
    const int o3 = orientation(c, d, a);
    const int o4 = orientation(c, d, b);
    if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
    if (o1 == 0 && on_segment(c, a, b)) return true;
    if (o2 == 0 && on_segment(d, a, b)) return true;
    if (o3 == 0 && on_segment(a, c, d)) return true;
    if (o4 == 0 && on_segment(b, c, d)) return true;
    return false;
}

namespace {

void check_finite(const Point& p) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error("geometry has a non-finite coordinate");
}

void close_open(Ring& ring) {
    if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
}

void validate_ring(const Ring& ring) {
    if (ring.size() < 3) throw Error("degenerate polygon ring: " + std::to_string(ring.size()) + " vertices");
    for (const auto& p : ring) check_finite(p);
    if (signed_area2(ring) == 0.0) throw Error("degenerate polygon ring: zero area");
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) continue;
            if (segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n])) {
                throw Error("self-intersecting polygon ring");
            }
        }
    }
}

void validate_polygon(const Polygon& p) {
    validate_ring(p.exterior);
    for (const auto& h : p.holes) validate_ring(h);
}

// Inside test for one ring: 1 inside, 0 outside, -1 on boundary.
int crossings(const Point& p, const Ring& ring, bool& boundary) {
    int count = 0;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto& a = ring[j];
        const auto& b = ring[i];
        if (on_segment(p, a, b)) {
            boundary = true;
            return 0;
        }
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < x) ++count;
        }
    }
    return count;
}

struct Parts {
    std::vector<Point> vertices;
    std::vector<std::pair<Point, Point>> segments;
    std::vector<const Polygon*> polygons;
};

void add_ring(Parts& parts, const Ring& ring) {
    for (std::size_t i = 0; i < ring.size(); ++i) {
        parts.vertices.push_back(ring[i]);
        parts.segments.emplace_back(ring[i], ring[(i + 1) % ring.size()]);
    }
}

void add_polygon(Parts& parts, const Polygon& p) {
    add_ring(parts, p.exterior);
    for (const auto& h : p.holes) add_ring(parts, h);
    parts.polygons.push_back(&p);
}

Parts decompose(const Geometry& g) {
    Parts parts;
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Point>) {
                parts.vertices.push_back(v);
            } else if constexpr (std::is_same_v<T, LineString>) {
                parts.vertices = v.points;
                for (std::size_t i = 0; i + 1 < v.points.size(); ++i) {
                    parts.segments.emplace_back(v.points[i], v.points[i + 1]);
                }
            } else if constexpr (std::is_same_v<T, Polygon>) {
                add_polygon(parts, v);
            } else {
                for (const auto& p : v.polygons) add_polygon(parts, p);
            }
        },
        g);
    return parts;
}

bool contains_vertex(const Parts& area, const Parts& other) {
    for (const auto* poly : area.polygons) {
        for (const auto& v : other.vertices) {
            if (point_in_polygon(v, *poly)) return true;
        }
    }
    for (const auto& v : other.vertices) {
        for (const auto& [a, b] : area.segments) {
            if (on_segment(v, a, b)) return true;
        }
        for (const auto& w : area.vertices) {
            if (v == w) return true;
        }
    }
    return false;
}

}  // namespace

Polygon make_polygon(Ring exterior, std::vector<Ring> holes) {
    Polygon p;
    close_open(exterior);
    if (exterior.size() >= 3 && signed_area2(exterior) < 0.0) std::reverse(exterior.begin(), exterior.end());
    for (auto& h : holes) {
        close_open(h);
        if (h.size() >= 3 && signed_area2(h) > 0.0) std::reverse(h.begin(), h.end());
    }
    p.exterior = std::move(exterior);
    p.holes = std::move(holes);
    validate_polygon(p);
    return p;
}

void validate(const Geometry& g) {
    std::visit(
        [](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Point>) {
                check_finite(v);
            } else if constexpr (std::is_same_v<T, LineString>) {
                if (v.points.size() < 2) throw Error("line needs at least 2 points");
                for (const auto& p : v.points) check_finite(p);
            } else if constexpr (std::is_same_v<T, Polygon>) {
                validate_polygon(v);
            } else {
                if (v.polygons.empty()) throw Error("empty multipolygon");
                for (const auto& p : v.polygons) validate_polygon(p);
            }
        },
        g);
}

BBox bbox(const Geometry& g) {
    const auto parts = decompose(g);
    BBox b{INFINITY, INFINITY, -INFINITY, -INFINITY};
    for (const auto& p : parts.vertices) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
    }
    return b;
}

bool point_in_polygon(const Point& p, const Polygon& poly) {
    if (poly.exterior.size() < 3) throw Error("degenerate polygon: fewer than 3 vertices");
    for (const auto& h : poly.holes) {
        if (h.size() < 3) throw Error("degenerate polygon hole: fewer than 3 vertices");
    }
    bool boundary = false;
    int count = crossings(p, poly.exterior, boundary);
    if (boundary) return true;
    for (const auto& h : poly.holes) {
        count += crossings(p, h, boundary);
        if (boundary) return true;
    }
    return count % 2 == 1;
}

bool overlaps(const Geometry& a, const Geometry& b) {
    validate(a);
    validate(b);
    if (!bbox(a).intersects(bbox(b))) return false;
    const auto pa = decompose(a);
    const auto pb = decompose(b);
    for (const auto& [p, q] : pa.segments) {
        for (const auto& [r, s] : pb.segments) {
            if (segments_intersect(p, q, r, s)) return true;
        }
    }
    return contains_vertex(pa, pb) || contains_vertex(pb, pa);
}

namespace {

Point point_from(const nlohmann::json& c) {
    if (!c.is_array() || c.size() < 2) throw Error("GeoJSON position must be [x, y]");
    return {c[0].get<double>(), c[1].get<double>()};
}

std::vector<Point> points_from(const nlohmann::json& arr) {
    std::vector<Point> out;
    for (const auto& c : arr) out.push_back(point_from(c));
    return out;
}

Polygon polygon_from(const nlohmann::json& rings) {
    if (!rings.is_array() || rings.empty()) throw Error("GeoJSON polygon needs at least one ring");
    std::vector<Ring> holes;
    for (std::size_t i = 1; i < rings.size(); ++i) holes.push_back(points_from(rings[i]));
    return make_polygon(points_from(rings[0]), std::move(holes));
}

nlohmann::json ring_json(const Ring& r) {
    auto arr = nlohmann::json::array();
    for (const auto& p : r) arr.push_back({p.x, p.y});
    if (!r.empty()) arr.push_back({r.front().x, r.front().y});
    return arr;
}

nlohmann::json polygon_json(const Polygon& p) {
    auto rings = nlohmann::json::array({ring_json(p.exterior)});
    for (const auto& h : p.holes) rings.push_back(ring_json(h));
    return rings;
}

}  // namespace

Geometry geometry_from_geojson(const nlohmann::json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type != "Point" && type != "LineString" && type != "Polygon" && type != "MultiPolygon") {
        throw Error("unsupported GeoJSON geometry type " + type);
    }
    if (!j.contains("coordinates")) throw Error("GeoJSON " + type + " without coordinates");
    const auto& c = j.at("coordinates");
    Geometry g;
    if (type == "Point") {
        g = point_from(c);
    } else if (type == "LineString") {
        g = LineString{points_from(c)};
    } else if (type == "Polygon") {
        g = polygon_from(c);
    } else if (type == "MultiPolygon") {
        MultiPolygon mp;
        for (const auto& p : c) mp.polygons.push_back(polygon_from(p));
        g = std::move(mp);
    } else {
        throw Error("unsupported GeoJSON geometry type " + type);
    }
    validate(g);
    return g;
}

nlohmann::json to_geojson(const Geometry& g) {
    return std::visit(
        [](const auto& v) -> nlohmann::json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Point>) {
                return {{"type", "Point"}, {"coordinates", {v.x, v.y}}};
            } else if constexpr (std::is_same_v<T, LineString>) {
                auto arr = nlohmann::json::array();
                for (const auto& p : v.points) arr.push_back({p.x, p.y});
                return {{"type", "LineString"}, {"coordinates", arr}};
            } else if constexpr (std::is_same_v<T, Polygon>) {
                return {{"type", "Polygon"}, {"coordinates", polygon_json(v)}};
            } else {
                auto arr = nlohmann::json::array();
                for (const auto& p : v.polygons) arr.push_back(polygon_json(p));
                return {{"type", "MultiPolygon"}, {"coordinates", arr}};
            }
        },
        g);
}

}  // namespace landreuse::geo
