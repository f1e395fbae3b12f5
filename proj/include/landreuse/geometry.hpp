#pragma once

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

// Planar geometry in a projected CRS. Rings are stored open (the closing
// vertex of GeoJSON input is dropped); polygon exteriors are counter-clockwise
// and holes clockwise after construction.
namespace landreuse::geo {

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

using Ring = std::vector<Point>;

struct LineString {
    std::vector<Point> points;
};

struct Polygon {
    Ring exterior;
    std::vector<Ring> holes;
};

struct MultiPolygon {
    std::vector<Polygon> polygons;
};

using Geometry = std::variant<Point, LineString, Polygon, MultiPolygon>;

struct BBox {
    double min_x, min_y, max_x, max_y;
    bool intersects(const BBox& o) const {
        return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
    }
};

std::string kind_name(const Geometry& g);

// Twice the signed area; positive for counter-clockwise rings.
double signed_area2(const Ring& ring);

// Drops a repeated closing vertex, fixes orientation and validates.
Polygon make_polygon(Ring exterior, std::vector<Ring> holes = {});

// Throws Error for degenerate or self-intersecting rings, short lines and
// non-finite coordinates.
void validate(const Geometry& g);

BBox bbox(const Geometry& g);

// Sign of the cross product (b - a) x (c - a): 1, 0 or -1.
int orientation(const Point& a, const Point& b, const Point& c);
bool on_segment(const Point& p, const Point& a, const Point& b);
// Closed segments; touching and collinear overlap count.
bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d);

// Even-odd ray casting over exterior and holes. Points on any ring count as
// inside. Throws Error when a ring has fewer than 3 vertices.
bool point_in_polygon(const Point& p, const Polygon& poly);

// True iff an edge of one crosses or touches an edge of the other, or one
// contains a vertex of the other.
bool overlaps(const Geometry& a, const Geometry& b);

Geometry geometry_from_geojson(const nlohmann::json& j);
nlohmann::json to_geojson(const Geometry& g);

}  // namespace landreuse::geo
