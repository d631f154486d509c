#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

namespace abwave {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

struct ObstacleShape {
    enum class Kind { Disk, Rect };
    Kind kind = Kind::Disk;
    Vec2 center;
    double radius = 0.0;  // disks
    Vec2 half;            // rectangles: half widths

    static ObstacleShape disk(Vec2 c, double r) { return {Kind::Disk, c, r, {}}; }
    static ObstacleShape rect(Vec2 c, Vec2 h) { return {Kind::Rect, c, 0.0, h}; }

    bool contains(Vec2 p) const;
    // Euclidean distance from p to the shape (0 inside).
    double distance(Vec2 p) const;
    // Smallest extent across the shape.
    double min_width() const;
    // Axis-aligned bounding box.
    Vec2 box_lo() const;
    Vec2 box_hi() const;
};

struct DomainSpec {
    Vec2 lo{0.0, 0.0};
    Vec2 hi{1.0, 1.0};
    std::vector<ObstacleShape> obstacles;
    int resolution = 64;  // nodes per side
};

enum NodeKind : int { kFluid = 0, kExterior = -1 };

struct BoundaryNode {
    int i = 0;
    int j = 0;
    double s = 0.0;  // arclength from the lower-left corner, counterclockwise
    Vec2 normal;     // outward unit normal (corner nodes: normalized average)
    Vec2 tangent;    // counterclockwise unit tangent
    int side = 0;    // 0 bottom, 1 right, 2 top, 3 left; a corner belongs to the side it starts
};

class Grid2D {
public:
    int nx = 0;
    int ny = 0;
    double dx = 0.0;
    double dy = 0.0;
    Vec2 origin;
    // Per node: kFluid, or j >= 1 for a node inside obstacle j.
    std::vector<int> cell_kind;
    std::vector<BoundaryNode> outer_boundary;
    // For obstacle j (0-based here), the obstacle nodes adjacent to fluid,
    // ordered counterclockwise around the obstacle centroid.
    std::vector<std::vector<int>> obstacle_boundaries;
    std::vector<ObstacleShape> obstacles;
    double perimeter = 0.0;

    int idx(int i, int j) const { return j * nx + i; }
    Vec2 node(int i, int j) const { return {origin.x + i * dx, origin.y + j * dy}; }
    Vec2 upper() const { return node(nx - 1, ny - 1); }
    std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }

    bool on_outer(int i, int j) const { return i == 0 || j == 0 || i == nx - 1 || j == ny - 1; }
    bool in_obstacle(int i, int j) const { return cell_kind[idx(i, j)] > 0; }
    // Obstacle node with no fluid neighbour.
    bool obstacle_interior(int i, int j) const;
    // Interior fluid node: the unknowns of the wave solver.
    bool is_unknown(int i, int j) const { return !on_outer(i, j) && !in_obstacle(i, j); }

    int obstacle_count() const { return static_cast<int>(obstacles.size()); }
    std::size_t obstacle_node_count() const;
    bool point_in_obstacle(Vec2 p) const;
    bool point_in_box(Vec2 p) const;
    double diameter() const;
};

using GridPtr = std::shared_ptr<const Grid2D>;

// Rasterizes the domain; throws OverlapError or ResolutionError.
GridPtr build_domain(const DomainSpec& spec);

struct ScalarField {
    GridPtr grid;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(GridPtr g, double fill = 0.0) : grid(std::move(g)), v(grid->size(), fill) {}

    double& operator()(int i, int j) { return v[grid->idx(i, j)]; }
    double operator()(int i, int j) const { return v[grid->idx(i, j)]; }
    // Checked read: MaskError on obstacle interior nodes.
    double at(int i, int j) const;
};

struct VectorField2D {
    GridPtr grid;
    std::vector<Vec2> v;

    VectorField2D() = default;
    explicit VectorField2D(GridPtr g, Vec2 fill = {}) : grid(std::move(g)), v(grid->size(), fill) {}

    Vec2& operator()(int i, int j) { return v[grid->idx(i, j)]; }
    Vec2 operator()(int i, int j) const { return v[grid->idx(i, j)]; }
    Vec2 at(int i, int j) const;
};

// Bilinear interpolation; InterpolationError inside obstacles or outside the box.
double interpolate(const ScalarField& f, Vec2 p);
Vec2 interpolate(const VectorField2D& f, Vec2 p);

struct LoopPath {
    std::vector<Vec2> vertices;
    bool closed = false;

    // Polygonal circle with n segments, traversed `turns` times (negative = clockwise).
    static LoopPath circle(Vec2 c, double r, int n, int turns = 1);
    static LoopPath ellipse(Vec2 c, double rx, double ry, double tilt, int n);
    static LoopPath segment(Vec2 a, Vec2 b, int n = 1);
    // Closed loop from vertices; appends the first vertex if needed.
    static LoopPath close(std::vector<Vec2> pts);

    double length() const;
    LoopPath reversed() const;
    // Same closed loop started at vertex k.
    LoopPath rotated(std::size_t k) const;

    // Cached winding numbers per obstacle.
    const std::vector<int>& windings(const Grid2D& grid) const;

private:
    mutable std::vector<int> winding_cache_;
};

// Signed winding of the closed path around the centroid of obstacle k (0-based).
int winding_number(const LoopPath& path, const Grid2D& grid, int obstacle_index);
// Winding around an arbitrary point.
int winding_about(const LoopPath& path, Vec2 center);

// Composite trapezoid quadrature of v . dx along the polyline.
double line_integral(const VectorField2D& field, const LoopPath& path);

}  // namespace abwave
