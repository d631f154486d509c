#include "abwave/geometry.hpp"

#include <algorithm>
#include <numbers>
#include <queue>
#include <sstream>

#include "abwave/errors.hpp"

namespace abwave {

bool ObstacleShape::contains(Vec2 p) const {
    if (kind == Kind::Disk) return (p - center).norm() <= radius;
    return std::abs(p.x - center.x) <= half.x && std::abs(p.y - center.y) <= half.y;
}

double ObstacleShape::distance(Vec2 p) const {
    if (kind == Kind::Disk) return std::max(0.0, (p - center).norm() - radius);
    double gx = std::max(0.0, std::abs(p.x - center.x) - half.x);
    double gy = std::max(0.0, std::abs(p.y - center.y) - half.y);
    return std::hypot(gx, gy);
}

double ObstacleShape::min_width() const {
    if (kind == Kind::Disk) return 2.0 * radius;
    return 2.0 * std::min(half.x, half.y);
}

Vec2 ObstacleShape::box_lo() const {
    return kind == Kind::Disk ? Vec2{center.x - radius, center.y - radius} : center - half;
}

Vec2 ObstacleShape::box_hi() const {
    return kind == Kind::Disk ? Vec2{center.x + radius, center.y + radius} : center + half;
}

namespace {

double shape_gap(const ObstacleShape& a, const ObstacleShape& b) {
    using K = ObstacleShape::Kind;
    if (a.kind == K::Disk && b.kind == K::Disk) return (a.center - b.center).norm() - a.radius - b.radius;
    if (a.kind == K::Disk) return b.distance(a.center) - a.radius;
    if (b.kind == K::Disk) return a.distance(b.center) - b.radius;
    double gx = std::abs(a.center.x - b.center.x) - a.half.x - b.half.x;
    double gy = std::abs(a.center.y - b.center.y) - a.half.y - b.half.y;
    if (gx > 0 && gy > 0) return std::hypot(gx, gy);
    return std::max(gx, gy);
}

std::string describe(int k) {
    std::ostringstream os;
    os << "obstacle " << (k + 1);
    return os.str();
}

}  // namespace

bool Grid2D::obstacle_interior(int i, int j) const {
    if (!in_obstacle(i, j)) return false;
    const int di[4] = {1, -1, 0, 0};
    const int dj[4] = {0, 0, 1, -1};
    for (int q = 0; q < 4; ++q) {
        int a = i + di[q], b = j + dj[q];
        if (a < 0 || b < 0 || a >= nx || b >= ny) continue;
        if (!in_obstacle(a, b)) return false;
    }
    return true;
}

std::size_t Grid2D::obstacle_node_count() const {
    return static_cast<std::size_t>(std::count_if(cell_kind.begin(), cell_kind.end(), [](int k) { return k > 0; }));
}

bool Grid2D::point_in_obstacle(Vec2 p) const {
    for (const auto& o : obstacles)
        if (o.contains(p)) return true;
    return false;
}

bool Grid2D::point_in_box(Vec2 p) const {
    const double eps = 1e-12 * std::max(1.0, diameter());
    Vec2 hi = upper();
    return p.x >= origin.x - eps && p.x <= hi.x + eps && p.y >= origin.y - eps && p.y <= hi.y + eps;
}

double Grid2D::diameter() const { return (upper() - origin).norm(); }

GridPtr build_domain(const DomainSpec& spec) {
    if (spec.resolution < 3) throw ResolutionError("resolution must be at least 3 nodes per side");
    if (!(spec.hi.x > spec.lo.x && spec.hi.y > spec.lo.y)) throw ResolutionError("empty outer rectangle");

    auto g = std::make_shared<Grid2D>();
    g->nx = g->ny = spec.resolution;
    g->origin = spec.lo;
    g->dx = (spec.hi.x - spec.lo.x) / (spec.resolution - 1);
    g->dy = (spec.hi.y - spec.lo.y) / (spec.resolution - 1);
    g->obstacles = spec.obstacles;
    const double h = std::max(g->dx, g->dy);
    const double clearance = 2.0 * h;

    const int m = static_cast<int>(spec.obstacles.size());
    for (int k = 0; k < m; ++k) {
        const auto& o = spec.obstacles[k];
        if (o.min_width() < 4.0 * h)
            throw ResolutionError(describe(k) + " spans fewer than 4 cells");
        Vec2 lo = o.box_lo(), hi = o.box_hi();
        double wall = std::min({lo.x - spec.lo.x, lo.y - spec.lo.y, spec.hi.x - hi.x, spec.hi.y - hi.y});
        if (wall < clearance) throw OverlapError(describe(k) + " touches the outer boundary");
        for (int q = 0; q < k; ++q)
            if (shape_gap(o, spec.obstacles[q]) < clearance)
                throw OverlapError(describe(k) + " overlaps " + describe(q));
    }

    g->cell_kind.assign(g->size(), kFluid);
    for (int j = 0; j < g->ny; ++j)
        for (int i = 0; i < g->nx; ++i) {
            Vec2 p = g->node(i, j);
            for (int k = 0; k < m; ++k)
                if (spec.obstacles[k].contains(p)) {
                    g->cell_kind[g->idx(i, j)] = k + 1;
                    break;
                }
        }

    // Each obstacle mask must be a single 4-connected component.
    for (int k = 1; k <= m; ++k) {
        std::vector<int> cells;
        for (std::size_t n = 0; n < g->size(); ++n)
            if (g->cell_kind[n] == k) cells.push_back(static_cast<int>(n));
        if (cells.empty()) throw ResolutionError(describe(k - 1) + " covers no grid node");
        std::vector<char> seen(g->size(), 0);
        std::queue<int> todo;
        todo.push(cells.front());
        seen[cells.front()] = 1;
        std::size_t reached = 0;
        while (!todo.empty()) {
            int n = todo.front();
            todo.pop();
            ++reached;
            int i = n % g->nx, j = n / g->nx;
            const int di[4] = {1, -1, 0, 0};
            const int dj[4] = {0, 0, 1, -1};
            for (int q = 0; q < 4; ++q) {
                int a = i + di[q], b = j + dj[q];
                if (a < 0 || b < 0 || a >= g->nx || b >= g->ny) continue;
                int nn = g->idx(a, b);
                if (!seen[nn] && g->cell_kind[nn] == k) {
                    seen[nn] = 1;
                    todo.push(nn);
                }
            }
        }
        if (reached != cells.size()) throw ResolutionError(describe(k - 1) + " rasterizes to a disconnected mask");
    }

    // Outer loop, counterclockwise from the lower-left corner.
    const double lx = spec.hi.x - spec.lo.x, ly = spec.hi.y - spec.lo.y;
    const double r2 = 1.0 / std::sqrt(2.0);
    auto push = [&](int i, int j, double s, Vec2 nrm, Vec2 tan, int side) {
        g->outer_boundary.push_back({i, j, s, nrm, tan, side});
    };
    for (int i = 0; i < g->nx - 1; ++i)
        push(i, 0, i * g->dx, i == 0 ? Vec2{-r2, -r2} : Vec2{0, -1}, i == 0 ? Vec2{r2, -r2} : Vec2{1, 0}, 0);
    for (int j = 0; j < g->ny - 1; ++j)
        push(g->nx - 1, j, lx + j * g->dy, j == 0 ? Vec2{r2, -r2} : Vec2{1, 0}, j == 0 ? Vec2{r2, r2} : Vec2{0, 1}, 1);
    for (int i = g->nx - 1; i > 0; --i)
        push(i, g->ny - 1, lx + ly + (g->nx - 1 - i) * g->dx, i == g->nx - 1 ? Vec2{r2, r2} : Vec2{0, 1},
             i == g->nx - 1 ? Vec2{-r2, r2} : Vec2{-1, 0}, 2);
    for (int j = g->ny - 1; j > 0; --j)
        push(0, j, 2 * lx + ly + (g->ny - 1 - j) * g->dy, j == g->ny - 1 ? Vec2{-r2, r2} : Vec2{-1, 0},
             j == g->ny - 1 ? Vec2{-r2, -r2} : Vec2{0, -1}, 3);
    g->perimeter = 2 * (lx + ly);

    g->obstacle_boundaries.resize(m);
    for (int k = 0; k < m; ++k) {
        const Vec2 c = spec.obstacles[k].center;
        std::vector<std::pair<double, int>> ring;
        for (int j = 0; j < g->ny; ++j)
            for (int i = 0; i < g->nx; ++i)
                if (g->cell_kind[g->idx(i, j)] == k + 1 && !g->obstacle_interior(i, j)) {
                    Vec2 d = g->node(i, j) - c;
                    ring.emplace_back(std::atan2(d.y, d.x), g->idx(i, j));
                }
        std::sort(ring.begin(), ring.end());
        for (auto& e : ring) g->obstacle_boundaries[k].push_back(e.second);
    }
    return g;
}

double ScalarField::at(int i, int j) const {
    if (grid->obstacle_interior(i, j)) throw MaskError("scalar read inside an obstacle");
    return (*this)(i, j);
}

Vec2 VectorField2D::at(int i, int j) const {
    if (grid->obstacle_interior(i, j)) throw MaskError("vector read inside an obstacle");
    return (*this)(i, j);
}

namespace {

struct Cell {
    int i, j;
    double fx, fy;
};

Cell locate(const Grid2D& g, Vec2 p) {
    if (!g.point_in_box(p)) throw InterpolationError("point outside the outer rectangle");
    if (g.point_in_obstacle(p)) throw InterpolationError("point inside an obstacle");
    double x = (p.x - g.origin.x) / g.dx, y = (p.y - g.origin.y) / g.dy;
    int i = std::clamp(static_cast<int>(std::floor(x)), 0, g.nx - 2);
    int j = std::clamp(static_cast<int>(std::floor(y)), 0, g.ny - 2);
    return {i, j, x - i, y - j};
}

}  // namespace

double interpolate(const ScalarField& f, Vec2 p) {
    Cell c = locate(*f.grid, p);
    return (1 - c.fx) * (1 - c.fy) * f(c.i, c.j) + c.fx * (1 - c.fy) * f(c.i + 1, c.j) +
           (1 - c.fx) * c.fy * f(c.i, c.j + 1) + c.fx * c.fy * f(c.i + 1, c.j + 1);
}

Vec2 interpolate(const VectorField2D& f, Vec2 p) {
    Cell c = locate(*f.grid, p);
    return (1 - c.fx) * (1 - c.fy) * f(c.i, c.j) + c.fx * (1 - c.fy) * f(c.i + 1, c.j) +
           (1 - c.fx) * c.fy * f(c.i, c.j + 1) + c.fx * c.fy * f(c.i + 1, c.j + 1);
}

LoopPath LoopPath::circle(Vec2 c, double r, int n, int turns) {
    LoopPath p;
    p.closed = true;
    const int total = n * std::abs(turns);
    const double dir = turns < 0 ? -1.0 : 1.0;
    for (int k = 0; k < total; ++k) {
        double th = dir * 2.0 * std::numbers::pi * k / n;
        p.vertices.push_back({c.x + r * std::cos(th), c.y + r * std::sin(th)});
    }
    p.vertices.push_back(p.vertices.front());
    return p;
}

LoopPath LoopPath::ellipse(Vec2 c, double rx, double ry, double tilt, int n) {
    std::vector<Vec2> pts;
    const double ct = std::cos(tilt), st = std::sin(tilt);
    for (int k = 0; k < n; ++k) {
        double th = 2.0 * std::numbers::pi * k / n;
        double ex = rx * std::cos(th), ey = ry * std::sin(th);
        pts.push_back({c.x + ct * ex - st * ey, c.y + st * ex + ct * ey});
    }
    return close(std::move(pts));
}

LoopPath LoopPath::segment(Vec2 a, Vec2 b, int n) {
    LoopPath p;
    for (int k = 0; k <= n; ++k) p.vertices.push_back(a + (b - a) * (static_cast<double>(k) / n));
    return p;
}

LoopPath LoopPath::close(std::vector<Vec2> pts) {
    LoopPath p;
    p.vertices = std::move(pts);
    if (!p.vertices.empty() &&
        (p.vertices.front().x != p.vertices.back().x || p.vertices.front().y != p.vertices.back().y))
        p.vertices.push_back(p.vertices.front());
    p.closed = true;
    return p;
}

double LoopPath::length() const {
    double L = 0.0;
    for (std::size_t k = 0; k + 1 < vertices.size(); ++k) L += (vertices[k + 1] - vertices[k]).norm();
    return L;
}

LoopPath LoopPath::reversed() const {
    LoopPath p = *this;
    std::reverse(p.vertices.begin(), p.vertices.end());
    p.winding_cache_.clear();
    return p;
}

LoopPath LoopPath::rotated(std::size_t k) const {
    if (!closed) throw OpenPathError("rotation needs a closed path");
    const std::size_t m = vertices.size() - 1;
    std::vector<Vec2> pts;
    for (std::size_t q = 0; q < m; ++q) pts.push_back(vertices[(k + q) % m]);
    return close(std::move(pts));
}

const std::vector<int>& LoopPath::windings(const Grid2D& grid) const {
    if (winding_cache_.size() != grid.obstacles.size()) {
        winding_cache_.clear();
        for (int k = 0; k < grid.obstacle_count(); ++k) winding_cache_.push_back(winding_number(*this, grid, k));
    }
    return winding_cache_;
}

int winding_about(const LoopPath& path, Vec2 c) {
    if (!path.closed) throw OpenPathError("winding number of an open path");
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < path.vertices.size(); ++k) {
        Vec2 a = path.vertices[k] - c, b = path.vertices[k + 1] - c;
        total += std::atan2(a.cross(b), a.dot(b));
    }
    return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

int winding_number(const LoopPath& path, const Grid2D& grid, int obstacle_index) {
    return winding_about(path, grid.obstacles.at(obstacle_index).center);
}

double line_integral(const VectorField2D& field, const LoopPath& path) {
    double sum = 0.0;
    if (path.vertices.size() < 2) return sum;
    Vec2 prev = interpolate(field, path.vertices[0]);
    for (std::size_t k = 0; k + 1 < path.vertices.size(); ++k) {
        Vec2 next = interpolate(field, path.vertices[k + 1]);
        sum += 0.5 * (prev + next).dot(path.vertices[k + 1] - path.vertices[k]);
        prev = next;
    }
    return sum;
}

}  // namespace abwave
