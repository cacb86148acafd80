#include "crackgen/crack.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>

namespace crackgen {

namespace {

constexpr double kExtentTolerance = 1e-9;

Vec2 point_at_fraction(const std::vector<Vec2>& poly, const std::vector<double>& s, double fraction) {
    if (poly.size() == 1 || s.back() <= 0.0) return poly.front();
    const double at = std::clamp(fraction, 0.0, 1.0) * s.back();
    const auto it = std::upper_bound(s.begin(), s.end(), at);
    if (it == s.end()) return poly.back();
    const std::size_t i = static_cast<std::size_t>(it - s.begin());
    const double span = s[i] - s[i - 1];
    const double t = span > 0 ? (at - s[i - 1]) / span : 0.0;
    return poly[i - 1] + t * (poly[i] - poly[i - 1]);
}

bool collinear(const Vec2& a, const Vec2& b, const Vec2& c) {
    const Vec2 u = b - a, v = c - b;
    const double cross = u.x() * v.y() - u.y() * v.x();
    return std::abs(cross) <= 1e-12 * std::max(1.0, u.norm() * v.norm()) && u.dot(v) > 0;
}

}  // namespace

MortarGraph build_mortar_graph(const BrickGrid& grid) {
    grid.validate();
    const double cp = grid.course_pitch();
    const double bp = grid.brick_pitch();
    const int beds = static_cast<int>(std::floor(grid.extent_v / cp + kExtentTolerance)) + 1;

    // Head-joint u positions for each course j in [0, beds - 1).
    auto heads = [&](int course) {
        std::vector<double> us;
        const double shift = (course % 2 != 0) ? 0.5 * bp : 0.0;
        for (int i = 0;; ++i) {
            const double u = shift + i * bp;
            if (u > grid.extent_u + kExtentTolerance) break;
            us.push_back(u);
        }
        return us;
    };

    MortarGraph g;
    std::map<std::pair<int, double>, std::size_t> index;  // (bed, u) -> node
    std::vector<std::vector<double>> bed_nodes(beds);
    for (int j = 0; j < beds; ++j) {
        std::vector<double>& us = bed_nodes[j];
        us.push_back(0.0);
        us.push_back(grid.extent_u);
        if (j > 0) {
            const auto below = heads(j - 1);
            us.insert(us.end(), below.begin(), below.end());
        }
        if (j + 1 < beds) {
            const auto above = heads(j);
            us.insert(us.end(), above.begin(), above.end());
        }
        std::sort(us.begin(), us.end());
        us.erase(std::unique(us.begin(), us.end(), [](double x, double y) { return std::abs(x - y) < 1e-12; }), us.end());
        for (double u : us) {
            index[{j, u}] = g.nodes.size();
            g.nodes.emplace_back(u, j * cp);
        }
    }
    g.adjacency.resize(g.nodes.size());
    auto link = [&](std::size_t a, std::size_t b) {
        const double w = (g.nodes[a] - g.nodes[b]).norm();
        g.adjacency[a].emplace_back(b, w);
        g.adjacency[b].emplace_back(a, w);
    };
    auto find = [&](int bed, double u) {
        const auto& us = bed_nodes[bed];
        const auto it = std::min_element(us.begin(), us.end(), [&](double x, double y) { return std::abs(x - u) < std::abs(y - u); });
        return index.at({bed, *it});
    };
    for (int j = 0; j < beds; ++j) {
        for (std::size_t k = 1; k < bed_nodes[j].size(); ++k) {
            link(index.at({j, bed_nodes[j][k - 1]}), index.at({j, bed_nodes[j][k]}));
        }
    }
    for (int j = 0; j + 1 < beds; ++j) {
        for (double u : heads(j)) link(find(j, u), find(j + 1, u));
    }
    return g;
}

std::vector<Vec3> snap_to_masonry(const std::vector<Vec3>& polyline, const BrickGrid& grid) {
    if (polyline.empty()) return {};
    const MortarGraph g = build_mortar_graph(grid);

    std::vector<Vec2> local;
    local.reserve(polyline.size());
    for (const Vec3& p : polyline) local.push_back(grid.to_local(p));
    for (const Vec2* q : {&local.front(), &local.back()}) {
        const double tol = 1e-9 * std::max({1.0, grid.extent_u, grid.extent_v});
        if (q->x() < -tol || q->y() < -tol || q->x() > grid.extent_u + tol || q->y() > grid.extent_v + tol) {
            throw ValidationError("masonry snap: endpoint (" + std::to_string(q->x()) + ", " + std::to_string(q->y()) +
                                  ") lies outside the brick grid extent");
        }
    }
    std::vector<double> s(local.size(), 0.0);
    for (std::size_t i = 1; i < local.size(); ++i) s[i] = s[i - 1] + (local[i] - local[i - 1]).norm();

    auto nearest = [&](const Vec2& q) {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            const double d = (g.nodes[i] - q).squaredNorm();
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        return best;
    };
    const std::size_t start = nearest(local.front());
    const std::size_t goal = nearest(local.back());

    // Distances to the goal.
    std::vector<double> dist(g.nodes.size(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[goal] = 0.0;
    pq.emplace(0.0, goal);
    while (!pq.empty()) {
        const auto [d, n] = pq.top();
        pq.pop();
        if (d > dist[n]) continue;
        for (const auto& [m, w] : g.adjacency[n]) {
            if (d + w < dist[m]) {
                dist[m] = d + w;
                pq.emplace(dist[m], m);
            }
        }
    }
    if (!std::isfinite(dist[start])) throw Error("masonry snap: grid graph is disconnected");

    const double total = dist[start];
    const double eps = 1e-9 * std::max(1.0, total);
    std::vector<Vec2> path{g.nodes[start]};
    std::size_t cur = start;
    double travelled = 0.0;
    while (cur != goal) {
        std::size_t pick = cur;
        double pick_w = 0.0;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [m, w] : g.adjacency[cur]) {
            if (std::abs(dist[m] + w - dist[cur]) > eps) continue;
            const Vec2 target = point_at_fraction(local, s, total > 0 ? (travelled + w) / total : 1.0);
            const double d = (g.nodes[m] - target).squaredNorm();
            if (d < best || (d == best && m < pick)) {
                best = d;
                pick = m;
                pick_w = w;
            }
        }
        travelled += pick_w;
        cur = pick;
        path.push_back(g.nodes[cur]);
    }

    std::vector<Vec2> merged;
    for (const Vec2& p : path) {
        while (merged.size() >= 2 && collinear(merged[merged.size() - 2], merged.back(), p)) merged.pop_back();
        merged.push_back(p);
    }
    if (merged.size() == 1) merged.push_back(merged.front());

    std::vector<Vec3> out;
    out.reserve(merged.size());
    for (const Vec2& q : merged) out.push_back(grid.to_world(q));
    return out;
}

BrickGrid default_brick_grid(const TriangleMesh& mesh, const Component& component) {
    Vec3 n = Vec3::Zero();
    for (std::uint32_t f : component.faces) n += mesh.face_cross(f);
    if (n.norm() < 1e-12) n = Vec3::UnitY();
    n.normalize();
    Vec3 u = Vec3::UnitZ().cross(n);
    if (u.norm() < 1e-6) u = Vec3::UnitX();
    u.normalize();
    const Vec3 v = n.cross(u).normalized();

    double lo_u = std::numeric_limits<double>::infinity(), hi_u = -lo_u, lo_v = lo_u, hi_v = -lo_u;
    Vec3 centroid = Vec3::Zero();
    std::size_t count = 0;
    for (std::uint32_t f : component.faces) {
        for (std::uint32_t i : mesh.faces[f]) {
            const Vec3& p = mesh.vertices[i];
            lo_u = std::min(lo_u, p.dot(u));
            hi_u = std::max(hi_u, p.dot(u));
            lo_v = std::min(lo_v, p.dot(v));
            hi_v = std::max(hi_v, p.dot(v));
            centroid += p;
            ++count;
        }
    }
    centroid /= static_cast<double>(count);
    BrickGrid grid;
    grid.u_axis = u;
    grid.v_axis = v;
    grid.origin = lo_u * u + lo_v * v + centroid.dot(n) * n;
    grid.extent_u = std::max(hi_u - lo_u, grid.brick_pitch());
    grid.extent_v = std::max(hi_v - lo_v, grid.course_pitch());
    return grid;
}

}  // namespace crackgen
