#include "crackgen/crack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

namespace crackgen {

Texture crack_interior_texture() { return Texture::solid({38, 34, 32}, "crack-interior"); }

Texture inner_layer_texture(Material m) {
    switch (m) {
        case Material::Plaster: return Texture::solid({152, 84, 62}, "inner-layer:plaster");
        case Material::Masonry: return Texture::solid({176, 166, 150}, "inner-layer:masonry");
        case Material::Concrete: return Texture::solid({118, 117, 112}, "inner-layer:concrete");
        case Material::Generic: break;
    }
    return Texture::solid({112, 106, 100}, "inner-layer:generic");
}

namespace {

struct ClosestOnPath {
    double distance = std::numeric_limits<double>::infinity();
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    double width = 0.0;
    double depth = 0.0;
};

// Closest-point queries against the centerline, with per-chunk bounding boxes
// to skip distant segments.
class PathIndex {
public:
    explicit PathIndex(const CrackInstance& inst) : inst_(inst) {
        const std::size_t segs = inst.centerline.size() - 1;
        for (std::size_t s = 0; s < segs; s += kChunk) {
            Chunk c;
            c.first = s;
            c.last = std::min(segs, s + kChunk);
            c.lo = c.hi = inst.centerline[s];
            for (std::size_t k = s; k <= c.last; ++k) {
                c.lo = c.lo.cwiseMin(inst.centerline[k]);
                c.hi = c.hi.cwiseMax(inst.centerline[k]);
            }
            chunks_.push_back(c);
        }
    }

    /// Closest point among segments that could be within `radius` of p.
    ClosestOnPath query(const Vec3& p, double radius) const {
        ClosestOnPath best;
        const auto& P = inst_.centerline;
        for (const Chunk& c : chunks_) {
            const Vec3 d = (c.lo - p).cwiseMax(p - c.hi).cwiseMax(0.0);
            if (d.norm() > std::min(radius, best.distance)) continue;
            for (std::size_t s = c.first; s < c.last; ++s) {
                const Vec3 ab = P[s + 1] - P[s];
                const double len2 = ab.squaredNorm();
                const double t = len2 > 0 ? std::clamp((p - P[s]).dot(ab) / len2, 0.0, 1.0) : 0.0;
                const Vec3 q = P[s] + t * ab;
                const double dist = (p - q).norm();
                if (dist < best.distance) {
                    best.distance = dist;
                    best.point = q;
                    Vec3 n = (1 - t) * inst_.normals[s] + t * inst_.normals[s + 1];
                    best.normal = n.norm() > 1e-12 ? Vec3(n.normalized()) : inst_.normals[s];
                    best.width = (1 - t) * inst_.width[s] + t * inst_.width[s + 1];
                    best.depth = (1 - t) * inst_.depth[s] + t * inst_.depth[s + 1];
                }
            }
        }
        return best;
    }

private:
    static constexpr std::size_t kChunk = 16;
    struct Chunk {
        std::size_t first, last;
        Vec3 lo, hi;
    };
    const CrackInstance& inst_;
    std::vector<Chunk> chunks_;
};

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (std::uint64_t{a} << 32) | b;
}

// Conforming longest-edge bisection. Faces keep their index for the first
// child; other children are appended.
class Refiner {
public:
    explicit Refiner(TriangleMesh& m) : m_(m) {
        for (std::uint32_t f = 0; f < m_.faces.size(); ++f) add_face_edges(f);
    }

    int longest_edge(std::uint32_t f) const {
        const Face& t = m_.faces[f];
        int best = 0;
        double best_len = -1.0;
        Vec3 best_mid;
        for (int k = 0; k < 3; ++k) {
            const Vec3& a = m_.vertices[t[k]];
            const Vec3& b = m_.vertices[t[(k + 1) % 3]];
            const double len = (b - a).squaredNorm();
            const Vec3 mid = 0.5 * (a + b);
            // Ties broken by midpoint position so the choice does not depend on
            // vertex numbering.
            if (len > best_len || (len == best_len && std::lexicographical_compare(mid.data(), mid.data() + 3,
                                                                                    best_mid.data(), best_mid.data() + 3))) {
                best = k;
                best_len = len;
                best_mid = mid;
            }
        }
        return best;
    }

    double longest_length(std::uint32_t f) const {
        const Face& t = m_.faces[f];
        const int k = longest_edge(f);
        return (m_.vertices[t[(k + 1) % 3]] - m_.vertices[t[k]]).norm();
    }

    /// Splits the longest edge of every marked face plus whatever keeps the
    /// mesh conforming. Returns the indices of all faces written.
    std::vector<std::uint32_t> refine(const std::vector<std::uint32_t>& marked) {
        std::unordered_set<std::uint64_t> split;
        std::vector<std::uint64_t> work;
        auto longest_key = [&](std::uint32_t f) {
            const Face& t = m_.faces[f];
            const int k = longest_edge(f);
            return edge_key(t[k], t[(k + 1) % 3]);
        };
        for (std::uint32_t f : marked) {
            const std::uint64_t e = longest_key(f);
            if (split.insert(e).second) work.push_back(e);
        }
        while (!work.empty()) {
            const std::uint64_t e = work.back();
            work.pop_back();
            for (std::uint32_t f : edge_faces_[e]) {
                const std::uint64_t le = longest_key(f);
                if (split.insert(le).second) work.push_back(le);
            }
        }

        std::vector<std::uint64_t> edges(split.begin(), split.end());
        std::sort(edges.begin(), edges.end());
        std::vector<std::uint32_t> faces;
        for (std::uint64_t e : edges) {
            midpoint(e);
            const auto& fs = edge_faces_[e];
            faces.insert(faces.end(), fs.begin(), fs.end());
        }
        std::sort(faces.begin(), faces.end());
        faces.erase(std::unique(faces.begin(), faces.end()), faces.end());

        std::vector<std::uint32_t> written;
        for (std::uint32_t f : faces) subdivide(f, split, written);
        return written;
    }

private:
    std::uint32_t midpoint(std::uint64_t e) {
        auto it = mid_.find(e);
        if (it != mid_.end()) return it->second;
        const auto a = static_cast<std::uint32_t>(e >> 32);
        const auto b = static_cast<std::uint32_t>(e & 0xffffffffu);
        const auto idx = static_cast<std::uint32_t>(m_.vertices.size());
        const Vec3 pos = 0.5 * (m_.vertices[a] + m_.vertices[b]);
        m_.vertices.push_back(pos);
        Vec3 n = m_.normals[a] + m_.normals[b];
        m_.normals.push_back(n.norm() > 1e-12 ? Vec3(n.normalized()) : m_.normals[a]);
        m_.uvs.push_back(0.5 * (m_.uvs[a] + m_.uvs[b]));
        mid_.emplace(e, idx);
        return idx;
    }

    void add_face_edges(std::uint32_t f) {
        const Face& t = m_.faces[f];
        for (int k = 0; k < 3; ++k) edge_faces_[edge_key(t[k], t[(k + 1) % 3])].push_back(f);
    }

    void remove_face_edges(std::uint32_t f) {
        const Face& t = m_.faces[f];
        for (int k = 0; k < 3; ++k) {
            auto& v = edge_faces_[edge_key(t[k], t[(k + 1) % 3])];
            v.erase(std::remove(v.begin(), v.end(), f), v.end());
        }
    }

    void emit(std::uint32_t parent, bool first, const Face& face, std::vector<std::uint32_t>& written) {
        std::uint32_t idx = parent;
        if (first) {
            m_.faces[parent] = face;
        } else {
            idx = static_cast<std::uint32_t>(m_.faces.size());
            m_.faces.push_back(face);
            m_.face_texture.push_back(m_.face_texture[parent]);
            m_.face_material.push_back(m_.face_material[parent]);
            m_.face_region.push_back(m_.face_region[parent]);
            m_.face_crack.push_back(m_.face_crack[parent]);
        }
        add_face_edges(idx);
        written.push_back(idx);
    }

    void subdivide(std::uint32_t f, const std::unordered_set<std::uint64_t>& split, std::vector<std::uint32_t>& written) {
        const Face t = m_.faces[f];
        const int k = longest_edge(f);
        const std::uint32_t a = t[k], b = t[(k + 1) % 3], c = t[(k + 2) % 3];
        remove_face_edges(f);
        const std::uint32_t m = mid_.at(edge_key(a, b));
        const bool split_bc = split.count(edge_key(b, c)) != 0;
        const bool split_ca = split.count(edge_key(c, a)) != 0;
        bool first = true;
        auto put = [&](std::uint32_t x, std::uint32_t y, std::uint32_t z) {
            emit(f, first, {x, y, z}, written);
            first = false;
        };
        if (split_ca) {
            const std::uint32_t q = mid_.at(edge_key(c, a));
            put(a, m, q);
            put(q, m, c);
        } else {
            put(a, m, c);
        }
        if (split_bc) {
            const std::uint32_t n = mid_.at(edge_key(b, c));
            put(m, b, n);
            put(m, n, c);
        } else {
            put(m, b, c);
        }
    }

    TriangleMesh& m_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> edge_faces_;
    std::unordered_map<std::uint64_t, std::uint32_t> mid_;
};

// Proper crossing of non-adjacent segments after projecting onto the plane
// orthogonal to the mean surface normal.
bool path_self_intersects(const CrackInstance& inst) {
    const auto& P = inst.centerline;
    if (P.size() < 4) return false;
    Vec3 n = Vec3::Zero();
    for (const Vec3& v : inst.normals) n += v;
    if (n.norm() < 1e-12) return false;
    n.normalize();
    const Vec3 e1 = n.unitOrthogonal();
    const Vec3 e2 = n.cross(e1);
    std::vector<Vec2> q(P.size());
    for (std::size_t i = 0; i < P.size(); ++i) q[i] = Vec2(P[i].dot(e1), P[i].dot(e2));
    auto orient = [](const Vec2& a, const Vec2& b, const Vec2& c) {
        return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    };
    const std::size_t segs = P.size() - 1;
    for (std::size_t i = 0; i < segs; ++i) {
        const Vec2 lo_i = q[i].cwiseMin(q[i + 1]), hi_i = q[i].cwiseMax(q[i + 1]);
        for (std::size_t j = i + 2; j < segs; ++j) {
            const Vec2 lo_j = q[j].cwiseMin(q[j + 1]), hi_j = q[j].cwiseMax(q[j + 1]);
            if ((lo_j.array() > hi_i.array()).any() || (lo_i.array() > hi_j.array()).any()) continue;
            const double d1 = orient(q[i], q[i + 1], q[j]);
            const double d2 = orient(q[i], q[i + 1], q[j + 1]);
            const double d3 = orient(q[j], q[j + 1], q[i]);
            const double d4 = orient(q[j], q[j + 1], q[i + 1]);
            if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
        }
    }
    return false;
}

}  // namespace

CarveResult carve_crack(const TriangleMesh& input, const CrackInstance& inst, const CarveOptions& opt) {
    CarveResult result;
    result.mesh = input;
    const std::size_t nv = inst.centerline.size();
    if (nv < 2 || inst.width.size() != nv || inst.depth.size() != nv || inst.normals.size() != nv) {
        result.skipped = true;
        result.reason = "instance profile is incomplete";
        return result;
    }
    const double max_depth = *std::max_element(inst.depth.begin(), inst.depth.end());
    double max_patch_depth = 0.0, max_patch_radius = 0.0;
    for (const SpallingPatch& p : inst.spalling) {
        if (p.radius > 0) max_patch_depth = std::max(max_patch_depth, p.depth);
        max_patch_radius = std::max(max_patch_radius, p.radius);
    }
    if (max_depth <= 0.0 && max_patch_depth <= 0.0) return result;
    if (path_self_intersects(inst)) {
        result.skipped = true;
        result.reason = "crack path intersects itself";
        return result;
    }

    TriangleMesh& m = result.mesh;
    m.fit_face_attributes();
    if (m.normals.size() != m.vertices.size()) m.normals = compute_vertex_normals(m);
    if (m.uvs.size() != m.vertices.size()) m.uvs = planar_uvs(m);

    const double max_width = *std::max_element(inst.width.begin(), inst.width.end());
    const double reach = std::max(0.5 * max_width, max_patch_radius);
    const PathIndex path(inst);

    Vec3 lo = inst.centerline.front(), hi = lo;
    for (const Vec3& p : inst.centerline) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double margin = reach + std::max(max_width, max_depth) + 1e-6;
    lo.array() -= margin;
    hi.array() += margin;

    auto face_bounds = [&](std::uint32_t f, Vec3& centroid) {
        centroid = m.face_centroid(f);
        double r = 0.0;
        for (std::uint32_t v : m.faces[f]) r = std::max(r, (m.vertices[v] - centroid).norm());
        return r;
    };

    // Target edge length for a face, or 0 when the face is away from the carve.
    auto target_edge = [&](std::uint32_t f) {
        Vec3 c;
        const double r = face_bounds(f, c);
        double h = std::numeric_limits<double>::infinity();
        const ClosestOnPath cp = path.query(c, r + 0.5 * max_width);
        if (cp.distance <= r + 0.5 * max_width && cp.width > 0.0) {
            h = std::max(opt.min_edge, cp.width / opt.edge_divisions);
        }
        for (const SpallingPatch& p : inst.spalling) {
            if (p.radius > 0.0 && (c - p.center).norm() <= r + p.radius) {
                h = std::min(h, std::max(opt.min_edge, p.radius / 4.0));
            }
        }
        return std::isfinite(h) ? h : 0.0;
    };

    std::vector<std::uint32_t> candidates;
    for (std::uint32_t f = 0; f < m.faces.size(); ++f) {
        Vec3 c;
        const double r = face_bounds(f, c);
        if (((c.array() + r) >= lo.array()).all() && ((c.array() - r) <= hi.array()).all()) candidates.push_back(f);
    }

    Refiner refiner(m);
    while (!candidates.empty()) {
        std::vector<std::uint32_t> marked;
        for (std::uint32_t f : candidates) {
            const double h = target_edge(f);
            if (h > 0.0 && refiner.longest_length(f) > h) marked.push_back(f);
        }
        if (marked.empty()) break;
        candidates = refiner.refine(marked);
        if (m.faces.size() > opt.max_faces) {
            throw Error("carving crack " + inst.annotation_id + " exceeded the face budget (" +
                        std::to_string(opt.max_faces) + ")");
        }
    }

    // Displacement field.
    struct Hit {
        double groove = 0.0;
        double lens = 0.0;
        Vec3 normal = Vec3::UnitZ();
    };
    auto evaluate = [&](const Vec3& p) {
        Hit h;
        const ClosestOnPath cp = path.query(p, reach);
        if (!std::isfinite(cp.distance)) return h;
        const Vec3 d = p - cp.point;
        const double offset = d.dot(cp.normal);
        const double guard = std::max({max_width, max_depth, max_patch_radius, 1e-4});
        if (std::abs(offset) > guard) return h;
        h.normal = cp.normal;
        const double lateral = (d - offset * cp.normal).norm();
        if (cp.width > 0.0 && lateral < 0.5 * cp.width) h.groove = cp.depth * (1.0 - 2.0 * lateral / cp.width);
        for (const SpallingPatch& sp : inst.spalling) {
            if (sp.radius <= 0.0) continue;
            const Vec3 e = p - sp.center;
            const double in_plane = (e - e.dot(cp.normal) * cp.normal).norm();
            if (in_plane < sp.radius) {
                const double x = in_plane / sp.radius;
                h.lens = std::max(h.lens, sp.depth * (1.0 - x * x));
            }
        }
        return h;
    };

    const std::size_t nverts = m.vertices.size();
    std::vector<double> disp(nverts, 0.0);
    std::vector<Vec3> dir(nverts, Vec3::Zero());
    for (std::size_t v = 0; v < nverts; ++v) {
        const Vec3& p = m.vertices[v];
        if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) continue;
        const Hit h = evaluate(p);
        const double amount = std::max(h.groove, h.lens);
        if (amount > 0.0) {
            disp[v] = amount;
            dir[v] = -h.normal;
        }
    }

    const std::uint16_t groove_tex = m.intern_texture(crack_interior_texture());
    std::vector<char> touched(nverts, 0);
    for (std::uint32_t f = 0; f < m.faces.size(); ++f) {
        const Face& t = m.faces[f];
        if (disp[t[0]] <= 0.0 && disp[t[1]] <= 0.0 && disp[t[2]] <= 0.0) continue;
        for (std::uint32_t v : t) touched[v] = 1;
        const Hit h = evaluate(m.face_centroid(f));
        if (h.groove > 0.0) {
            m.face_crack[f] = inst.crack_id;
            m.face_texture[f] = groove_tex;
            ++result.tagged_faces;
        } else if (h.lens > 0.0) {
            m.face_crack[f] = inst.crack_id;
            m.face_texture[f] = m.intern_texture(inner_layer_texture(m.face_material[f]));
            ++result.tagged_faces;
        }
    }
    for (std::size_t v = 0; v < nverts; ++v) {
        if (disp[v] > 0.0) m.vertices[v] += disp[v] * dir[v];
    }

    // Area-weighted normals for every vertex sharing a face with a moved one.
    std::vector<Vec3> acc(nverts, Vec3::Zero());
    for (std::uint32_t f = 0; f < m.faces.size(); ++f) {
        const Face& t = m.faces[f];
        if (!touched[t[0]] && !touched[t[1]] && !touched[t[2]]) continue;
        const Vec3 c = m.face_cross(f);
        for (std::uint32_t v : t) {
            if (touched[v]) acc[v] += c;
        }
    }
    for (std::size_t v = 0; v < nverts; ++v) {
        if (touched[v] && acc[v].norm() > 0.0) m.normals[v] = acc[v].normalized();
    }
    m.validate();
    return result;
}

}  // namespace crackgen
