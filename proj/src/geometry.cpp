#include "crackgen/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace crackgen {

std::string to_string(Material m) {
    switch (m) {
        case Material::Plaster: return "plaster";
        case Material::Masonry: return "masonry";
        case Material::Concrete: return "concrete";
        case Material::Generic: break;
    }
    return "generic";
}

Material material_from_string(const std::string& name) {
    if (name == "plaster") return Material::Plaster;
    if (name == "masonry") return Material::Masonry;
    if (name == "concrete") return Material::Concrete;
    if (name == "generic") return Material::Generic;
    throw ValidationError("unknown material '" + name + "' (expected plaster, masonry, concrete or generic)");
}

void TriangleMesh::fit_face_attributes() {
    const std::size_t n = faces.size();
    face_texture.resize(n, 0);
    face_material.resize(n, material);
    face_region.resize(n, -1);
    face_crack.resize(n, 0);
}

void TriangleMesh::validate() const {
    if (faces.empty()) throw ValidationError("mesh has no faces");
    const std::size_t nv = vertices.size();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (std::uint32_t idx : faces[f]) {
            if (idx >= nv) {
                throw ValidationError("face " + std::to_string(f) + " references vertex " +
                                      std::to_string(idx) + " but mesh has " + std::to_string(nv) +
                                      " vertices");
            }
        }
    }
    for (std::size_t i = 0; i < nv; ++i) {
        if (!vertices[i].allFinite()) throw ValidationError("vertex " + std::to_string(i) + " is not finite");
    }
    if (!normals.empty()) {
        if (normals.size() != nv) throw ValidationError("normal count differs from vertex count");
        for (std::size_t i = 0; i < nv; ++i) {
            if (!normals[i].allFinite() || std::abs(normals[i].norm() - 1.0) > 1e-6) {
                throw ValidationError("normal " + std::to_string(i) + " is not unit length");
            }
        }
    }
    if (!uvs.empty() && uvs.size() != nv) throw ValidationError("uv count differs from vertex count");
    const std::size_t nf = faces.size();
    if (face_texture.size() != nf || face_material.size() != nf || face_region.size() != nf ||
        face_crack.size() != nf) {
        throw ValidationError("per-face attribute arrays do not match face count");
    }
    for (std::size_t f = 0; f < nf; ++f) {
        if (face_texture[f] >= textures.size()) {
            throw ValidationError("face " + std::to_string(f) + " references missing texture");
        }
    }
}

Vec3 TriangleMesh::face_centroid(std::size_t f) const {
    const Face& t = faces[f];
    return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
}

Vec3 TriangleMesh::face_cross(std::size_t f) const {
    const Face& t = faces[f];
    return (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
}

std::uint16_t TriangleMesh::intern_texture(const Texture& tex) {
    for (std::size_t i = 0; i < textures.size(); ++i) {
        if (textures[i].same_as(tex)) return static_cast<std::uint16_t>(i);
    }
    if (textures.size() >= std::numeric_limits<std::uint16_t>::max()) throw Error("too many textures");
    textures.push_back(tex);
    return static_cast<std::uint16_t>(textures.size() - 1);
}

std::vector<Vec3> compute_vertex_normals(const TriangleMesh& mesh) {
    std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Vec3 c = mesh.face_cross(f);
        for (std::uint32_t v : mesh.faces[f]) acc[v] += c;
    }
    for (Vec3& n : acc) {
        const double len = n.norm();
        n = len > 0.0 ? Vec3(n / len) : Vec3::UnitZ();
    }
    return acc;
}

std::vector<Vec2> planar_uvs(const TriangleMesh& mesh, const std::vector<std::uint32_t>& faces) {
    Vec3 total = Vec3::Zero();
    auto visit = [&](auto&& fn) {
        if (faces.empty()) {
            for (std::size_t f = 0; f < mesh.faces.size(); ++f) fn(f);
        } else {
            for (std::uint32_t f : faces) fn(f);
        }
    };
    // Orientation-insensitive: fold each face normal into the positive half of
    // its largest axis before summing.
    visit([&](std::size_t f) {
        Vec3 c = mesh.face_cross(f);
        Eigen::Index axis;
        c.cwiseAbs().maxCoeff(&axis);
        if (c[axis] < 0) c = -c;
        total += c;
    });
    Eigen::Index axis = 2;
    if (total.squaredNorm() > 0) total.cwiseAbs().maxCoeff(&axis);
    const int a = (axis + 1) % 3;
    const int b = (axis + 2) % 3;
    // Keep a right-handed (a, b) ordering so textures are not mirrored.
    const int ua = axis == 1 ? b : a;
    const int ub = axis == 1 ? a : b;

    double lo_u = std::numeric_limits<double>::infinity(), hi_u = -lo_u;
    double lo_v = lo_u, hi_v = -lo_u;
    visit([&](std::size_t f) {
        for (std::uint32_t v : mesh.faces[f]) {
            lo_u = std::min(lo_u, mesh.vertices[v][ua]);
            hi_u = std::max(hi_u, mesh.vertices[v][ua]);
            lo_v = std::min(lo_v, mesh.vertices[v][ub]);
            hi_v = std::max(hi_v, mesh.vertices[v][ub]);
        }
    });
    const double su = hi_u > lo_u ? hi_u - lo_u : 1.0;
    const double sv = hi_v > lo_v ? hi_v - lo_v : 1.0;
    std::vector<Vec2> uv(mesh.vertices.size(), Vec2::Zero());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        uv[i] = Vec2((mesh.vertices[i][ua] - lo_u) / su, (mesh.vertices[i][ub] - lo_v) / sv);
    }
    return uv;
}

std::size_t repair_mesh(TriangleMesh& mesh) {
    mesh.fit_face_attributes();
    std::set<std::array<std::uint32_t, 3>> seen;
    std::size_t out = 0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
        if (mesh.face_cross(f).squaredNorm() == 0.0) continue;
        std::array<std::uint32_t, 3> key = t;
        std::sort(key.begin(), key.end());
        if (!seen.insert(key).second) continue;
        mesh.faces[out] = t;
        mesh.face_texture[out] = mesh.face_texture[f];
        mesh.face_material[out] = mesh.face_material[f];
        mesh.face_region[out] = mesh.face_region[f];
        mesh.face_crack[out] = mesh.face_crack[f];
        ++out;
    }
    const std::size_t removed = mesh.faces.size() - out;
    mesh.faces.resize(out);
    mesh.fit_face_attributes();
    return removed;
}

Component select_component(const TriangleMesh& mesh, const FaceSelector& selector, std::string name) {
    Component comp;
    comp.name = std::move(name);
    if (const auto* list = std::get_if<std::vector<std::uint32_t>>(&selector)) {
        for (std::uint32_t f : *list) {
            if (f >= mesh.faces.size()) {
                throw ValidationError("component '" + comp.name + "': face index " + std::to_string(f) +
                                      " out of range (" + std::to_string(mesh.faces.size()) + " faces)");
            }
        }
        comp.faces = *list;
        std::sort(comp.faces.begin(), comp.faces.end());
        comp.faces.erase(std::unique(comp.faces.begin(), comp.faces.end()), comp.faces.end());
    } else {
        const AxisBox& box = std::get<AxisBox>(selector);
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            if (box.contains(mesh.face_centroid(f))) comp.faces.push_back(static_cast<std::uint32_t>(f));
        }
    }
    if (comp.faces.empty()) throw ValidationError("component '" + comp.name + "': selection is empty");
    return comp;
}

void retexture_component(TriangleMesh& mesh, Component& component, const Texture& texture,
                         Material material) {
    mesh.fit_face_attributes();
    const std::uint16_t tex = mesh.intern_texture(texture);
    for (std::uint32_t f : component.faces) {
        if (f >= mesh.faces.size()) throw ValidationError("component '" + component.name + "' does not fit mesh");
        mesh.face_texture[f] = tex;
        mesh.face_material[f] = material;
    }
    component.material = material;
}

void retexture_component(TriangleMesh& mesh, Component& component,
                         const std::filesystem::path& texture_path, Material material) {
    retexture_component(mesh, component, Texture::from_png(texture_path), material);
}

Material component_material(const TriangleMesh& mesh, const Component& component) {
    if (component.material) return *component.material;
    std::array<std::size_t, 4> counts{};
    for (std::uint32_t f : component.faces) {
        const Material m = f < mesh.face_material.size() ? mesh.face_material[f] : mesh.material;
        ++counts[static_cast<std::size_t>(m)];
    }
    return static_cast<Material>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

void BrickGrid::validate() const {
    if (!(mortar_width > 0.0)) throw ValidationError("brick grid: mortar width must be > 0");
    if (!(brick_width > mortar_width) || !(brick_height > mortar_width)) {
        throw ValidationError("brick grid: brick width and height must exceed mortar width");
    }
    if (!(extent_u > 0.0) || !(extent_v > 0.0)) throw ValidationError("brick grid: extent must be positive");
    if (u_axis.norm() < 1e-12 || v_axis.norm() < 1e-12 || std::abs(u_axis.normalized().dot(v_axis.normalized())) > 1e-6) {
        throw ValidationError("brick grid: axes must be non-zero and orthogonal");
    }
}

Vec2 BrickGrid::to_local(const Vec3& p) const {
    const Vec3 d = p - origin;
    return {d.dot(u_axis) / u_axis.squaredNorm(), d.dot(v_axis) / v_axis.squaredNorm()};
}

double BrickGrid::distance_to_mortar(const Vec2& q) const {
    const double cp = course_pitch();
    const double bp = brick_pitch();
    const double j_real = q.y() / cp;
    const double to_bed = std::abs(q.y() - std::round(j_real) * cp);
    const long course = static_cast<long>(std::floor(j_real));
    const double shift = (course % 2 != 0) ? 0.5 * bp : 0.0;
    const double i_real = (q.x() - shift) / bp;
    const double to_head = std::abs(q.x() - shift - std::round(i_real) * bp);
    return std::min(to_bed, to_head);
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, Vec3* bary) {
    // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    auto out = [&](double u, double v, double w) {
        if (bary) *bary = Vec3(u, v, w);
        return Vec3(u * a + v * b + w * c);
    };
    if (d1 <= 0 && d2 <= 0) return out(1, 0, 0);
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return out(0, 1, 0);
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double v = d1 / (d1 - d3);
        return out(1 - v, v, 0);
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return out(0, 0, 1);
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double w = d2 / (d2 - d6);
        return out(1 - w, 0, w);
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return out(0, 1 - w, w);
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return out(1 - v - w, v, w);
}

SurfacePoint project_to_surface(const TriangleMesh& mesh, const Vec3& p, const std::vector<std::uint32_t>& faces) {
    SurfacePoint best;
    best.distance = std::numeric_limits<double>::infinity();
    auto consider = [&](std::uint32_t f) {
        const Face& t = mesh.faces[f];
        Vec3 bary;
        const Vec3 q = closest_point_on_triangle(p, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]], &bary);
        const double d = (q - p).norm();
        if (d < best.distance) {
            best = {f, bary, q, d};
        }
    };
    if (faces.empty()) {
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) consider(static_cast<std::uint32_t>(f));
    } else {
        for (std::uint32_t f : faces) consider(f);
    }
    if (!std::isfinite(best.distance)) throw Error("projection onto an empty face set");
    return best;
}

Vec3 surface_normal(const TriangleMesh& mesh, const SurfacePoint& sp) {
    const Face& t = mesh.faces[sp.face];
    if (mesh.normals.size() == mesh.vertices.size()) {
        Vec3 n = sp.barycentric[0] * mesh.normals[t[0]] + sp.barycentric[1] * mesh.normals[t[1]] +
                 sp.barycentric[2] * mesh.normals[t[2]];
        if (n.norm() > 1e-12) return n.normalized();
    }
    return mesh.face_cross(sp.face).normalized();
}

}  // namespace crackgen
