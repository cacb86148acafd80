#pragma once

#include "crackgen/core.hpp"
#include "crackgen/image.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace crackgen {

using Face = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh with per-vertex attributes and per-face appearance.
///
/// Per-face arrays (face_texture, face_material, face_region, face_crack) are
/// always sized to faces.size(). face_texture indexes into `textures`;
/// face_crack is 0 for undamaged surface and the crack id for faces created
/// by carving.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Vec3> normals;  // unit length, one per vertex
    std::vector<Vec2> uvs;      // one per vertex
    std::vector<Face> faces;

    std::vector<Texture> textures{Texture::solid({200, 200, 200}, "default")};
    Material material = Material::Generic;

    std::vector<std::uint16_t> face_texture;
    std::vector<Material> face_material;
    std::vector<std::int32_t> face_region;  // -1 = unlabelled
    std::vector<std::uint32_t> face_crack;

    std::size_t vertex_count() const noexcept { return vertices.size(); }
    std::size_t face_count() const noexcept { return faces.size(); }

    /// Resizes per-face arrays to faces.size(), filling new entries with defaults.
    void fit_face_attributes();
    /// Throws ValidationError naming the first violated invariant.
    void validate() const;

    Vec3 face_centroid(std::size_t f) const;
    /// Unnormalised; length = 2 * area, direction follows winding.
    Vec3 face_cross(std::size_t f) const;
    double face_area(std::size_t f) const { return 0.5 * face_cross(f).norm(); }

    /// Index of `tex` in textures, appending it if no equivalent texture exists.
    std::uint16_t intern_texture(const Texture& tex);
};

/// Area-weighted vertex normals. Vertices not referenced by any
/// non-degenerate face get +Z.
std::vector<Vec3> compute_vertex_normals(const TriangleMesh& mesh);

/// Planar projection onto the dominant plane of the given faces (all faces if
/// empty), normalised to [0,1] over their bounding rectangle.
std::vector<Vec2> planar_uvs(const TriangleMesh& mesh, const std::vector<std::uint32_t>& faces = {});

/// Drops zero-area faces and faces repeating an earlier face's vertex set.
/// Returns the number of faces removed.
std::size_t repair_mesh(TriangleMesh& mesh);

/// Reads .obj or .ply (ASCII or binary_little_endian). Quads and larger
/// polygons are fan-triangulated, missing normals are computed, missing UVs
/// are synthesised by planar projection, and defective faces are dropped.
TriangleMesh load_mesh(const std::filesystem::path& path);
/// Writes .obj or .ply (ASCII) according to the extension.
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

struct AxisBox {
    Vec3 min;
    Vec3 max;
    /// Half-open per axis: min <= p < max.
    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() < max.array()).all();
    }
};

using FaceSelector = std::variant<std::vector<std::uint32_t>, AxisBox>;

/// Named subset of a mesh's faces. Face indices refer to the mesh passed to
/// select_component.
struct Component {
    std::string name;
    std::vector<std::uint32_t> faces;  // sorted, unique
    std::optional<Material> material;
};

/// Box selection keeps a face iff its centroid lies in the half-open box.
Component select_component(const TriangleMesh& mesh, const FaceSelector& selector,
                           std::string name = {});

/// Points the component's faces at `texture` and sets their material tag.
void retexture_component(TriangleMesh& mesh, Component& component, const Texture& texture,
                         Material material);
/// Loads the PNG at `texture_path` first; throws Error when it is unreadable.
void retexture_component(TriangleMesh& mesh, Component& component,
                         const std::filesystem::path& texture_path, Material material);

/// Effective material of a component: its override, else the majority tag of
/// its faces.
Material component_material(const TriangleMesh& mesh, const Component& component);

/// Running-bond brick layout on a planar component.
///
/// Local frame: p = origin + u * u_axis + v * v_axis, with u horizontal along
/// courses. Bed joints (horizontal mortar centerlines) sit at v = j * (brick
/// height + mortar); head joints in course j sit at u = i * (brick width +
/// mortar), shifted by half a brick on odd courses. The grid covers
/// [0, extent_u] x [0, extent_v].
struct BrickGrid {
    Vec3 origin = Vec3::Zero();
    Vec3 u_axis = Vec3::UnitX();
    Vec3 v_axis = Vec3::UnitZ();
    double brick_width = 0.25;
    double brick_height = 0.065;
    double mortar_width = 0.01;
    double extent_u = 1.0;
    double extent_v = 1.0;

    void validate() const;
    double course_pitch() const { return brick_height + mortar_width; }
    double brick_pitch() const { return brick_width + mortar_width; }
    Vec2 to_local(const Vec3& p) const;
    Vec3 to_world(const Vec2& q) const { return origin + q.x() * u_axis + q.y() * v_axis; }
    /// Distance in the grid plane from `q` to the nearest mortar centerline.
    double distance_to_mortar(const Vec2& q) const;
};

/// Result of projecting a point onto a set of faces.
struct SurfacePoint {
    std::uint32_t face = 0;
    Vec3 barycentric = Vec3::Zero();
    Vec3 position = Vec3::Zero();
    double distance = 0.0;
};

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                               Vec3* barycentric = nullptr);

/// Closest point over `faces` (all faces if empty). Ties go to the lower face index.
SurfacePoint project_to_surface(const TriangleMesh& mesh, const Vec3& p,
                                const std::vector<std::uint32_t>& faces = {});

/// Interpolated, normalised vertex normal at a surface point.
Vec3 surface_normal(const TriangleMesh& mesh, const SurfacePoint& sp);

}  // namespace crackgen
