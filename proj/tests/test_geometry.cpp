#include "test_support.hpp"

#include <cstring>

using namespace crackgen;
using crackgen::testing::TempDir;
using crackgen::testing::make_wall;
using crackgen::testing::write_file;

namespace {

const char* kQuadObj =
    "# unit quad\n"
    "v 0 0 0\n"
    "v 1 0 0\n"
    "v 1 1 0\n"
    "v 0 1 0\n"
    "f 1 2 3 4\n";

}  // namespace

TEST(MeshIo, LoadsObjQuadAndComputesMissingAttributes) {
    TempDir dir("geom");
    write_file(dir / "quad.obj", kQuadObj);
    const TriangleMesh m = load_mesh(dir / "quad.obj");
    ASSERT_EQ(m.face_count(), 2u);
    ASSERT_EQ(m.vertex_count(), 4u);
    ASSERT_EQ(m.normals.size(), 4u);
    ASSERT_EQ(m.uvs.size(), 4u);
    for (const Vec3& n : m.normals) EXPECT_NEAR((n - Vec3::UnitZ()).norm(), 0.0, 1e-12);
    // Planar UVs span the quad's extent.
    double umin = 1e9, umax = -1e9;
    for (const Vec2& uv : m.uvs) {
        umin = std::min(umin, uv.x());
        umax = std::max(umax, uv.x());
    }
    EXPECT_LT(umin, umax);
}

TEST(MeshIo, ObjWithTexcoordsAndNegativeIndices) {
    TempDir dir("geom");
    write_file(dir / "t.obj",
               "v 0 0 0\nv 2 0 0\nv 0 2 0\n"
               "vt 0 0\nvt 1 0\nvt 0 1\n"
               "vn 0 0 1\n"
               "f -3/-3/1 -2/-2/1 -1/-1/1\n");
    const TriangleMesh m = load_mesh(dir / "t.obj");
    ASSERT_EQ(m.face_count(), 1u);
    EXPECT_DOUBLE_EQ(m.face_area(0), 2.0);
    for (std::size_t i = 0; i < 3; ++i) {
        const Face& f = m.faces[0];
        const Vec3 p = m.vertices[f[i]];
        const Vec2 uv = m.uvs[f[i]];
        EXPECT_DOUBLE_EQ(uv.x(), p.x() / 2);
        EXPECT_DOUBLE_EQ(uv.y(), p.y() / 2);
    }
}

TEST(MeshIo, MalformedObjReportsLineNumber) {
    TempDir dir("geom");
    write_file(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nv 1 oops 0\nf 1 2 3\n");
    try {
        load_mesh(dir / "bad.obj");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(MeshIo, OutOfRangeFaceIndexReportsFaceLine) {
    TempDir dir("geom");
    write_file(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\n\nf 1 2 7\n");
    try {
        load_mesh(dir / "bad.obj");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 5u);
        EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
    }
}

TEST(MeshIo, ZeroFacesAndMissingFilesAreErrors) {
    TempDir dir("geom");
    write_file(dir / "empty.obj", "v 0 0 0\nv 1 0 0\n");
    EXPECT_THROW(load_mesh(dir / "empty.obj"), ValidationError);
    EXPECT_THROW(load_mesh(dir / "nope.obj"), Error);
    write_file(dir / "x.stl", "solid");
    EXPECT_THROW(load_mesh(dir / "x.stl"), Error);
}

TEST(MeshIo, ObjRoundTripIsExact) {
    TempDir dir("geom");
    TriangleMesh m = make_wall(1.7, 0.9, 3, 2);
    m.vertices[4].y() = 0.1234567890123;
    m.normals = compute_vertex_normals(m);
    save_mesh(m, dir / "w.obj");
    const TriangleMesh r = load_mesh(dir / "w.obj");
    ASSERT_EQ(r.vertices.size(), m.vertices.size());
    ASSERT_EQ(r.faces, m.faces);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        EXPECT_EQ(r.vertices[i], m.vertices[i]);
        EXPECT_EQ(r.uvs[i], m.uvs[i]);
    }
    EXPECT_EQ(r.material, Material::Plaster);
}

TEST(MeshIo, PlyAsciiRoundTrip) {
    TempDir dir("geom");
    const TriangleMesh m = make_wall(2.0, 1.0, 4, 2, Material::Masonry);
    save_mesh(m, dir / "w.ply");
    const TriangleMesh r = load_mesh(dir / "w.ply");
    ASSERT_EQ(r.faces, m.faces);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) EXPECT_EQ(r.vertices[i], m.vertices[i]);
    EXPECT_EQ(r.material, Material::Masonry);
}

TEST(MeshIo, PlyBinaryLittleEndian) {
    TempDir dir("geom");
    std::string data =
        "ply\nformat binary_little_endian 1.0\n"
        "element vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
        "element face 1\nproperty list uchar int vertex_indices\nend_header\n";
    const float verts[4][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    for (const auto& v : verts) data.append(reinterpret_cast<const char*>(v), sizeof v);
    data.push_back(4);
    const std::int32_t idx[4] = {0, 1, 2, 3};
    data.append(reinterpret_cast<const char*>(idx), sizeof idx);
    write_file(dir / "b.ply", data);
    const TriangleMesh m = load_mesh(dir / "b.ply");
    EXPECT_EQ(m.face_count(), 2u);
    EXPECT_EQ(m.vertex_count(), 4u);
    EXPECT_DOUBLE_EQ(m.face_area(0) + m.face_area(1), 1.0);
}

TEST(MeshIo, TruncatedPlyIsAnError) {
    TempDir dir("geom");
    write_file(dir / "t.ply",
               "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
               "element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n");
    EXPECT_THROW(load_mesh(dir / "t.ply"), ValidationError);
}

TEST(Geometry, RepairDropsDegenerateAndDuplicateFaces) {
    TriangleMesh m = make_wall(1, 1, 1, 1);
    m.faces.push_back({0, 1, 1});
    m.faces.push_back({3, 0, 1});  // same vertex set as face 0
    m.fit_face_attributes();
    EXPECT_EQ(repair_mesh(m), 2u);
    EXPECT_EQ(m.face_count(), 2u);
}

TEST(Geometry, AreaWeightedNormals) {
    TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    m.faces = {{0, 1, 2}, {0, 2, 3}};  // +Z and +X facing, equal area
    m.fit_face_attributes();
    const auto n = compute_vertex_normals(m);
    EXPECT_NEAR((n[0] - Vec3(1, 0, 1).normalized()).norm(), 0.0, 1e-12);
    EXPECT_NEAR((n[1] - Vec3::UnitZ()).norm(), 0.0, 1e-12);
}

TEST(Geometry, SelectComponentByBoxAndFaceList) {
    const TriangleMesh m = make_wall(4, 2, 4, 2);
    const Component upper = select_component(m, AxisBox{{-1, -1, 1}, {5, 1, 3}}, "upper");
    EXPECT_EQ(upper.faces.size(), 8u);
    for (std::uint32_t f : upper.faces) EXPECT_GE(m.face_centroid(f).z(), 1.0);
    const Component listed = select_component(m, std::vector<std::uint32_t>{5, 1, 5, 3}, "listed");
    EXPECT_EQ(listed.faces, (std::vector<std::uint32_t>{1, 3, 5}));
    EXPECT_THROW(select_component(m, AxisBox{{10, 10, 10}, {11, 11, 11}}), ValidationError);
    EXPECT_THROW(select_component(m, std::vector<std::uint32_t>{99}), ValidationError);
}

TEST(Geometry, RetexturePlasterToMasonry) {
    TriangleMesh m = make_wall(4, 2, 4, 2);
    Component lower = select_component(m, AxisBox{{-1, -1, -1}, {5, 1, 1}}, "lower");
    EXPECT_EQ(component_material(m, lower), Material::Plaster);
    const Texture bricks = Texture::solid({150, 70, 50}, "bricks");
    retexture_component(m, lower, bricks, Material::Masonry);
    EXPECT_EQ(component_material(m, lower), Material::Masonry);
    for (std::uint32_t f = 0; f < m.faces.size(); ++f) {
        const bool inside = std::binary_search(lower.faces.begin(), lower.faces.end(), f);
        EXPECT_EQ(m.face_material[f] == Material::Masonry, inside);
        EXPECT_EQ(m.textures[m.face_texture[f]].same_as(bricks), inside);
    }
    EXPECT_THROW(retexture_component(m, lower, std::filesystem::path("/nonexistent/t.png"), Material::Masonry), Error);
}

TEST(Geometry, ProjectToSurface) {
    const TriangleMesh m = make_wall(2, 2, 2, 2);
    const SurfacePoint sp = project_to_surface(m, Vec3(0.3, -0.25, 1.7));
    EXPECT_NEAR(sp.distance, 0.25, 1e-12);
    EXPECT_NEAR((sp.position - Vec3(0.3, 0, 1.7)).norm(), 0.0, 1e-12);
    EXPECT_NEAR(sp.barycentric.sum(), 1.0, 1e-12);
    EXPECT_NEAR((surface_normal(m, sp) + Vec3::UnitY()).norm(), 0.0, 1e-12);
}

TEST(Geometry, BrickGridMortarDistance) {
    BrickGrid g;
    g.extent_u = 2;
    g.extent_v = 1;
    EXPECT_DOUBLE_EQ(g.distance_to_mortar({0.1, 0.0}), 0.0);            // bed joint
    EXPECT_NEAR(g.distance_to_mortar({0.26, 0.03}), 0.0, 1e-12);       // head joint, even course
    EXPECT_NEAR(g.distance_to_mortar({0.13, 0.1}), 0.0, 1e-12);        // head joint, odd course
    EXPECT_NEAR(g.distance_to_mortar({0.05, 0.0375}), 0.0375, 1e-12);  // middle of a brick, nearest is a bed joint
    const Vec3 p(0.4, 0.0, 0.3);
    EXPECT_NEAR((g.to_world(g.to_local(p)) - p).norm(), 0.0, 1e-12);
    BrickGrid bad = g;
    bad.brick_width = -1;
    EXPECT_THROW(bad.validate(), ValidationError);
}
