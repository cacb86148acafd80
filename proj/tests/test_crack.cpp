#include "test_support.hpp"

#include "crackgen/random.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <set>

using namespace crackgen;
using crackgen::testing::anchor_at;
using crackgen::testing::make_wall;
using crackgen::testing::whole;

namespace {

CrackParamRanges wide_ranges() {
    CrackParamRanges r;
    r.length_fraction = {0.5, 0.9};
    r.roughness_low = {0.01, 0.05};
    r.roughness_high = {0.001, 0.004};
    r.thickness = {0.004, 0.012};
    r.depth = {0.005, 0.02};
    r.appearance_probability = 0.6;
    r.spalling_probability = 0.4;
    return r;
}

MetaAnnotation line_annotation(const TriangleMesh& m, const Component& c, const std::string& id, Vec3 a, Vec3 b) {
    MetaAnnotation ann;
    ann.id = id;
    ann.component = c.name;
    ann.start = anchor_at(m, c, a);
    ann.end = anchor_at(m, c, b);
    return ann;
}

SampledParameters fixed(double lf, double rl, double rh, double th, double dp) {
    SampledParameters p;
    p.length_fraction = lf;
    p.roughness_low = rl;
    p.roughness_high = rh;
    p.thickness = th;
    p.depth = dp;
    p.appears = true;
    return p;
}

double distance_to_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

// Area of the tagged faces of one crack projected to the wall plane (x/z).
double footprint(const TriangleMesh& m, std::uint32_t crack_id) {
    double area = 0.0;
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
        if (m.face_crack[f] != crack_id) continue;
        const Face& t = m.faces[f];
        const Vec2 a(m.vertices[t[0]].x(), m.vertices[t[0]].z());
        const Vec2 b(m.vertices[t[1]].x(), m.vertices[t[1]].z());
        const Vec2 c(m.vertices[t[2]].x(), m.vertices[t[2]].z());
        area += 0.5 * std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
    }
    return area;
}

}  // namespace

TEST(Random, SeedMixingIsStable) {
    EXPECT_EQ(mix64(0), 0xe220a8397b1dcdafULL);
    EXPECT_EQ(hash_string(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(hash_string("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_NE(annotation_seed(1, "A1"), annotation_seed(1, "A2"));
    Rng r(5);
    EXPECT_EQ(r.uniform(2.5, 2.5), 2.5);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        EXPECT_LT(r.below(7), 7u);
    }
}

TEST(ParamRanges, ValidationNamesTheOwner) {
    CrackParamRanges r = wide_ranges();
    r.thickness = {0.005, 0.001};
    try {
        r.validate("annotation 'A7'");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("annotation 'A7'"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("thickness"), std::string::npos);
    }
    r = wide_ranges();
    r.length_fraction = {0.5, 1.5};
    EXPECT_THROW(r.validate("x"), ValidationError);
    r = wide_ranges();
    r.appearance_probability = 1.2;
    EXPECT_THROW(r.validate("x"), ValidationError);
    r = wide_ranges();
    r.thickness = {0.0, 0.01};
    EXPECT_THROW(r.validate("x"), ValidationError);
}

TEST(Sampling, ValuesStayInRangeAndAreDeterministic) {
    const CrackParamRanges r = wide_ranges();
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        const SampledParameters p = sample_parameters(r, seed);
        EXPECT_TRUE(r.length_fraction.contains(p.length_fraction));
        EXPECT_TRUE(r.roughness_low.contains(p.roughness_low));
        EXPECT_TRUE(r.roughness_high.contains(p.roughness_high));
        EXPECT_TRUE(r.thickness.contains(p.thickness));
        EXPECT_TRUE(r.depth.contains(p.depth));
        EXPECT_EQ(p, sample_parameters(r, seed));
    }
}

TEST(Sampling, BoundaryProbabilities) {
    CrackParamRanges r = wide_ranges();
    r.appearance_probability = 0.0;
    for (std::uint64_t s = 0; s < 500; ++s) EXPECT_FALSE(sample_parameters(r, s).appears);
    r.appearance_probability = 1.0;
    for (std::uint64_t s = 0; s < 500; ++s) EXPECT_TRUE(sample_parameters(r, s).appears);
}

TEST(Sampling, DegenerateRangeGivesExactValue) {
    CrackParamRanges r = wide_ranges();
    r.thickness = {0.0075, 0.0075};
    EXPECT_EQ(sample_parameters(r, 42).thickness, 0.0075);
}

TEST(Sampling, MarginalsLookUniform) {
    // Mean and variance of 20000 draws of a [2, 6] range against 4 and 4/3.
    CrackParamRanges r = wide_ranges();
    r.roughness_low = {2.0, 6.0};
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int s = 0; s < n; ++s) {
        const double v = sample_parameters(r, static_cast<std::uint64_t>(s)).roughness_low;
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    EXPECT_NEAR(mean, 4.0, 4 * std::sqrt(4.0 / 3.0 / n));
    EXPECT_NEAR(var, 4.0 / 3.0, 0.05);
}

TEST(Centerline, StraightPathWithoutRoughnessMatchesAnchors) {
    const TriangleMesh m = make_wall(3, 2, 6, 4);
    const Component c = whole(m);
    const Vec3 a(0.4, 0, 0.3), b(2.5, 0, 1.6);
    const MetaAnnotation ann = line_annotation(m, c, "A", a, b);
    const auto poly = generate_centerline(m, c, ann, fixed(1.0, 0, 0, 0.01, 0.01), 7);
    ASSERT_GE(poly.size(), 2u);
    EXPECT_NEAR((poly.front() - a).norm(), 0.0, 1e-9);
    EXPECT_NEAR((poly.back() - b).norm(), 0.0, 1e-9);
    for (const Vec3& p : poly) EXPECT_LT(distance_to_segment(p, a, b), 1e-9);
    EXPECT_NEAR(arc_length(poly), (b - a).norm(), 1e-9);
}

TEST(Centerline, InvariantsOverManySeeds) {
    const TriangleMesh m = make_wall(3, 2, 6, 4);
    const Component c = whole(m);
    const Vec3 a(0.2, 0, 0.2), b(2.7, 0, 1.7);
    const MetaAnnotation ann = line_annotation(m, c, "A", a, b);
    const CrackParamRanges r = wide_ranges();
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const SampledParameters p = sample_parameters(r, seed);
        const auto poly = generate_centerline(m, c, ann, p, seed);
        ASSERT_GE(poly.size(), 2u);
        EXPECT_LE(arc_length(poly), (b - a).norm() + 1e-9);
        for (const Vec3& q : poly) {
            EXPECT_NEAR(q.y(), 0.0, 1e-12);  // on the wall
            EXPECT_LE(distance_to_segment(q, a, b), p.roughness_low + p.roughness_high + 1e-9);
        }
        EXPECT_EQ(poly, generate_centerline(m, c, ann, p, seed));
    }
}

TEST(Centerline, AnchorOutsideComponentIsAnError) {
    const TriangleMesh m = make_wall(2, 2, 2, 2);
    Component half = select_component(m, AxisBox{{-1, -1, -1}, {3, 1, 1}}, "lower");
    MetaAnnotation ann = line_annotation(m, whole(m), "A", {0.5, 0, 0.5}, {1.5, 0, 1.5});
    EXPECT_THROW(generate_centerline(m, half, ann, fixed(1, 0, 0, 0.01, 0.01), 1), Error);
}

TEST(Profile, TaperExamples) {
    const SampledParameters p = fixed(1, 0, 0, 0.01, 0.02);
    const CrackProfile two = build_profile({{0, 0, 0}, {1, 0, 0}}, p);
    EXPECT_DOUBLE_EQ(two.width[0], 0.2 * 0.01);
    EXPECT_DOUBLE_EQ(two.width[1], 0.2 * 0.01);
    EXPECT_DOUBLE_EQ(two.depth[0], 0.2 * 0.02);

    std::vector<Vec3> line;
    for (int i = 0; i <= 100; ++i) line.emplace_back(i * 0.01, 0, 0);
    const CrackProfile prof = build_profile(line, p);
    EXPECT_DOUBLE_EQ(prof.width[50], 0.01);
    EXPECT_DOUBLE_EQ(prof.depth[50], 0.02);
    for (int i = 1; i <= 10; ++i) EXPECT_GE(prof.width[i], prof.width[i - 1]);
    for (std::size_t i = 0; i < line.size(); ++i) {
        EXPECT_GT(prof.width[i], 0.0);
        EXPECT_LE(prof.width[i], 0.01);
    }
    EXPECT_NEAR(prof.width[5], 0.01 * (0.2 + 0.8 * 0.5), 1e-12);
}

TEST(Masonry, AlreadySnappedLineIsUnchanged) {
    BrickGrid g;
    g.extent_u = 2;
    g.extent_v = 1;
    const std::vector<Vec3> in{g.to_world({0.26, 0.15}), g.to_world({0.78, 0.15})};
    const auto out = snap_to_masonry(in, g);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_NEAR((out[0] - in[0]).norm(), 0.0, 1e-12);
    EXPECT_NEAR((out[1] - in[1]).norm(), 0.0, 1e-12);
}

namespace {

// Exhaustive search over simple paths; only viable on tiny graphs.
double brute_force_shortest(const MortarGraph& g, std::size_t from, std::size_t to) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<char> seen(g.nodes.size(), 0);
    std::function<void(std::size_t, double)> dfs = [&](std::size_t n, double len) {
        if (len >= best) return;
        if (n == to) {
            best = len;
            return;
        }
        seen[n] = 1;
        for (const auto& [m, w] : g.adjacency[n]) {
            if (!seen[m]) dfs(m, len + w);
        }
        seen[n] = 0;
    };
    dfs(from, 0.0);
    return best;
}

std::size_t nearest_node(const MortarGraph& g, const Vec2& q) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < g.nodes.size(); ++i) {
        if ((g.nodes[i] - q).norm() < (g.nodes[best] - q).norm()) best = i;
    }
    return best;
}

}  // namespace

TEST(Masonry, DiagonalBecomesMonotoneStaircaseOfShortestLength) {
    BrickGrid g;
    g.extent_u = 2 * g.brick_pitch();
    g.extent_v = 2 * g.course_pitch();
    const Vec2 a(0, 0), b(g.extent_u, g.extent_v);
    const auto out = snap_to_masonry({g.to_world(a), g.to_world(b)}, g);
    ASSERT_GE(out.size(), 3u);
    std::vector<Vec2> local;
    for (const Vec3& p : out) local.push_back(g.to_local(p));
    for (std::size_t i = 1; i < local.size(); ++i) {
        EXPECT_GE(local[i].x(), local[i - 1].x() - 1e-12);
        EXPECT_GE(local[i].y(), local[i - 1].y() - 1e-12);
        // Axis-aligned steps only.
        const Vec2 d = local[i] - local[i - 1];
        EXPECT_TRUE(std::abs(d.x()) < 1e-12 || std::abs(d.y()) < 1e-12);
        for (int k = 0; k <= 20; ++k) {
            const Vec2 q = local[i - 1] + (k / 20.0) * d;
            EXPECT_LE(g.distance_to_mortar(q), 0.5 * g.mortar_width + 1e-12);
        }
    }
    double len = 0;
    for (std::size_t i = 1; i < local.size(); ++i) len += (local[i] - local[i - 1]).norm();
    const MortarGraph graph = build_mortar_graph(g);
    EXPECT_NEAR(len, brute_force_shortest(graph, nearest_node(graph, a), nearest_node(graph, b)), 1e-12);
}

TEST(Masonry, RandomPolylinesSnapOntoMortar) {
    BrickGrid g;
    g.extent_u = 1.5;
    g.extent_v = 0.9;
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Vec3> poly;
        for (int k = 0; k < 6; ++k) poly.push_back(g.to_world({rng.uniform(0, g.extent_u), rng.uniform(0, g.extent_v)}));
        const auto out = snap_to_masonry(poly, g);
        for (std::size_t i = 1; i < out.size(); ++i) {
            const Vec2 p = g.to_local(out[i - 1]), q = g.to_local(out[i]);
            for (int k = 0; k <= 10; ++k) {
                EXPECT_LE(g.distance_to_mortar(p + (k / 10.0) * (q - p)), 0.5 * g.mortar_width + 1e-9);
            }
        }
    }
}

TEST(Masonry, EndpointOutsideGridIsAnError) {
    BrickGrid g;
    EXPECT_THROW(snap_to_masonry({g.to_world({0.1, 0.1}), g.to_world({3.0, 0.1})}, g), ValidationError);
}

namespace {

CrackInstance straight_instance(double length, double width, double depth) {
    CrackInstance inst;
    inst.annotation_id = "S";
    inst.crack_id = 1;
    inst.params = fixed(1, 0, 0, width, depth);
    for (int i = 0; i <= 50; ++i) inst.centerline.emplace_back(0.1 + length * i / 50.0, 0, 1.0);
    inst.normals.assign(inst.centerline.size(), -Vec3::UnitY());
    const CrackProfile prof = build_profile(inst.centerline, inst.params);
    inst.width = prof.width;
    inst.depth = prof.depth;
    return inst;
}

}  // namespace

TEST(Spalling, SiteCountRadiusAndDepth) {
    CrackInstance inst = straight_instance(2.6, 0.01, 0.02);
    CrackInstance all = inst;
    generate_spalling(all, 11, 1.0);
    ASSERT_EQ(all.spalling.size(), 5u);  // floor(2.6 / 0.5)
    for (std::size_t k = 0; k < all.spalling.size(); ++k) {
        const SpallingPatch& p = all.spalling[k];
        EXPECT_GE(p.center.x() - 0.1, 0.5 * k - 1e-12);
        EXPECT_LE(p.center.x() - 0.1, 0.5 * (k + 1) + 1e-12);
        EXPECT_GT(p.depth, 0.0);
        EXPECT_LE(p.depth, 0.02);
        EXPECT_GE(p.radius, 1.0 * 0.2 * 0.01 - 1e-15);
        EXPECT_LE(p.radius, 3.0 * 0.01 + 1e-15);
    }
    CrackInstance none = inst;
    generate_spalling(none, 11, 0.0);
    EXPECT_TRUE(none.spalling.empty());
    // Acceptance never moves other sites.
    CrackInstance some = inst;
    generate_spalling(some, 11, 0.5);
    for (const SpallingPatch& p : some.spalling) {
        EXPECT_NE(std::find(all.spalling.begin(), all.spalling.end(), p), all.spalling.end());
    }
}

TEST(Carve, ZeroDepthLeavesMeshUnchanged) {
    const TriangleMesh m = make_wall(2, 2, 4, 4);
    const CrackInstance inst = straight_instance(1.5, 0.01, 0.0);
    const CarveResult r = carve_crack(m, inst);
    EXPECT_FALSE(r.skipped);
    EXPECT_EQ(r.tagged_faces, 0u);
    EXPECT_EQ(r.mesh.vertices, m.vertices);
    EXPECT_EQ(r.mesh.faces, m.faces);
}

TEST(Carve, GrooveIsTaggedAndInward) {
    const TriangleMesh m = make_wall(2, 2, 4, 4);
    const CrackInstance inst = straight_instance(1.5, 0.01, 0.02);
    const CarveResult r = carve_crack(m, inst);
    ASSERT_FALSE(r.skipped);
    EXPECT_GT(r.tagged_faces, 0u);
    EXPECT_NO_THROW(r.mesh.validate());
    std::size_t tagged = 0;
    for (std::size_t f = 0; f < r.mesh.faces.size(); ++f) {
        if (r.mesh.face_crack[f] != 1) continue;
        ++tagged;
        EXPECT_TRUE(r.mesh.textures[r.mesh.face_texture[f]].same_as(crack_interior_texture()));
        const Vec3 c = r.mesh.face_centroid(f);
        EXPECT_LE(std::abs(c.z() - 1.0), 0.5 * 0.01 + 1e-9);
    }
    EXPECT_EQ(tagged, r.tagged_faces);
    double deepest = 0;
    for (const Vec3& v : r.mesh.vertices) {
        EXPECT_GE(v.y(), -1e-12);  // displacement is into the wall only
        EXPECT_LE(v.y(), 0.02 + 1e-12);
        deepest = std::max(deepest, v.y());
    }
    EXPECT_GT(deepest, 0.5 * 0.02);
    // Footprint is close to the tapered groove area.
    const double expected = 1.5 * 0.01 * (0.8 + 0.2 * 0.6);
    EXPECT_NEAR(footprint(r.mesh, 1), expected, 0.25 * expected);
}

TEST(Carve, SelfIntersectingPathIsSkipped) {
    const TriangleMesh m = make_wall(2, 2, 4, 4);
    CrackInstance inst;
    inst.crack_id = 1;
    inst.params = fixed(1, 0, 0, 0.01, 0.01);
    inst.centerline = {{0.2, 0, 0.2}, {1.0, 0, 1.0}, {1.0, 0, 0.2}, {0.2, 0, 1.0}};
    inst.normals.assign(4, -Vec3::UnitY());
    inst.width.assign(4, 0.01);
    inst.depth.assign(4, 0.01);
    const CarveResult r = carve_crack(m, inst);
    EXPECT_TRUE(r.skipped);
    EXPECT_EQ(r.mesh.vertices, m.vertices);
    EXPECT_EQ(r.mesh.faces, m.faces);
}

TEST(Carve, DisjointInstancesCommute) {
    const TriangleMesh m = make_wall(4, 2, 8, 4);
    const Component c = whole(m);
    DamageScene scene;
    scene.mesh = m;
    scene.components = {c};
    CrackParamRanges r = wide_ranges();
    r.appearance_probability = 1.0;
    r.spalling_probability = 0.5;
    scene.annotations = {line_annotation(m, c, "L", {0.3, 0, 0.4}, {1.3, 0, 1.5}),
                         line_annotation(m, c, "R", {2.7, 0, 0.4}, {3.7, 0, 1.5})};
    scene.annotations[0].params = r;
    scene.annotations[1].params = r;
    const auto a = generate_instance(scene, scene.annotations[0], 1, 5);
    const auto b = generate_instance(scene, scene.annotations[1], 2, 5);
    ASSERT_TRUE(a && b);
    const TriangleMesh ab = carve_crack(carve_crack(m, *a).mesh, *b).mesh;
    const TriangleMesh ba = carve_crack(carve_crack(m, *b).mesh, *a).mesh;
    for (std::uint32_t id : {1u, 2u}) {
        EXPECT_GT(footprint(ab, id), 0.0);
        EXPECT_NEAR(footprint(ab, id), footprint(ba, id), 1e-6);
    }
}

TEST(Damage, CrackIdsFollowAscendingAnnotationIds) {
    std::vector<MetaAnnotation> anns(3);
    anns[0].id = "b";
    anns[1].id = "c";
    anns[2].id = "a";
    const auto ids = assign_crack_ids(anns);
    EXPECT_EQ(ids.at("a"), 1u);
    EXPECT_EQ(ids.at("b"), 2u);
    EXPECT_EQ(ids.at("c"), 3u);
    anns[1].id = "a";
    EXPECT_THROW(assign_crack_ids(anns), ValidationError);
}

namespace {

DamageScene grouped_scene() {
    const TriangleMesh m = make_wall(4, 2, 8, 4);
    const Component c = whole(m);
    DamageScene s;
    s.mesh = m;
    s.components = {c};
    CrackParamRanges r = wide_ranges();
    r.appearance_probability = 0.7;
    s.groups = {{"G1", r, 1}, {"G2", r, 2}, {"G3", r, 3}};
    const char* groups[] = {"G1", "G2", "G3", "G1", "G2", "G3"};
    for (int i = 0; i < 6; ++i) {
        const double x = 0.2 + 0.6 * i;
        MetaAnnotation a = line_annotation(m, c, "A" + std::to_string(i), {x, 0, 0.3}, {x + 0.4, 0, 1.6});
        a.group = groups[i];
        s.annotations.push_back(a);
    }
    return s;
}

std::set<std::string> instance_set(const DamageState& st) {
    std::set<std::string> out;
    for (const CrackInstance& i : st.instances) out.insert(serialize(i));
    return out;
}

}  // namespace

TEST(Damage, LevelsAreMonotone) {
    const DamageScene s = grouped_scene();
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        std::set<std::string> prev;
        for (int level = 0; level <= 3; ++level) {
            const DamageState st = generate_damage_state(s, level, seed);
            const auto cur = instance_set(st);
            for (const std::string& i : prev) EXPECT_TRUE(cur.count(i)) << "level " << level;
            if (level == 0) {
                EXPECT_TRUE(cur.empty());
            }
            prev = cur;
        }
    }
}

TEST(Damage, ThreadCountDoesNotChangeResult) {
    const DamageScene s = grouped_scene();
    const DamageState one = generate_damage_state(s, 3, 77, 1);
    const DamageState four = generate_damage_state(s, 3, 77, 4);
    EXPECT_EQ(one.instances, four.instances);
    EXPECT_EQ(one.mesh.vertices, four.mesh.vertices);
    EXPECT_EQ(one.mesh.faces, four.mesh.faces);
    EXPECT_EQ(one.mesh.face_crack, four.mesh.face_crack);
    for (std::size_t i = 1; i < one.instances.size(); ++i) {
        EXPECT_LT(one.instances[i - 1].annotation_id, one.instances[i].annotation_id);
    }
}

TEST(Damage, RepeatedEnableOrderAndUnknownGroupAreErrors) {
    DamageScene s = grouped_scene();
    s.groups[1].enable_order = 1;
    EXPECT_THROW(generate_damage_state(s, 1, 1), ValidationError);
    s = grouped_scene();
    s.annotations[0].group = "G9";
    EXPECT_THROW(generate_damage_state(s, 1, 1), ValidationError);
}

TEST(Damage, MasonryComponentUsesMortarPaths) {
    const TriangleMesh m = make_wall(2, 1, 4, 2, Material::Masonry);
    const Component c = whole(m);
    DamageScene s;
    s.mesh = m;
    s.components = {c};
    BrickGrid g;
    g.u_axis = Vec3::UnitX();
    g.v_axis = Vec3::UnitZ();
    g.extent_u = 2;
    g.extent_v = 1;
    s.brick_grids["wall"] = g;
    CrackParamRanges r = wide_ranges();
    r.appearance_probability = 1;
    MetaAnnotation a = line_annotation(m, c, "M", {0.2, 0, 0.1}, {1.6, 0, 0.8});
    a.params = r;
    s.annotations = {a};
    const auto inst = generate_instance(s, a, 1, 3);
    ASSERT_TRUE(inst);
    EXPECT_EQ(inst->material, Material::Masonry);
    for (const Vec3& p : inst->centerline) EXPECT_LE(g.distance_to_mortar(g.to_local(p)), 0.5 * g.mortar_width + 1e-9);
}
