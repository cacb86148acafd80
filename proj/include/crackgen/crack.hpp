#pragma once

#include "crackgen/geometry.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crackgen {

struct ParamRange {
    double min = 0.0;
    double max = 0.0;
    bool contains(double v) const { return v >= min && v <= max; }
    friend bool operator==(const ParamRange&, const ParamRange&) = default;
};

/// Ranges a meta-annotation draws its cracks from. Lengths are in meters.
struct CrackParamRanges {
    ParamRange length_fraction{1.0, 1.0};  // share of the annotation line covered
    ParamRange roughness_low{0.0, 0.0};    // low-frequency lateral amplitude
    ParamRange roughness_high{0.0, 0.0};   // high-frequency lateral amplitude
    ParamRange thickness{0.002, 0.002};    // crack width
    ParamRange depth{0.005, 0.005};        // crack inner depth
    double appearance_probability = 1.0;
    double spalling_probability = 0.0;

    /// Throws ValidationError prefixed with `context`.
    void validate(const std::string& context) const;
    friend bool operator==(const CrackParamRanges&, const CrackParamRanges&) = default;
};

/// Point on a face, as barycentric weights of its three vertices.
struct SurfaceAnchor {
    std::uint32_t face = 0;
    Vec3 barycentric{1.0 / 3, 1.0 / 3, 1.0 / 3};
};

/// Expert-authored line between two surface anchors. When `group` is set the
/// annotation uses the group's ranges and `params` is ignored.
struct MetaAnnotation {
    std::string id;
    std::string component;
    SurfaceAnchor start;
    SurfaceAnchor end;
    CrackParamRanges params;
    std::optional<std::string> group;
};

struct AnnotationGroup {
    std::string id;
    CrackParamRanges params;
    int enable_order = 0;  // lower = earlier damage level
};

struct SampledParameters {
    double length_fraction = 1.0;
    double roughness_low = 0.0;
    double roughness_high = 0.0;
    double thickness = 0.0;
    double depth = 0.0;
    bool appears = false;
    friend bool operator==(const SampledParameters&, const SampledParameters&) = default;
};

struct SpallingPatch {
    Vec3 center = Vec3::Zero();
    double radius = 0.0;
    double depth = 0.0;
    friend bool operator==(const SpallingPatch&, const SpallingPatch&) = default;
};

/// One realised crack.
struct CrackInstance {
    std::string annotation_id;
    std::uint32_t crack_id = 0;  // value written to id buffers, > 0
    std::uint64_t seed = 0;
    Material material = Material::Generic;
    SampledParameters params;
    std::vector<Vec3> centerline;
    std::vector<Vec3> normals;  // outward surface normal per centerline vertex
    std::vector<double> width;
    std::vector<double> depth;
    std::vector<SpallingPatch> spalling;

    friend bool operator==(const CrackInstance&, const CrackInstance&) = default;
};

/// Canonical text form; doubles are written as hex floats so equal strings
/// mean bit-identical instances.
std::string serialize(const CrackInstance& instance);

double arc_length(const std::vector<Vec3>& polyline);

// ---- sampling ----

/// Uniform draws in each range plus the appearance decision. Pure in `seed`.
SampledParameters sample_parameters(const CrackParamRanges& ranges, std::uint64_t seed);

// ---- centerline ----

struct CenterlineOptions {
    double fine_step = 0.01;  // target spacing of the high-frequency vertices
    int max_fine_per_segment = 64;
};

/// Trimmed, perturbed and re-projected crack path. The low band is recursive
/// midpoint displacement (2 to 4 levels, amplitudes normalised so their sum is
/// roughness_low); the high band adds per-vertex jitter bounded by
/// roughness_high. Both are lateral: in the anchors' tangent plane,
/// perpendicular to the line. A path longer than the full annotation line is
/// scaled about its midpoint to that length.
///
/// Throws Error if an anchor does not lie on a face of `component`.
std::vector<Vec3> generate_centerline(const TriangleMesh& mesh, const Component& component,
                                      const MetaAnnotation& annotation,
                                      const SampledParameters& params, std::uint64_t seed,
                                      const CenterlineOptions& options = {});

Vec3 anchor_position(const TriangleMesh& mesh, const SurfaceAnchor& anchor);
/// Throws ValidationError unless the anchor's face is in `component` and its
/// weights are a valid barycentric triple.
void check_anchor(const TriangleMesh& mesh, const Component& component, const SurfaceAnchor& anchor,
                  const std::string& context);

// ---- masonry ----

/// Nodes and edges of a brick grid's mortar network, in grid-local coordinates.
struct MortarGraph {
    std::vector<Vec2> nodes;
    std::vector<std::vector<std::pair<std::size_t, double>>> adjacency;
};

MortarGraph build_mortar_graph(const BrickGrid& grid);

/// Re-routes `polyline` along mortar joints: a shortest path in the mortar
/// graph between the nodes nearest to the two endpoints. Where several
/// shortest continuations exist the step closest to the matching point of the
/// input (same arc-length fraction) wins. Collinear runs are merged.
///
/// Throws ValidationError when an endpoint lies outside the grid extent.
std::vector<Vec3> snap_to_masonry(const std::vector<Vec3>& polyline, const BrickGrid& grid);

/// Grid in the dominant plane of a component, origin at its lower-left corner,
/// with standard brick dimensions.
BrickGrid default_brick_grid(const TriangleMesh& mesh, const Component& component);

// ---- profile ----

struct CrackProfile {
    std::vector<double> width;
    std::vector<double> depth;
};

constexpr double kTaperResidual = 0.2;  // fraction of nominal left at the tips
constexpr double kTaperSpan = 0.1;      // share of arc length tapered at each end

/// Nominal thickness/depth with a linear taper to 20% over the outer 10% of
/// arc length at both ends.
CrackProfile build_profile(const std::vector<Vec3>& polyline, const SampledParameters& params);

// ---- spalling ----

struct SpallingOptions {
    double site_spacing = 0.5;
    double radius_min_factor = 1.0;
    double radius_max_factor = 3.0;
};

/// One candidate site per `site_spacing` of arc length, each placed uniformly
/// inside its own stretch; a site becomes a patch with `probability`. Patches
/// are appended to `instance.spalling`.
void generate_spalling(CrackInstance& instance, std::uint64_t seed, double probability,
                       const SpallingOptions& options = {});

// ---- carving ----

struct CarveOptions {
    double edge_divisions = 3.0;  // refine until edges are <= width / edge_divisions
    double min_edge = 5e-4;
    std::size_t max_faces = 6'000'000;
};

struct CarveResult {
    TriangleMesh mesh;
    std::size_t tagged_faces = 0;
    bool skipped = false;
    std::string reason;
};

/// Cuts a V-groove (top width = local width, depth = local depth, along the
/// inward surface normal) and the spalling lenses of `instance` into a copy of
/// `mesh`. Faces near the path are refined by conforming longest-edge
/// bisection, then displaced; faces whose centroid falls inside the groove or
/// a lens are tagged with the crack id and given the interior texture.
///
/// A path that crosses itself is skipped: the result holds the unchanged mesh
/// with skipped = true.
CarveResult carve_crack(const TriangleMesh& mesh, const CrackInstance& instance,
                        const CarveOptions& options = {});

Texture crack_interior_texture();
Texture inner_layer_texture(Material m);

// ---- damage states ----

struct DamageScene {
    TriangleMesh mesh;
    std::vector<Component> components;
    std::map<std::string, BrickGrid> brick_grids;  // by component name
    std::vector<MetaAnnotation> annotations;
    std::vector<AnnotationGroup> groups;
    CenterlineOptions centerline;
    SpallingOptions spalling;
    CarveOptions carve;
};

/// Ranges an annotation samples from: its group's object when grouped.
/// Throws ValidationError on an unknown group.
const CrackParamRanges& resolve_ranges(const MetaAnnotation& annotation,
                                       const std::vector<AnnotationGroup>& groups);

/// crack id of each annotation: 1 + rank of its id in ascending order.
std::map<std::string, std::uint32_t> assign_crack_ids(const std::vector<MetaAnnotation>& annotations);

/// Whether an annotation is active at `level`. Ungrouped annotations are
/// always active.
bool annotation_active(const MetaAnnotation& annotation, const std::vector<AnnotationGroup>& groups,
                       int level);

/// Builds one annotation's instance against the undamaged mesh. Returns
/// nullopt when the appearance draw fails.
std::optional<CrackInstance> generate_instance(const DamageScene& scene, const MetaAnnotation& annotation,
                                               std::uint32_t crack_id, std::uint64_t master_seed);

struct DamageState {
    TriangleMesh mesh;
    std::vector<CrackInstance> instances;  // ascending annotation id
    std::vector<std::string> skipped;      // annotation ids whose carve was refused
};

/// Activates groups with enable_order <= level, generates their instances
/// (in parallel when threads > 1) and carves them in ascending annotation id.
DamageState generate_damage_state(const DamageScene& scene, int level, std::uint64_t master_seed,
                                  unsigned threads = 1);

}  // namespace crackgen
