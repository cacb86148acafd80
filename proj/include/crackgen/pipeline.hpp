#pragma once

#include "crackgen/crack.hpp"
#include "crackgen/evaluation.hpp"
#include "crackgen/labeling.hpp"
#include "crackgen/render.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace crackgen {

struct ComponentConfig {
    std::string name;
    FaceSelector selector;
    std::optional<Material> material;
    std::optional<std::filesystem::path> texture;  // PNG, resolved against the scene file
    std::optional<Rgb> color;
    std::optional<BrickGrid> brick_grid;
};

/// Annotation as authored: free 3D endpoints, projected onto the component
/// when the scene is prepared.
struct AnnotationConfig {
    std::string id;
    std::string component;
    Vec3 start = Vec3::Zero();
    Vec3 end = Vec3::Zero();
    CrackParamRanges params;
    std::optional<std::string> group;
};

struct FlightConfig {
    std::string name;
    Resolution resolution;
    CameraPath path;
    LightingEnvironment lighting;
};

struct SceneConfig {
    std::filesystem::path source;  // the scene file itself
    std::filesystem::path mesh;
    std::filesystem::path output_dir;
    std::uint64_t master_seed = 0;
    int merge_distance = kDefaultMergeDistance;
    double max_anchor_distance = 0.05;
    std::vector<int> levels;
    std::vector<ComponentConfig> components;
    std::vector<AnnotationGroup> groups;
    std::vector<AnnotationConfig> annotations;
    std::vector<FlightConfig> flights;
    SpallingOptions spalling;
    CenterlineOptions centerline;
    CarveOptions carve;
};

/// Reads and validates a JSON scene. Relative paths are resolved against the
/// scene file's directory. Every error message names the offending key.
SceneConfig parse_scene(const std::filesystem::path& path);
SceneConfig parse_scene_text(const std::string& text, const std::filesystem::path& source);

/// Loads the mesh, selects and retextures components and projects every
/// annotation endpoint onto its component. Throws ValidationError when an
/// endpoint is farther than max_anchor_distance from the component.
DamageScene prepare_scene(const SceneConfig& config);

enum class Origin { Real, Synthetic };
std::string to_string(Origin origin);
Origin origin_from_string(const std::string& name);

struct ManifestEntry {
    std::string image;       // relative to the manifest's directory, or absolute
    std::string annotation;  // same
    bool damaged = false;
    Origin origin = Origin::Synthetic;
    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct ManifestCounts {
    std::size_t total = 0;
    std::size_t damaged = 0;
    std::size_t real = 0;
    std::size_t synthetic = 0;
    friend bool operator==(const ManifestCounts&, const ManifestCounts&) = default;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    ManifestCounts counts;
    /// Set on rebalanced manifests, whose real entries repeat by design.
    bool oversampled = false;

    void refresh_counts();
    /// Paths unique (unless oversampled), counts consistent with entries.
    void validate() const;
};

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);
/// Entry paths rewritten relative to `to_dir` (absolute paths stay absolute
/// when no relative form exists).
DatasetManifest rebase_manifest(const DatasetManifest& manifest, const std::filesystem::path& from_dir,
                                const std::filesystem::path& to_dir);

struct GenerateOptions {
    std::optional<int> min_level;  // inclusive filters on config.levels
    std::optional<int> max_level;
    bool overlays = false;
    unsigned threads = 1;
};

/// Renders every (level, flight) pair of the scene into config.output_dir:
///
///   level_<L>/<flight>/frame_<i>.png         color
///   level_<L>/<flight>/frame_<i>_ids.png     16-bit crack ids
///   level_<L>/<flight>/frame_<i>.xml         VOC boxes
///   level_<L>/<flight>/frame_<i>_overlay.png (with overlays)
///   level_<L>/ids_map.json                   crack id -> annotation id
///   manifest.json
///
/// A ".incomplete" marker sits in the output directory until every file has
/// been written.
DatasetManifest generate_dataset(const SceneConfig& config, const GenerateOptions& options = {});

/// Real entries repeated `ratio` times plus every synthetic entry once, in an
/// order shuffled by `seed`. Entry origins are forced to real / synthetic.
DatasetManifest rebalance(const DatasetManifest& real, const DatasetManifest& synthetic, int ratio,
                          std::uint64_t seed);

struct DatasetStats {
    std::size_t total = 0;
    std::size_t damaged = 0;
    std::size_t non_damaged = 0;
    std::size_t real = 0;
    std::size_t synthetic = 0;
    std::size_t boxes = 0;
    friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

/// Counts from the annotation files themselves; relative paths resolve
/// against `base_dir`.
DatasetStats dataset_stats(const DatasetManifest& manifest, const std::filesystem::path& base_dir);

/// Ground-truth annotations of a manifest, with each filename replaced by the
/// entry's image path so ids stay unique across levels and flights.
std::vector<ImageAnnotation> load_ground_truth(const DatasetManifest& manifest, const std::filesystem::path& base_dir);

}  // namespace crackgen
