#include "crackgen/pipeline.hpp"

#include "crackgen/parallel.hpp"
#include "crackgen/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace crackgen {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(Origin origin) { return origin == Origin::Real ? "real" : "synthetic"; }

Origin origin_from_string(const std::string& name) {
    if (name == "real") return Origin::Real;
    if (name == "synthetic") return Origin::Synthetic;
    throw ValidationError("unknown origin '" + name + "' (expected real or synthetic)");
}

void DatasetManifest::refresh_counts() {
    counts = {};
    for (const ManifestEntry& e : entries) {
        ++counts.total;
        if (e.damaged) ++counts.damaged;
        if (e.origin == Origin::Real) {
            ++counts.real;
        } else {
            ++counts.synthetic;
        }
    }
}

void DatasetManifest::validate() const {
    DatasetManifest copy;
    copy.entries = entries;
    copy.refresh_counts();
    if (copy.counts != counts) throw ValidationError("manifest counts do not match its entries");
    if (oversampled) return;
    std::set<std::string> images, annotations;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!images.insert(entries[i].image).second) {
            throw ValidationError("manifest entry " + std::to_string(i) + ": image '" + entries[i].image + "' repeats");
        }
        if (!annotations.insert(entries[i].annotation).second) {
            throw ValidationError("manifest entry " + std::to_string(i) + ": annotation '" + entries[i].annotation +
                                  "' repeats");
        }
    }
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    out.flush();
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

fs::path resolve_entry(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
    manifest.validate();
    json j;
    j["version"] = 1;
    j["oversampled"] = manifest.oversampled;
    j["counts"] = {{"total", manifest.counts.total},
                   {"damaged", manifest.counts.damaged},
                   {"real", manifest.counts.real},
                   {"synthetic", manifest.counts.synthetic}};
    json entries = json::array();
    for (const ManifestEntry& e : manifest.entries) {
        entries.push_back(
            {{"image", e.image}, {"annotation", e.annotation}, {"damaged", e.damaged}, {"origin", to_string(e.origin)}});
    }
    j["entries"] = std::move(entries);
    write_text(path, j.dump(2) + "\n");
}

DatasetManifest read_manifest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read manifest '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed manifest JSON");
    }
    const std::string where = path.string();
    try {
        DatasetManifest m;
        m.oversampled = j.value("oversampled", false);
        const json& entries = j.at("entries");
        if (!entries.is_array()) throw ValidationError(where + ": 'entries' must be an array");
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const json& e = entries[i];
            ManifestEntry entry;
            entry.image = e.at("image").get<std::string>();
            entry.annotation = e.at("annotation").get<std::string>();
            entry.damaged = e.at("damaged").get<bool>();
            entry.origin = origin_from_string(e.at("origin").get<std::string>());
            m.entries.push_back(std::move(entry));
        }
        const json& c = j.at("counts");
        m.counts = {c.at("total").get<std::size_t>(), c.at("damaged").get<std::size_t>(), c.at("real").get<std::size_t>(),
                    c.at("synthetic").get<std::size_t>()};
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw ValidationError(where + ": invalid manifest (" + std::string(e.what()) + ")");
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
    }
}

DatasetManifest rebase_manifest(const DatasetManifest& manifest, const fs::path& from_dir, const fs::path& to_dir) {
    const fs::path to = fs::absolute(to_dir).lexically_normal();
    DatasetManifest out = manifest;
    auto rebase = [&](std::string& p) {
        const fs::path abs = fs::absolute(resolve_entry(from_dir, p)).lexically_normal();
        const fs::path rel = abs.lexically_relative(to);
        p = rel.empty() ? abs.generic_string() : rel.generic_string();
    };
    for (ManifestEntry& e : out.entries) {
        rebase(e.image);
        rebase(e.annotation);
    }
    return out;
}

DatasetManifest rebalance(const DatasetManifest& real, const DatasetManifest& synthetic, int ratio, std::uint64_t seed) {
    if (ratio < 1) throw ValidationError("oversample ratio must be >= 1");
    DatasetManifest out;
    out.oversampled = true;
    out.entries.reserve(real.entries.size() * static_cast<std::size_t>(ratio) + synthetic.entries.size());
    for (int r = 0; r < ratio; ++r) {
        for (ManifestEntry e : real.entries) {
            e.origin = Origin::Real;
            out.entries.push_back(std::move(e));
        }
    }
    for (ManifestEntry e : synthetic.entries) {
        e.origin = Origin::Synthetic;
        out.entries.push_back(std::move(e));
    }
    Rng rng(seed);
    for (std::size_t i = out.entries.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(out.entries[i - 1], out.entries[j]);
    }
    out.refresh_counts();
    return out;
}

DatasetStats dataset_stats(const DatasetManifest& manifest, const fs::path& base_dir) {
    DatasetStats s;
    for (const ManifestEntry& e : manifest.entries) {
        const ImageAnnotation a = read_voc_xml(resolve_entry(base_dir, e.annotation));
        ++s.total;
        if (a.boxes.empty()) {
            ++s.non_damaged;
        } else {
            ++s.damaged;
        }
        if (e.origin == Origin::Real) {
            ++s.real;
        } else {
            ++s.synthetic;
        }
        s.boxes += a.boxes.size();
    }
    return s;
}

std::vector<ImageAnnotation> load_ground_truth(const DatasetManifest& manifest, const fs::path& base_dir) {
    std::vector<ImageAnnotation> out;
    out.reserve(manifest.entries.size());
    for (const ManifestEntry& e : manifest.entries) {
        ImageAnnotation a = read_voc_xml(resolve_entry(base_dir, e.annotation));
        a.filename = e.image;
        out.push_back(std::move(a));
    }
    return out;
}

namespace {

std::string frame_stem(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04d", index);
    return buf;
}

}  // namespace

DatasetManifest generate_dataset(const SceneConfig& config, const GenerateOptions& options) {
    std::vector<int> levels;
    for (int l : config.levels) {
        if (options.min_level && l < *options.min_level) continue;
        if (options.max_level && l > *options.max_level) continue;
        levels.push_back(l);
    }
    if (levels.empty()) throw ValidationError("no configured damage level lies in the requested range");

    const DamageScene scene = prepare_scene(config);
    fs::create_directories(config.output_dir);
    const fs::path marker = config.output_dir / ".incomplete";
    write_text(marker, "generation in progress\n");

    DatasetManifest manifest;
    for (int level : levels) {
        const DamageState state = generate_damage_state(scene, level, config.master_seed, options.threads);
        const std::string level_dir = "level_" + std::to_string(level);
        fs::create_directories(config.output_dir / level_dir);

        json ids = json::object();
        for (const CrackInstance& inst : state.instances) ids[std::to_string(inst.crack_id)] = inst.annotation_id;
        json sidecar = {{"level", level}, {"cracks", ids}, {"skipped", state.skipped}};
        write_text(config.output_dir / level_dir / "ids_map.json", sidecar.dump(2) + "\n");

        for (const FlightConfig& flight : config.flights) {
            const std::string rel_dir = level_dir + "/" + flight.name;
            const fs::path dir = config.output_dir / rel_dir;
            fs::create_directories(dir);
            std::vector<ManifestEntry> entries(static_cast<std::size_t>(flight.path.frame_count));
            parallel_for(entries.size(), options.threads, [&](std::size_t i) {
                const int index = static_cast<int>(i);
                const RenderedFrame frame = render_frame(state.mesh, interpolate_camera(flight.path, index),
                                                         flight.lighting, flight.resolution);
                const std::string stem = frame_stem(index);
                ImageAnnotation ann;
                ann.folder = rel_dir;
                ann.filename = stem + ".png";
                ann.width = flight.resolution.width;
                ann.height = flight.resolution.height;
                ann.boxes = mask_to_boxes(frame.ids, config.merge_distance);
                write_png(dir / (stem + ".png"), frame.color);
                write_png_ids(dir / (stem + "_ids.png"), frame.ids);
                write_voc_xml(ann, dir / (stem + ".xml"));
                if (options.overlays) write_png(dir / (stem + "_overlay.png"), render_debug_overlay(frame.color, ann));
                const bool damaged = std::any_of(frame.ids.ids.begin(), frame.ids.ids.end(),
                                                 [](std::uint32_t v) { return v != 0; });
                entries[i] = {rel_dir + "/" + stem + ".png", rel_dir + "/" + stem + ".xml", damaged, Origin::Synthetic};
            });
            manifest.entries.insert(manifest.entries.end(), entries.begin(), entries.end());
        }
    }
    manifest.refresh_counts();
    write_manifest(manifest, config.output_dir / "manifest.json");
    fs::remove(marker);
    return manifest;
}

}  // namespace crackgen
