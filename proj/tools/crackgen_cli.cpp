#include "crackgen/evaluation.hpp"
#include "crackgen/parallel.hpp"
#include "crackgen/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <regex>

namespace fs = std::filesystem;
using namespace crackgen;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

void parse_level_range(const std::string& text, GenerateOptions& opts) {
    static const std::regex pattern(R"(^\s*(-?\d+)?\s*\.\.\s*(-?\d+)?\s*$|^\s*(-?\d+)\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, pattern)) throw ValidationError("--levels expects 'a..b', 'a..', '..b' or 'a'");
    if (m[3].matched) {
        opts.min_level = opts.max_level = std::stoi(m[3].str());
        return;
    }
    if (m[1].matched) opts.min_level = std::stoi(m[1].str());
    if (m[2].matched) opts.max_level = std::stoi(m[2].str());
    if (opts.min_level && opts.max_level && *opts.min_level > *opts.max_level) {
        throw ValidationError("--levels range is empty");
    }
}

fs::path manifest_dir(const fs::path& manifest) {
    return manifest.has_parent_path() ? manifest.parent_path() : fs::path(".");
}

int cmd_validate(const std::string& scene_path) {
    const SceneConfig cfg = parse_scene(scene_path);
    const DamageScene scene = prepare_scene(cfg);
    std::cout << "ok: " << scene.mesh.face_count() << " faces, " << scene.components.size() << " components, "
              << scene.annotations.size() << " annotations, " << cfg.groups.size() << " groups, " << cfg.flights.size()
              << " flights, " << cfg.levels.size() << " levels\n";
    return 0;
}

int cmd_generate(const std::string& scene_path, const std::string& levels, bool overlays, unsigned threads,
                 const std::string& output) {
    SceneConfig cfg = parse_scene(scene_path);
    if (!output.empty()) cfg.output_dir = output;
    GenerateOptions opts;
    if (!levels.empty()) parse_level_range(levels, opts);
    opts.overlays = overlays;
    opts.threads = threads == 0 ? default_threads() : threads;
    const DatasetManifest m = generate_dataset(cfg, opts);
    std::cout << "wrote " << m.counts.total << " frames (" << m.counts.damaged << " damaged) to "
              << cfg.output_dir.string() << "\n";
    return 0;
}

int cmd_rebalance(const std::string& real_path, const std::string& synth_path, int ratio, std::uint64_t seed,
                  const std::string& output) {
    const fs::path out_path = output;
    const fs::path out_dir = manifest_dir(out_path);
    const DatasetManifest real = rebase_manifest(read_manifest(real_path), manifest_dir(real_path), out_dir);
    const DatasetManifest synth = rebase_manifest(read_manifest(synth_path), manifest_dir(synth_path), out_dir);
    const DatasetManifest combined = rebalance(real, synth, ratio, seed);
    if (!out_dir.empty()) fs::create_directories(out_dir);
    write_manifest(combined, out_path);
    std::cout << "wrote " << combined.counts.total << " entries (" << combined.counts.real << " real, "
              << combined.counts.synthetic << " synthetic) to " << out_path.string() << "\n";
    return 0;
}

int cmd_stats(const std::string& manifest_path) {
    const DatasetManifest m = read_manifest(manifest_path);
    const DatasetStats s = dataset_stats(m, manifest_dir(manifest_path));
    std::cout << "total: " << s.total << "\n"
              << "damaged: " << s.damaged << "\n"
              << "non_damaged: " << s.non_damaged << "\n"
              << "real: " << s.real << "\n"
              << "synthetic: " << s.synthetic << "\n"
              << "boxes: " << s.boxes << "\n";
    return 0;
}

int cmd_evaluate(const std::string& gt_path, const std::string& pred_path, const std::string& mode,
                 const MetricThresholds& thresholds, int expand, const std::string& report, const std::string& plot) {
    if (expand < 0) throw ValidationError("--expand must be >= 0");
    for (double t : {thresholds.iou, thresholds.iop, thresholds.iog}) {
        if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("thresholds must lie in [0, 1]");
    }
    const MetricMode metric = metric_mode_from_string(mode);
    std::vector<ImageAnnotation> gt = load_ground_truth(read_manifest(gt_path), manifest_dir(gt_path));
    for (ImageAnnotation& a : gt) a = expand_boxes(a, expand);
    const auto pairs = build_pairs(gt, read_predictions(pred_path));
    const PRCurve curve = pr_curve(pairs, metric, thresholds, default_threads());
    const APResult ap = average_precision(curve);
    if (report.empty()) {
        write_report(std::cout, curve, ap);
    } else {
        std::ofstream out(report);
        if (!out) throw Error("cannot write report '" + report + "'");
        write_report(out, curve, ap);
        std::cout << "ap: " << ap.ap << "\n";
    }
    if (!plot.empty()) write_png(plot, plot_pr_curve(curve));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-synthetic crack dataset generator and detector evaluator"};
    app.require_subcommand(1);

    std::string scene, levels, output, real, synth, manifest, gt, preds, mode = "standard", report, plot,
                rebalance_out = "rebalanced_manifest.json";
    bool overlays = false;
    unsigned threads = 0;
    int ratio = 6, expand = 0;
    std::uint64_t seed = 0;
    MetricThresholds thresholds;

    auto* validate = app.add_subcommand("validate", "Parse and check a scene configuration");
    validate->add_option("scene", scene, "Scene JSON file")->required();

    auto* generate = app.add_subcommand("generate", "Render the dataset described by a scene");
    generate->add_option("scene", scene, "Scene JSON file")->required();
    generate->add_option("--levels", levels, "Damage levels to render, e.g. 1..3");
    generate->add_flag("--overlays", overlays, "Also write box overlay images");
    generate->add_option("--threads", threads, "Worker threads (0 = all cores)");
    generate->add_option("-o,--output", output, "Override the scene's output directory");

    auto* rebal = app.add_subcommand("rebalance", "Oversample a real manifest and merge it with a synthetic one");
    rebal->add_option("real", real, "Manifest of real images")->required();
    rebal->add_option("synthetic", synth, "Manifest of synthetic images")->required();
    rebal->add_option("--ratio", ratio, "Copies of each real entry")->required();
    rebal->add_option("--seed", seed, "Shuffle seed")->required();
    rebal->add_option("-o,--output", rebalance_out, "Output manifest path");

    auto* stats = app.add_subcommand("stats", "Count images, damaged frames and boxes");
    stats->add_option("manifest", manifest, "Manifest JSON file")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against a ground-truth manifest");
    evaluate->add_option("ground_truth", gt, "Ground-truth manifest")->required();
    evaluate->add_option("predictions", preds, "Predictions text file")->required();
    evaluate->add_option("--mode", mode, "standard or m2m")->check(CLI::IsMember({"standard", "m2m"}));
    evaluate->add_option("--iou", thresholds.iou, "IoU threshold (standard mode)");
    evaluate->add_option("--iop", thresholds.iop, "IoP threshold (m2m mode)");
    evaluate->add_option("--iog", thresholds.iog, "IoG threshold (m2m mode)");
    evaluate->add_option("--expand", expand, "Grow ground-truth boxes by N pixels first");
    evaluate->add_option("--report", report, "Write the report here instead of stdout");
    evaluate->add_option("--plot", plot, "Write a PR-curve PNG");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*validate) return cmd_validate(scene);
        if (*generate) return cmd_generate(scene, levels, overlays, threads, output);
        if (*rebal) return cmd_rebalance(real, synth, ratio, seed, rebalance_out);
        if (*stats) return cmd_stats(manifest);
        if (*evaluate) return cmd_evaluate(gt, preds, mode, thresholds, expand, report, plot);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitRuntime;
}
