#include "crackgen/evaluation.hpp"

#include "crackgen/core.hpp"
#include "crackgen/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace crackgen {

namespace {

// Threshold as p / 10^k from its shortest round-tripping decimal form, so
// that 0.7 means seven tenths rather than the nearest binary double.
bool decimal_fraction(double t, unsigned __int128& p, unsigned __int128& scale) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, t, std::chars_format::fixed);
    if (res.ec != std::errc()) return false;
    p = 0;
    scale = 1;
    bool after_point = false;
    int decimals = 0;
    for (const char* c = buf; c != res.ptr; ++c) {
        if (*c == '.') {
            after_point = true;
            continue;
        }
        if (after_point && ++decimals > 30) return false;
        p = p * 10 + static_cast<unsigned>(*c - '0');
        if (after_point) scale *= 10;
    }
    return true;
}

}  // namespace

bool AreaRatio::at_least(double t) const {
    if (std::isnan(t)) return false;
    if (t <= 0.0) return true;
    if (den <= 0 || num < 0) return false;
    if (t > 1.0) return static_cast<double>(num) / static_cast<double>(den) >= t;
    unsigned __int128 p = 0, scale = 1;
    if (decimal_fraction(t, p, scale)) {
        return static_cast<unsigned __int128>(num) * scale >= p * static_cast<unsigned __int128>(den);
    }
    // Thresholds with very long decimal forms: compare against the exact
    // binary value t = m * 2^-s instead.
    int k = 0;
    const double f = std::frexp(t, &k);
    const auto m = static_cast<unsigned __int128>(std::ldexp(f, 53));
    const int s = 53 - k;
    if (s >= 127) return num >= 1;
    const unsigned __int128 prod = m * static_cast<unsigned __int128>(den);
    const unsigned __int128 q = prod >> s;
    const bool rem = (prod & ((static_cast<unsigned __int128>(1) << s) - 1)) != 0;
    return static_cast<unsigned __int128>(num) >= q + (rem ? 1 : 0);
}

long long intersection_area(const BoundingBox& a, const BoundingBox& b) {
    const long long w = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
    const long long h = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
    return w > 0 && h > 0 ? w * h : 0;
}

long long union_area(const std::vector<BoundingBox>& boxes) {
    std::vector<int> xs, ys;
    for (const BoundingBox& b : boxes) {
        if (b.xmax <= b.xmin || b.ymax <= b.ymin) continue;
        xs.push_back(b.xmin);
        xs.push_back(b.xmax);
        ys.push_back(b.ymin);
        ys.push_back(b.ymax);
    }
    if (xs.empty()) return 0;
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

    const std::size_t nx = xs.size() - 1, ny = ys.size() - 1;
    std::vector<char> covered(nx * ny, 0);
    for (const BoundingBox& b : boxes) {
        if (b.xmax <= b.xmin || b.ymax <= b.ymin) continue;
        const auto i0 = std::lower_bound(xs.begin(), xs.end(), b.xmin) - xs.begin();
        const auto i1 = std::lower_bound(xs.begin(), xs.end(), b.xmax) - xs.begin();
        const auto j0 = std::lower_bound(ys.begin(), ys.end(), b.ymin) - ys.begin();
        const auto j1 = std::lower_bound(ys.begin(), ys.end(), b.ymax) - ys.begin();
        for (auto j = j0; j < j1; ++j) {
            for (auto i = i0; i < i1; ++i) covered[static_cast<std::size_t>(j) * nx + static_cast<std::size_t>(i)] = 1;
        }
    }
    long long area = 0;
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            if (covered[j * nx + i]) area += static_cast<long long>(xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
        }
    }
    return area;
}

namespace {

long long covered_area(const BoundingBox& base, const std::vector<BoundingBox>& others) {
    std::vector<BoundingBox> clipped;
    clipped.reserve(others.size());
    for (const BoundingBox& o : others) {
        BoundingBox c;
        c.xmin = std::max(base.xmin, o.xmin);
        c.ymin = std::max(base.ymin, o.ymin);
        c.xmax = std::min(base.xmax, o.xmax);
        c.ymax = std::min(base.ymax, o.ymax);
        if (c.xmax > c.xmin && c.ymax > c.ymin) clipped.push_back(c);
    }
    return union_area(clipped);
}

}  // namespace

AreaRatio iou_ratio(const BoundingBox& a, const BoundingBox& b) {
    const long long inter = intersection_area(a, b);
    return {inter, a.area() + b.area() - inter};
}

AreaRatio iop_ratio(const BoundingBox& pb, const std::vector<BoundingBox>& gtbs) {
    return {covered_area(pb, gtbs), pb.area()};
}

AreaRatio iog_ratio(const BoundingBox& gtb, const std::vector<BoundingBox>& pbs) {
    return {covered_area(gtb, pbs), gtb.area()};
}

void EvaluationPair::validate() const {
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        if (!ground_truth[i].valid_for(width, height)) {
            throw ValidationError("image '" + image_id + "': ground-truth box " + std::to_string(i) + " is invalid");
        }
    }
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const BoundingBox& p = predictions[i];
        if (!p.valid_for(width, height)) {
            throw ValidationError("image '" + image_id + "': prediction " + std::to_string(i) + " is invalid");
        }
        if (!p.confidence || !(*p.confidence >= 0.0 && *p.confidence <= 1.0)) {
            throw ValidationError("image '" + image_id + "': prediction " + std::to_string(i) +
                                  " needs a confidence in [0, 1]");
        }
    }
}

namespace {

std::vector<BoundingBox> kept_predictions(const EvaluationPair& pair, double confidence_threshold) {
    std::vector<BoundingBox> kept;
    for (const BoundingBox& p : pair.predictions) {
        if (p.confidence.value_or(0.0) >= confidence_threshold) kept.push_back(p);
    }
    return kept;
}

void finish(PrecisionRecall& pr) {
    pr.precision = pr.predictions == 0 ? 1.0 : static_cast<double>(pr.true_positives) / pr.predictions;
    pr.recall = pr.ground_truths == 0 ? 1.0 : static_cast<double>(pr.recalled) / pr.ground_truths;
}

}  // namespace

PrecisionRecall pr_at_threshold_m2m(const std::vector<EvaluationPair>& pairs, double confidence_threshold,
                                    double iop_threshold, double iog_threshold) {
    PrecisionRecall pr;
    for (const EvaluationPair& pair : pairs) {
        const std::vector<BoundingBox> kept = kept_predictions(pair, confidence_threshold);
        pr.predictions += kept.size();
        pr.ground_truths += pair.ground_truth.size();
        for (const BoundingBox& pb : kept) {
            if (iop_ratio(pb, pair.ground_truth).at_least(iop_threshold)) ++pr.true_positives;
        }
        for (const BoundingBox& gtb : pair.ground_truth) {
            if (iog_ratio(gtb, kept).at_least(iog_threshold)) ++pr.recalled;
        }
    }
    finish(pr);
    return pr;
}

PrecisionRecall pr_at_threshold_standard(const std::vector<EvaluationPair>& pairs, double confidence_threshold,
                                         double iou_threshold) {
    PrecisionRecall pr;
    for (const EvaluationPair& pair : pairs) {
        std::vector<BoundingBox> kept = kept_predictions(pair, confidence_threshold);
        std::stable_sort(kept.begin(), kept.end(), [](const BoundingBox& a, const BoundingBox& b) {
            return a.confidence.value_or(0.0) > b.confidence.value_or(0.0);
        });
        pr.predictions += kept.size();
        pr.ground_truths += pair.ground_truth.size();
        std::vector<char> matched(pair.ground_truth.size(), 0);
        for (const BoundingBox& pb : kept) {
            int best = -1;
            AreaRatio best_iou{0, 1};
            for (std::size_t g = 0; g < pair.ground_truth.size(); ++g) {
                if (matched[g]) continue;
                const AreaRatio r = iou_ratio(pb, pair.ground_truth[g]);
                if (best < 0 || static_cast<__int128>(r.num) * best_iou.den > static_cast<__int128>(best_iou.num) * r.den) {
                    best = static_cast<int>(g);
                    best_iou = r;
                }
            }
            if (best >= 0 && best_iou.num > 0 && best_iou.at_least(iou_threshold)) {
                matched[static_cast<std::size_t>(best)] = 1;
                ++pr.true_positives;
                ++pr.recalled;
            }
        }
    }
    finish(pr);
    return pr;
}

std::string to_string(MetricMode mode) { return mode == MetricMode::Standard ? "standard" : "m2m"; }

MetricMode metric_mode_from_string(const std::string& name) {
    if (name == "standard") return MetricMode::Standard;
    if (name == "m2m") return MetricMode::ManyToMany;
    throw ValidationError("unknown metric mode '" + name + "' (expected standard or m2m)");
}

PRCurve pr_curve(const std::vector<EvaluationPair>& pairs, MetricMode mode, const MetricThresholds& thresholds,
                 unsigned threads) {
    PRCurve curve;
    curve.mode = mode;
    curve.thresholds = thresholds;
    std::vector<double> confidences;
    for (const EvaluationPair& pair : pairs) {
        for (const BoundingBox& p : pair.predictions) confidences.push_back(p.confidence.value_or(0.0));
    }
    if (confidences.empty()) {
        curve.points.push_back({1.0, 1.0, 0.0});
        return curve;
    }
    std::sort(confidences.begin(), confidences.end(), std::greater<>());
    confidences.erase(std::unique(confidences.begin(), confidences.end()), confidences.end());
    curve.points.resize(confidences.size());
    parallel_for(confidences.size(), threads, [&](std::size_t i) {
        const double c = confidences[i];
        const PrecisionRecall pr = mode == MetricMode::Standard
                                       ? pr_at_threshold_standard(pairs, c, thresholds.iou)
                                       : pr_at_threshold_m2m(pairs, c, thresholds.iop, thresholds.iog);
        curve.points[i] = {c, pr.precision, pr.recall};
    });
    return curve;
}

APResult average_precision(const PRCurve& curve) {
    APResult result;
    result.mode = curve.mode;
    result.thresholds = curve.thresholds;
    std::vector<PRPoint> pts = curve.points;
    std::sort(pts.begin(), pts.end(), [](const PRPoint& a, const PRPoint& b) { return a.recall < b.recall; });
    std::vector<double> envelope(pts.size());
    double best = 0.0;
    for (std::size_t i = pts.size(); i-- > 0;) {
        best = std::max(best, pts[i].precision);
        envelope[i] = best;
    }
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        ap += (pts[i].recall - prev_recall) * envelope[i];
        prev_recall = pts[i].recall;
    }
    result.ap = std::clamp(ap, 0.0, 1.0);
    return result;
}

std::vector<Prediction> parse_predictions(std::istream& in, const std::string& source) {
    std::vector<Prediction> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        Prediction p;
        double conf, x0, y0, x1, y1;
        if (!(ls >> p.image_id >> p.label >> conf >> x0 >> y0 >> x1 >> y1)) {
            throw ParseError(source, line_no, "expected 'image-id class confidence xmin ymin xmax ymax'");
        }
        std::string extra;
        if (ls >> extra) throw ParseError(source, line_no, "unexpected trailing field '" + extra + "'");
        if (!(conf >= 0.0 && conf <= 1.0)) throw ParseError(source, line_no, "confidence must be in [0, 1]");
        for (double v : {x0, y0, x1, y1}) {
            if (!std::isfinite(v) || std::fabs(v) > 1e9) throw ParseError(source, line_no, "coordinate out of range");
        }
        p.box.xmin = static_cast<int>(std::floor(x0));
        p.box.ymin = static_cast<int>(std::floor(y0));
        p.box.xmax = static_cast<int>(std::ceil(x1));
        p.box.ymax = static_cast<int>(std::ceil(y1));
        if (p.box.xmax <= p.box.xmin || p.box.ymax <= p.box.ymin) {
            throw ParseError(source, line_no, "box has non-positive extent");
        }
        p.box.label = p.label;
        p.box.confidence = conf;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read predictions file '" + path.string() + "'");
    return parse_predictions(in, path.string());
}

std::vector<EvaluationPair> build_pairs(const std::vector<ImageAnnotation>& ground_truth,
                                        const std::vector<Prediction>& predictions) {
    std::vector<EvaluationPair> pairs;
    std::map<std::string, std::size_t> index;
    constexpr std::size_t kAmbiguous = static_cast<std::size_t>(-1);
    for (const ImageAnnotation& a : ground_truth) {
        EvaluationPair pair;
        pair.image_id = a.filename;
        pair.width = a.width;
        pair.height = a.height;
        pair.ground_truth = a.boxes;
        for (BoundingBox& b : pair.ground_truth) b.confidence.reset();
        const std::size_t at = pairs.size();
        pairs.push_back(std::move(pair));
        std::filesystem::path bare(a.filename);
        bare.replace_extension();
        for (const std::string& key : {a.filename, bare.generic_string()}) {
            const auto [it, inserted] = index.emplace(key, at);
            if (!inserted && it->second != at) it->second = kAmbiguous;
        }
    }
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const Prediction& p = predictions[i];
        const auto it = index.find(p.image_id);
        if (it == index.end()) {
            throw ValidationError("prediction " + std::to_string(i) + " names unknown image '" + p.image_id + "'");
        }
        if (it->second == kAmbiguous) {
            throw ValidationError("prediction " + std::to_string(i) + ": image id '" + p.image_id + "' is ambiguous");
        }
        EvaluationPair& pair = pairs[it->second];
        BoundingBox b = p.box;
        b.xmin = std::max(0, b.xmin);
        b.ymin = std::max(0, b.ymin);
        b.xmax = std::min(pair.width, b.xmax);
        b.ymax = std::min(pair.height, b.ymax);
        if (b.xmax <= b.xmin || b.ymax <= b.ymin) continue;  // entirely outside the frame
        pair.predictions.push_back(b);
    }
    for (const EvaluationPair& pair : pairs) pair.validate();
    return pairs;
}

void write_report(std::ostream& out, const PRCurve& curve, const APResult& ap) {
    char buf[160];
    out << "mode: " << to_string(curve.mode) << '\n';
    if (curve.mode == MetricMode::Standard) {
        std::snprintf(buf, sizeof buf, "iou_threshold: %.6g\n", curve.thresholds.iou);
    } else {
        std::snprintf(buf, sizeof buf, "iop_threshold: %.6g\niog_threshold: %.6g\n", curve.thresholds.iop,
                      curve.thresholds.iog);
    }
    out << buf;
    std::snprintf(buf, sizeof buf, "ap: %.6f\n", ap.ap);
    out << buf;
    out << "points: " << curve.points.size() << '\n';
    out << "confidence precision recall\n";
    for (const PRPoint& p : curve.points) {
        std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f\n", p.confidence, p.precision, p.recall);
        out << buf;
    }
}

namespace {

void draw_line(RgbImage& img, double x0, double y0, double x1, double y1, Rgb c) {
    const int steps = static_cast<int>(std::ceil(std::max(std::fabs(x1 - x0), std::fabs(y1 - y0)))) + 1;
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
        const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
        if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) img.set(x, y, c);
    }
}

}  // namespace

RgbImage plot_pr_curve(const PRCurve& curve, int width, int height) {
    if (width < 32 || height < 32) throw ValidationError("plot must be at least 32x32 pixels");
    RgbImage img(width, height, {255, 255, 255});
    const int margin = 16;
    const double x0 = margin, y0 = height - margin, x1 = width - margin, y1 = margin;
    const Rgb axis{0, 0, 0}, grid{220, 220, 220}, line{200, 30, 30};
    for (int k = 1; k < 10; ++k) {
        const double gx = x0 + (x1 - x0) * k / 10.0, gy = y0 + (y1 - y0) * k / 10.0;
        draw_line(img, gx, y0, gx, y1, grid);
        draw_line(img, x0, gy, x1, gy, grid);
    }
    draw_line(img, x0, y0, x1, y0, axis);
    draw_line(img, x0, y0, x0, y1, axis);
    std::vector<PRPoint> pts = curve.points;
    std::stable_sort(pts.begin(), pts.end(), [](const PRPoint& a, const PRPoint& b) { return a.recall < b.recall; });
    auto px = [&](const PRPoint& p) { return std::pair{x0 + p.recall * (x1 - x0), y0 + p.precision * (y1 - y0)}; };
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const auto [ax, ay] = px(pts[i]);
        const auto [bx, by] = px(pts[i + 1]);
        draw_line(img, ax, ay, bx, by, line);
    }
    for (const PRPoint& p : pts) {
        const auto [cx, cy] = px(p);
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) draw_line(img, cx + dx, cy + dy, cx + dx, cy + dy, line);
        }
    }
    return img;
}

}  // namespace crackgen
