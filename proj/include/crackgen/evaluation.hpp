#pragma once

#include "crackgen/labeling.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace crackgen {

/// Exact area ratio num / den. A zero denominator reads as 0.
struct AreaRatio {
    long long num = 0;
    long long den = 1;

    double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
    /// num / den >= t, decided without rounding the quotient.
    bool at_least(double t) const;
    friend bool operator==(const AreaRatio& a, const AreaRatio& b) {
        return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
    }
};

long long intersection_area(const BoundingBox& a, const BoundingBox& b);
/// Area covered by at least one box.
long long union_area(const std::vector<BoundingBox>& boxes);

AreaRatio iou_ratio(const BoundingBox& a, const BoundingBox& b);
/// area(pb ∩ union(gtbs)) / area(pb)
AreaRatio iop_ratio(const BoundingBox& pb, const std::vector<BoundingBox>& gtbs);
/// area(gtb ∩ union(pbs)) / area(gtb)
AreaRatio iog_ratio(const BoundingBox& gtb, const std::vector<BoundingBox>& pbs);

inline double iou(const BoundingBox& a, const BoundingBox& b) { return iou_ratio(a, b).value(); }
inline double iop(const BoundingBox& pb, const std::vector<BoundingBox>& gtbs) { return iop_ratio(pb, gtbs).value(); }
inline double iog(const BoundingBox& gtb, const std::vector<BoundingBox>& pbs) { return iog_ratio(gtb, pbs).value(); }

/// Ground truth and predictions for one image. Predictions carry a confidence.
struct EvaluationPair {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<BoundingBox> ground_truth;
    std::vector<BoundingBox> predictions;

    void validate() const;
};

struct PrecisionRecall {
    double precision = 1.0;
    double recall = 1.0;
    std::size_t true_positives = 0;   // PBs counted as correct
    std::size_t predictions = 0;      // PBs above the confidence threshold
    std::size_t recalled = 0;         // GTBs counted as found
    std::size_t ground_truths = 0;
};

PrecisionRecall pr_at_threshold_m2m(const std::vector<EvaluationPair>& pairs, double confidence_threshold,
                                    double iop_threshold, double iog_threshold);

/// Greedy one-to-one matching in descending confidence. Ties in confidence
/// keep input order; ties in IoU go to the lower GTB index.
PrecisionRecall pr_at_threshold_standard(const std::vector<EvaluationPair>& pairs, double confidence_threshold,
                                         double iou_threshold);

enum class MetricMode { Standard, ManyToMany };
std::string to_string(MetricMode mode);
MetricMode metric_mode_from_string(const std::string& name);

struct MetricThresholds {
    double iou = 0.5;
    double iop = 0.5;
    double iog = 0.5;
};

struct PRPoint {
    double confidence = 0.0;
    double precision = 1.0;
    double recall = 0.0;
    friend bool operator==(const PRPoint&, const PRPoint&) = default;
};

struct PRCurve {
    MetricMode mode = MetricMode::Standard;
    MetricThresholds thresholds;
    std::vector<PRPoint> points;  // confidence descending
};

PRCurve pr_curve(const std::vector<EvaluationPair>& pairs, MetricMode mode, const MetricThresholds& thresholds,
                 unsigned threads = 1);

struct APResult {
    double ap = 0.0;
    MetricMode mode = MetricMode::Standard;
    MetricThresholds thresholds;
};

/// All-points interpolation: precision is replaced by its maximum over every
/// point of equal or higher recall, then integrated over recall from 0 to the
/// largest recall on the curve.
APResult average_precision(const PRCurve& curve);

/// One prediction read from a text file.
struct Prediction {
    std::string image_id;
    std::string label;
    BoundingBox box;  // confidence set
};

/// Whitespace separated "image-id class confidence xmin ymin xmax ymax" per
/// line. Blank lines and lines starting with '#' are skipped. Fractional
/// coordinates are widened to whole pixels.
std::vector<Prediction> read_predictions(const std::filesystem::path& path);
std::vector<Prediction> parse_predictions(std::istream& in, const std::string& source);

/// Pairs every ground-truth annotation with the predictions whose image id
/// equals its filename, with or without extension. Prediction boxes are
/// clipped to the image. Predictions naming an unknown or ambiguous image
/// raise ValidationError.
std::vector<EvaluationPair> build_pairs(const std::vector<ImageAnnotation>& ground_truth,
                                        const std::vector<Prediction>& predictions);

void write_report(std::ostream& out, const PRCurve& curve, const APResult& ap);

/// Line plot of precision over recall on a white canvas.
RgbImage plot_pr_curve(const PRCurve& curve, int width = 480, int height = 360);

}  // namespace crackgen
