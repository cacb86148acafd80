#pragma once

#include "crackgen/image.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace crackgen {

/// Pixel box, inclusive min / exclusive max.
struct BoundingBox {
    int xmin = 0, ymin = 0, xmax = 0, ymax = 0;
    std::string label = "crack";
    std::optional<double> confidence;  // predictions only

    long long area() const { return static_cast<long long>(xmax - xmin) * (ymax - ymin); }
    bool valid_for(int width, int height) const {
        return 0 <= xmin && xmin < xmax && xmax <= width && 0 <= ymin && ymin < ymax && ymax <= height;
    }
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ImageAnnotation {
    std::string folder;
    std::string filename;
    int width = 0;
    int height = 0;
    int depth = 3;
    std::vector<BoundingBox> boxes;

    /// Throws ValidationError naming the first out-of-bounds box.
    void validate() const;
    friend bool operator==(const ImageAnnotation&, const ImageAnnotation&) = default;
};

constexpr int kDefaultMergeDistance = 5;

/// One box per group of 8-connected same-id pixels, where components of one
/// id are grouped (transitively) while their boxes are at most
/// `merge_distance` empty pixels apart on both axes. Output is sorted by
/// (id, ymin, xmin, ymax, xmax).
std::vector<BoundingBox> mask_to_boxes(const IdBuffer& ids, int merge_distance = kDefaultMergeDistance);

/// Grows every box by n on each side, clamped to the image.
ImageAnnotation expand_boxes(const ImageAnnotation& annotation, int n);

/// Pascal VOC XML. Box coordinates are written 1-based inclusive
/// (xmin + 1, ymin + 1, xmax, ymax) and converted back on read.
void write_voc_xml(const ImageAnnotation& annotation, const std::filesystem::path& path);
std::string voc_xml_string(const ImageAnnotation& annotation);
ImageAnnotation read_voc_xml(const std::filesystem::path& path);

constexpr Rgb kOverlayColor{255, 0, 0};

/// Copy of `image` with a 1-px outline along each box's border pixels.
RgbImage render_debug_overlay(const RgbImage& image, const ImageAnnotation& annotation,
                              Rgb color = kOverlayColor);

}  // namespace crackgen
