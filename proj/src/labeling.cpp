#include "crackgen/labeling.hpp"

#include "crackgen/core.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace crackgen {

namespace pt = boost::property_tree;

void ImageAnnotation::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("annotation '" + filename + "': image size must be positive");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (!boxes[i].valid_for(width, height)) {
            const BoundingBox& b = boxes[i];
            throw ValidationError("annotation '" + filename + "': object " + std::to_string(i) + " box (" +
                                  std::to_string(b.xmin) + "," + std::to_string(b.ymin) + "," + std::to_string(b.xmax) +
                                  "," + std::to_string(b.ymax) + ") is outside " + std::to_string(width) + "x" +
                                  std::to_string(height) + " or empty");
        }
    }
}

namespace {

int box_gap(const BoundingBox& a, const BoundingBox& b) {
    const int gx = std::max(0, std::max(a.xmin, b.xmin) - std::min(a.xmax, b.xmax));
    const int gy = std::max(0, std::max(a.ymin, b.ymin) - std::min(a.ymax, b.ymax));
    return std::max(gx, gy);
}

BoundingBox box_union(const BoundingBox& a, const BoundingBox& b) {
    BoundingBox u = a;
    u.xmin = std::min(a.xmin, b.xmin);
    u.ymin = std::min(a.ymin, b.ymin);
    u.xmax = std::max(a.xmax, b.xmax);
    u.ymax = std::max(a.ymax, b.ymax);
    return u;
}

}  // namespace

std::vector<BoundingBox> mask_to_boxes(const IdBuffer& ids, int merge_distance) {
    const int W = ids.width, H = ids.height;
    std::vector<int> label(ids.ids.size(), -1);
    std::map<std::uint32_t, std::vector<BoundingBox>> per_id;
    std::vector<int> stack;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const std::size_t start = static_cast<std::size_t>(y) * W + x;
            const std::uint32_t id = ids.ids[start];
            if (id == 0 || label[start] >= 0) continue;
            BoundingBox box;
            box.xmin = x;
            box.ymin = y;
            box.xmax = x + 1;
            box.ymax = y + 1;
            label[start] = 1;
            stack.assign(1, static_cast<int>(start));
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                const int px = p % W, py = p / W;
                box.xmin = std::min(box.xmin, px);
                box.xmax = std::max(box.xmax, px + 1);
                box.ymin = std::min(box.ymin, py);
                box.ymax = std::max(box.ymax, py + 1);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = px + dx, ny = py + dy;
                        if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
                        const std::size_t q = static_cast<std::size_t>(ny) * W + nx;
                        if (label[q] >= 0 || ids.ids[q] != id) continue;
                        label[q] = 1;
                        stack.push_back(static_cast<int>(q));
                    }
                }
            }
            per_id[id].push_back(box);
        }
    }

    std::vector<BoundingBox> out;
    for (auto& [id, boxes] : per_id) {
        // Merge until no two group boxes are within reach of each other.
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t i = 0; i < boxes.size() && !changed; ++i) {
                for (std::size_t j = i + 1; j < boxes.size(); ++j) {
                    if (box_gap(boxes[i], boxes[j]) <= merge_distance) {
                        boxes[i] = box_union(boxes[i], boxes[j]);
                        boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
                        changed = true;
                        break;
                    }
                }
            }
        }
        std::sort(boxes.begin(), boxes.end(), [](const BoundingBox& a, const BoundingBox& b) {
            return std::tie(a.ymin, a.xmin, a.ymax, a.xmax) < std::tie(b.ymin, b.xmin, b.ymax, b.xmax);
        });
        out.insert(out.end(), boxes.begin(), boxes.end());
    }
    return out;
}

ImageAnnotation expand_boxes(const ImageAnnotation& annotation, int n) {
    if (n < 0) throw ValidationError("box expansion must be >= 0");
    ImageAnnotation out = annotation;
    for (BoundingBox& b : out.boxes) {
        b.xmin = std::max(0, b.xmin - n);
        b.ymin = std::max(0, b.ymin - n);
        b.xmax = std::min(annotation.width, b.xmax + n);
        b.ymax = std::min(annotation.height, b.ymax + n);
    }
    return out;
}

std::string voc_xml_string(const ImageAnnotation& a) {
    a.validate();
    pt::ptree tree;
    pt::ptree& root = tree.add("annotation", "");
    root.add("folder", a.folder);
    root.add("filename", a.filename);
    root.add("size.width", a.width);
    root.add("size.height", a.height);
    root.add("size.depth", a.depth);
    root.add("segmented", 0);
    for (const BoundingBox& b : a.boxes) {
        pt::ptree& obj = root.add("object", "");
        obj.add("name", b.label);
        obj.add("pose", "Unspecified");
        obj.add("truncated", 0);
        obj.add("difficult", 0);
        obj.add("bndbox.xmin", b.xmin + 1);
        obj.add("bndbox.ymin", b.ymin + 1);
        obj.add("bndbox.xmax", b.xmax);
        obj.add("bndbox.ymax", b.ymax);
    }
    std::ostringstream os;
    pt::write_xml(os, tree, pt::xml_writer_make_settings<std::string>(' ', 2));
    return os.str();
}

void write_voc_xml(const ImageAnnotation& annotation, const std::filesystem::path& path) {
    const std::string xml = voc_xml_string(annotation);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write annotation file '" + path.string() + "'");
    out << xml;
    out.flush();
    if (!out) throw Error("failed writing annotation file '" + path.string() + "'");
}

ImageAnnotation read_voc_xml(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read annotation file '" + path.string() + "'");
    pt::ptree tree;
    try {
        pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError(path.string(), e.line(), "malformed XML: " + e.message());
    }
    const auto root = tree.get_child_optional("annotation");
    if (!root) throw ValidationError(path.string() + ": missing <annotation> root");
    ImageAnnotation a;
    a.folder = root->get<std::string>("folder", "");
    a.filename = root->get<std::string>("filename", "");
    const auto width = root->get_optional<int>("size.width");
    const auto height = root->get_optional<int>("size.height");
    if (!width || !height) throw ValidationError(path.string() + ": missing or invalid <size> width/height");
    a.width = *width;
    a.height = *height;
    a.depth = root->get<int>("size.depth", 3);
    std::size_t index = 0;
    for (const auto& [key, node] : *root) {
        if (key != "object") continue;
        const std::string where = path.string() + ": object " + std::to_string(index);
        BoundingBox b;
        b.label = node.get<std::string>("name", "crack");
        const auto xmin = node.get_optional<int>("bndbox.xmin");
        const auto ymin = node.get_optional<int>("bndbox.ymin");
        const auto xmax = node.get_optional<int>("bndbox.xmax");
        const auto ymax = node.get_optional<int>("bndbox.ymax");
        if (!xmin || !ymin || !xmax || !ymax) throw ValidationError(where + ": missing or non-integer bndbox coordinate");
        b.xmin = *xmin - 1;
        b.ymin = *ymin - 1;
        b.xmax = *xmax;
        b.ymax = *ymax;
        if (b.xmax <= b.xmin) throw ValidationError(where + ": xmax <= xmin");
        if (b.ymax <= b.ymin) throw ValidationError(where + ": ymax <= ymin");
        if (!b.valid_for(a.width, a.height)) throw ValidationError(where + ": box lies outside the image");
        a.boxes.push_back(b);
        ++index;
    }
    if (a.width <= 0 || a.height <= 0) throw ValidationError(path.string() + ": image size must be positive");
    return a;
}

RgbImage render_debug_overlay(const RgbImage& image, const ImageAnnotation& annotation, Rgb color) {
    if (image.width() != annotation.width || image.height() != annotation.height) {
        throw ValidationError("overlay: image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                              " but annotation is " + std::to_string(annotation.width) + "x" +
                              std::to_string(annotation.height));
    }
    RgbImage out = image;
    for (const BoundingBox& b : annotation.boxes) {
        const int x0 = std::max(0, b.xmin), y0 = std::max(0, b.ymin);
        const int x1 = std::min(image.width(), b.xmax) - 1, y1 = std::min(image.height(), b.ymax) - 1;
        if (x0 > x1 || y0 > y1) continue;
        for (int x = x0; x <= x1; ++x) {
            out.set(x, y0, color);
            out.set(x, y1, color);
        }
        for (int y = y0; y <= y1; ++y) {
            out.set(x0, y, color);
            out.set(x1, y, color);
        }
    }
    return out;
}

}  // namespace crackgen
