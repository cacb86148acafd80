#include "crackgen/crack.hpp"
#include "crackgen/random.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>

namespace crackgen {

namespace {

void check_range(const ParamRange& r, const std::string& context, const char* name, double lo, double hi) {
    const std::string key = context + "." + name;
    if (!std::isfinite(r.min) || !std::isfinite(r.max)) throw ValidationError(key + ": range bounds must be finite");
    if (r.min > r.max) {
        throw ValidationError(key + ": range min " + std::to_string(r.min) + " > max " + std::to_string(r.max));
    }
    if (r.min < lo || r.max > hi) {
        throw ValidationError(key + ": range must lie within [" + std::to_string(lo) + ", " +
                              (std::isinf(hi) ? std::string("inf") : std::to_string(hi)) + "]");
    }
}

void check_probability(double p, const std::string& context, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(context + "." + name + ": probability must be in [0, 1]");
}

std::vector<double> cumulative_length(const std::vector<Vec3>& poly) {
    std::vector<double> s(poly.size(), 0.0);
    for (std::size_t i = 1; i < poly.size(); ++i) s[i] = s[i - 1] + (poly[i] - poly[i - 1]).norm();
    return s;
}

// Linear interpolation of per-vertex values at arc length `at`.
template <typename T>
T interpolate_at(const std::vector<double>& s, const std::vector<T>& values, double at) {
    if (values.size() == 1 || at <= s.front()) return values.front();
    if (at >= s.back()) return values.back();
    const auto it = std::upper_bound(s.begin(), s.end(), at);
    const std::size_t i = static_cast<std::size_t>(it - s.begin());
    const double span = s[i] - s[i - 1];
    const double t = span > 0 ? (at - s[i - 1]) / span : 0.0;
    return values[i - 1] + t * (values[i] - values[i - 1]);
}

void append_double(std::string& out, double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", v);
    out += buf;
}

}  // namespace

void CrackParamRanges::validate(const std::string& context) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    check_range(length_fraction, context, "length_fraction", 0.0, 1.0);
    check_range(roughness_low, context, "roughness_low", 0.0, inf);
    check_range(roughness_high, context, "roughness_high", 0.0, inf);
    check_range(thickness, context, "thickness", 0.0, inf);
    if (!(thickness.min > 0.0)) throw ValidationError(context + ".thickness: minimum must be > 0");
    check_range(depth, context, "depth", 0.0, inf);
    check_probability(appearance_probability, context, "appearance_probability");
    check_probability(spalling_probability, context, "spalling_probability");
}

double arc_length(const std::vector<Vec3>& polyline) {
    double total = 0.0;
    for (std::size_t i = 1; i < polyline.size(); ++i) total += (polyline[i] - polyline[i - 1]).norm();
    return total;
}

std::string serialize(const CrackInstance& inst) {
    std::string out;
    out.reserve(64 + inst.centerline.size() * 160);
    char buf[64];
    out += "annotation " + inst.annotation_id + "\n";
    std::snprintf(buf, sizeof buf, "crack_id %" PRIu32 "\nseed %016" PRIx64 "\n", inst.crack_id, inst.seed);
    out += buf;
    out += "material " + to_string(inst.material) + "\nparams";
    for (double v : {inst.params.length_fraction, inst.params.roughness_low, inst.params.roughness_high,
                     inst.params.thickness, inst.params.depth}) {
        out += ' ';
        append_double(out, v);
    }
    out += inst.params.appears ? " appears\n" : " hidden\n";
    out += "vertices " + std::to_string(inst.centerline.size()) + "\n";
    for (std::size_t i = 0; i < inst.centerline.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            append_double(out, inst.centerline[i][k]);
            out += ' ';
        }
        for (int k = 0; k < 3; ++k) {
            append_double(out, i < inst.normals.size() ? inst.normals[i][k] : 0.0);
            out += ' ';
        }
        append_double(out, i < inst.width.size() ? inst.width[i] : 0.0);
        out += ' ';
        append_double(out, i < inst.depth.size() ? inst.depth[i] : 0.0);
        out += '\n';
    }
    out += "spalling " + std::to_string(inst.spalling.size()) + "\n";
    for (const SpallingPatch& p : inst.spalling) {
        for (double v : {p.center.x(), p.center.y(), p.center.z(), p.radius, p.depth}) {
            append_double(out, v);
            out += ' ';
        }
        out += '\n';
    }
    return out;
}

SampledParameters sample_parameters(const CrackParamRanges& ranges, std::uint64_t seed) {
    Rng rng(seed);
    SampledParameters p;
    p.length_fraction = rng.uniform(ranges.length_fraction.min, ranges.length_fraction.max);
    p.roughness_low = rng.uniform(ranges.roughness_low.min, ranges.roughness_low.max);
    p.roughness_high = rng.uniform(ranges.roughness_high.min, ranges.roughness_high.max);
    p.thickness = rng.uniform(ranges.thickness.min, ranges.thickness.max);
    p.depth = rng.uniform(ranges.depth.min, ranges.depth.max);
    p.appears = rng.bernoulli(ranges.appearance_probability);
    return p;
}

Vec3 anchor_position(const TriangleMesh& mesh, const SurfaceAnchor& a) {
    const Face& f = mesh.faces.at(a.face);
    return a.barycentric[0] * mesh.vertices[f[0]] + a.barycentric[1] * mesh.vertices[f[1]] +
           a.barycentric[2] * mesh.vertices[f[2]];
}

void check_anchor(const TriangleMesh& mesh, const Component& component, const SurfaceAnchor& a,
                  const std::string& context) {
    if (a.face >= mesh.faces.size()) throw ValidationError(context + ": anchor face " + std::to_string(a.face) + " does not exist");
    if (!std::binary_search(component.faces.begin(), component.faces.end(), a.face)) {
        throw ValidationError(context + ": anchor face " + std::to_string(a.face) + " is not part of component '" +
                              component.name + "'");
    }
    const Vec3& b = a.barycentric;
    if (!b.allFinite() || (b.array() < -1e-9).any() || std::abs(b.sum() - 1.0) > 1e-9) {
        throw ValidationError(context + ": anchor barycentric weights are invalid");
    }
}

std::vector<Vec3> generate_centerline(const TriangleMesh& mesh, const Component& component,
                                      const MetaAnnotation& annotation, const SampledParameters& params,
                                      std::uint64_t seed, const CenterlineOptions& options) {
    try {
        check_anchor(mesh, component, annotation.start, "annotation '" + annotation.id + "' start");
        check_anchor(mesh, component, annotation.end, "annotation '" + annotation.id + "' end");
    } catch (const ValidationError& e) {
        throw Error(std::string("cannot project crack path: ") + e.what());
    }
    const Vec3 a = anchor_position(mesh, annotation.start);
    const Vec3 b = anchor_position(mesh, annotation.end);
    const double line_length = (b - a).norm();
    if (!(line_length > 0.0)) throw Error("annotation '" + annotation.id + "' has coincident endpoints");
    const Vec3 dir = (b - a) / line_length;

    Vec3 normal = surface_normal(mesh, {annotation.start.face, annotation.start.barycentric, a, 0.0}) +
                  surface_normal(mesh, {annotation.end.face, annotation.end.barycentric, b, 0.0});
    normal -= normal.dot(dir) * dir;
    if (normal.norm() < 1e-9) normal = dir.unitOrthogonal();
    normal.normalize();
    const Vec3 lateral = normal.cross(dir).normalized();

    Rng rng(seed);
    const double fraction = params.length_fraction;
    const double offset = rng.uniform(0.0, 1.0 - fraction);
    const Vec3 s0 = a + offset * (b - a);
    const Vec3 s1 = a + (offset + fraction) * (b - a);

    // Low band: recursive midpoint displacement on 2^levels segments.
    const int levels = 2 + static_cast<int>(rng.below(3));
    const std::size_t coarse = std::size_t{1} << levels;
    std::vector<double> low(coarse + 1, 0.0);
    double norm = 0.0;
    for (int k = 0; k < levels; ++k) norm += std::ldexp(1.0, -k);
    for (int k = 0; k < levels; ++k) {
        const double amp = params.roughness_low * std::ldexp(1.0, -k) / norm;
        const std::size_t step = coarse >> k;
        for (std::size_t l = 0; l + step <= coarse; l += step) {
            const std::size_t m = l + step / 2;
            low[m] = 0.5 * (low[l] + low[l + step]) + amp * (2.0 * rng.uniform() - 1.0);
        }
    }

    // High band: linear subdivision of each coarse segment plus interior jitter.
    const double seg_len = fraction * line_length;
    const double coarse_len = seg_len / static_cast<double>(coarse);
    const int per = std::clamp(static_cast<int>(std::ceil(coarse_len / options.fine_step)), 1,
                               options.max_fine_per_segment);
    const std::size_t fine = coarse * static_cast<std::size_t>(per);
    std::vector<Vec3> poly(fine + 1);
    for (std::size_t i = 0; i <= fine; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(fine);
        const std::size_t c = std::min(i / per, coarse - 1);
        const double local = static_cast<double>(i - c * per) / per;
        double off = low[c] + local * (low[c + 1] - low[c]);
        if (i != 0 && i != fine) off += params.roughness_high * (2.0 * rng.uniform() - 1.0);
        poly[i] = s0 + t * (s1 - s0) + off * lateral;
    }

    // Keep the path no longer than the annotation line.
    const double len = arc_length(poly);
    if (len > line_length) {
        const Vec3 mid = 0.5 * (s0 + s1);
        const double k = line_length / len;
        for (Vec3& p : poly) p = mid + k * (p - mid);
    }

    for (Vec3& p : poly) p = project_to_surface(mesh, p, component.faces).position;
    return poly;
}

CrackProfile build_profile(const std::vector<Vec3>& polyline, const SampledParameters& params) {
    CrackProfile prof;
    const std::vector<double> s = cumulative_length(polyline);
    const double total = s.empty() ? 0.0 : s.back();
    const double ramp = kTaperSpan * total;
    prof.width.resize(polyline.size());
    prof.depth.resize(polyline.size());
    for (std::size_t i = 0; i < polyline.size(); ++i) {
        double factor = kTaperResidual;
        if (ramp > 0.0) {
            const double from_end = std::min(s[i], total - s[i]);
            factor = kTaperResidual + (1.0 - kTaperResidual) * std::clamp(from_end / ramp, 0.0, 1.0);
        }
        prof.width[i] = params.thickness * factor;
        prof.depth[i] = params.depth * factor;
    }
    return prof;
}

void generate_spalling(CrackInstance& instance, std::uint64_t seed, double probability,
                       const SpallingOptions& options) {
    if (instance.centerline.size() < 2) return;
    const std::vector<double> s = cumulative_length(instance.centerline);
    const double total = s.back();
    const auto sites = static_cast<std::size_t>(std::floor(total / options.site_spacing + 1e-9));
    Rng rng(seed);
    for (std::size_t k = 0; k < sites; ++k) {
        // Every site consumes the same draws so acceptance never shifts later sites.
        const double at = (static_cast<double>(k) + rng.uniform()) * options.site_spacing;
        const bool accept = rng.bernoulli(probability);
        const double factor = rng.uniform(options.radius_min_factor, options.radius_max_factor);
        if (!accept) continue;
        const double pos = std::min(at, total);
        SpallingPatch patch;
        patch.center = interpolate_at(s, instance.centerline, pos);
        const double w = instance.width.empty() ? instance.params.thickness : interpolate_at(s, instance.width, pos);
        patch.radius = factor * w;
        patch.depth = instance.depth.empty() ? instance.params.depth : interpolate_at(s, instance.depth, pos);
        instance.spalling.push_back(patch);
    }
}

}  // namespace crackgen
