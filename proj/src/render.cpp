#include "crackgen/render.hpp"
#include "crackgen/parallel.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace crackgen {

void CameraPath::validate() const {
    if (keyframes.empty()) throw ValidationError("camera path needs at least one keyframe");
    for (std::size_t i = 0; i < keyframes.size(); ++i) {
        const CameraKeyframe& k = keyframes[i];
        if (!(k.fov_deg > 0.0 && k.fov_deg < 180.0)) {
            throw ValidationError("keyframe " + std::to_string(i) + ": fov must be in (0, 180)");
        }
        if (!k.position.allFinite() || !k.target.allFinite() || !std::isfinite(k.time)) {
            throw ValidationError("keyframe " + std::to_string(i) + ": non-finite value");
        }
        if ((k.target - k.position).norm() <= 0.0) {
            throw ValidationError("keyframe " + std::to_string(i) + ": target coincides with position");
        }
        if (i > 0 && !(k.time > keyframes[i - 1].time)) {
            throw ValidationError("keyframe " + std::to_string(i) + ": timestamps must be strictly increasing");
        }
    }
    if (!(fps > 0.0)) throw ValidationError("camera path fps must be > 0");
    if (frame_count < 1) throw ValidationError("camera path frame count must be >= 1");
}

void LightingEnvironment::validate() const {
    if (!(latitude >= -90.0 && latitude <= 90.0)) throw ValidationError("lighting latitude must be in [-90, 90]");
    if (!(longitude >= -180.0 && longitude <= 180.0)) throw ValidationError("lighting longitude must be in [-180, 180]");
    if (!(ambient >= 0.0 && ambient <= 1.0)) throw ValidationError("lighting ambient must be in [0, 1]");
    if (!(overcast >= 0.0 && overcast <= 1.0)) throw ValidationError("lighting overcast must be in [0, 1]");
}

CameraPose interpolate_camera(const CameraPath& path, int frame_index) {
    if (frame_index < 0 || frame_index >= path.frame_count) {
        throw Error("frame index " + std::to_string(frame_index) + " outside [0, " + std::to_string(path.frame_count) + ")");
    }
    const auto& keys = path.keyframes;
    if (keys.empty()) throw Error("camera path has no keyframes");
    const double t = keys.front().time + frame_index / path.fps;
    auto pose_of = [](const CameraKeyframe& k) { return CameraPose{k.position, k.target, k.fov_deg}; };
    if (t <= keys.front().time) return pose_of(keys.front());
    if (t >= keys.back().time) return pose_of(keys.back());
    const auto it = std::upper_bound(keys.begin(), keys.end(), t, [](double v, const CameraKeyframe& k) { return v < k.time; });
    const CameraKeyframe& b = *it;
    const CameraKeyframe& a = *(it - 1);
    if (t == a.time) return pose_of(a);
    const double u = (t - a.time) / (b.time - a.time);
    return {a.position + u * (b.position - a.position), a.target + u * (b.target - a.target),
            a.fov_deg + u * (b.fov_deg - a.fov_deg)};
}

namespace {

struct CamVertex {
    Vec3 cam;  // camera space: x right, y up, z forward
    Vec3 normal;
    Vec2 uv;
};

CamVertex lerp(const CamVertex& a, const CamVertex& b, double t) {
    return {a.cam + t * (b.cam - a.cam), a.normal + t * (b.normal - a.normal),
            a.uv + t * (b.uv - a.uv)};
}

}  // namespace

RenderedFrame render_frame(const TriangleMesh& mesh, const CameraPose& pose, const LightingEnvironment& lighting,
                           Resolution res, const RenderSettings& settings) {
    if (res.width <= 0 || res.height <= 0) throw Error("render: viewport has zero area");
    const int W = res.width, H = res.height;

    RenderedFrame frame;
    frame.pose = pose;
    frame.color = RgbImage(W, H, settings.background);
    frame.ids = IdBuffer(W, H);

    const Vec3 forward = (pose.target - pose.position).normalized();
    Vec3 up_ref = Vec3::UnitZ();
    if (forward.cross(up_ref).norm() < 1e-9) up_ref = Vec3::UnitY();
    const Vec3 right = forward.cross(up_ref).normalized();
    const Vec3 up = right.cross(forward);
    const double focal = 0.5 * H / std::tan(0.5 * pose.fov_deg * std::numbers::pi / 180.0);
    const double cx = 0.5 * W, cy = 0.5 * H;

    const SolarPosition sun = sun_direction(lighting.latitude, lighting.longitude, lighting.when);
    const Vec3 sun_dir = sun.direction();
    const bool sun_up = sun.elevation_deg > 0.0;
    const double sky = lighting.overcast * settings.diffuse_sky;

    const bool has_normals = mesh.normals.size() == mesh.vertices.size();
    const bool has_uvs = mesh.uvs.size() == mesh.vertices.size();
    std::vector<Vec3> cam(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3 d = mesh.vertices[i] - pose.position;
        cam[i] = Vec3(d.dot(right), d.dot(up), d.dot(forward));
    }

    std::vector<double> depth(static_cast<std::size_t>(W) * H, std::numeric_limits<double>::infinity());
    const double near = settings.near_plane;

    CamVertex poly[4];
    CamVertex clipped[5];
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        if (cam[t[0]].z() < near && cam[t[1]].z() < near && cam[t[2]].z() < near) continue;
        const Vec3 face_n = mesh.face_cross(f);
        if (face_n.squaredNorm() == 0.0) continue;
        // Shade the side facing the camera.
        const bool flip = face_n.dot(mesh.face_centroid(f) - pose.position) > 0.0;

        for (int k = 0; k < 3; ++k) {
            const std::uint32_t v = t[k];
            poly[k] = {cam[v], has_normals ? mesh.normals[v] : Vec3(face_n.normalized()),
                       has_uvs ? mesh.uvs[v] : Vec2::Zero()};
        }
        // Sutherland-Hodgman against the near plane.
        int count = 0;
        for (int k = 0; k < 3; ++k) {
            const CamVertex& a = poly[k];
            const CamVertex& b = poly[(k + 1) % 3];
            const bool ain = a.cam.z() >= near, bin = b.cam.z() >= near;
            if (ain) clipped[count++] = a;
            if (ain != bin) clipped[count++] = lerp(a, b, (near - a.cam.z()) / (b.cam.z() - a.cam.z()));
        }
        if (count < 3) continue;

        const Texture& tex = mesh.textures[mesh.face_texture.empty() ? 0 : mesh.face_texture[f]];
        const std::uint32_t crack = mesh.face_crack.empty() ? 0 : mesh.face_crack[f];

        for (int fan = 1; fan + 1 < count; ++fan) {
            const CamVertex* tri[3] = {&clipped[0], &clipped[fan], &clipped[fan + 1]};
            double sx[3], sy[3], iz[3];
            for (int k = 0; k < 3; ++k) {
                iz[k] = 1.0 / tri[k]->cam.z();
                sx[k] = cx + focal * tri[k]->cam.x() * iz[k];
                sy[k] = cy - focal * tri[k]->cam.y() * iz[k];
            }
            double area = (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sx[2] - sx[0]) * (sy[1] - sy[0]);
            if (area == 0.0 || !std::isfinite(area)) continue;
            // Orient counter-clockwise in pixel space so edge functions are positive inside.
            int o1 = 1, o2 = 2;
            if (area < 0) {
                std::swap(o1, o2);
                area = -area;
            }
            const int idx[3] = {0, o1, o2};
            const double X[3] = {sx[idx[0]], sx[idx[1]], sx[idx[2]]};
            const double Y[3] = {sy[idx[0]], sy[idx[1]], sy[idx[2]]};

            auto to_px = [](double v, int limit) { return static_cast<int>(std::clamp(v, -1.0, static_cast<double>(limit))); };
            const int x0 = std::max(0, to_px(std::floor(std::min({X[0], X[1], X[2]})), W));
            const int x1 = std::min(W - 1, to_px(std::ceil(std::max({X[0], X[1], X[2]})), W));
            const int y0 = std::max(0, to_px(std::floor(std::min({Y[0], Y[1], Y[2]})), H));
            const int y1 = std::min(H - 1, to_px(std::ceil(std::max({Y[0], Y[1], Y[2]})), H));
            if (x0 > x1 || y0 > y1) continue;

            // Top-left rule: an edge owns its pixels if it is a left or top edge.
            bool owns[3];
            for (int e = 0; e < 3; ++e) {
                const double dx = X[(e + 1) % 3] - X[e];
                const double dy = Y[(e + 1) % 3] - Y[e];
                owns[e] = (dy < 0) || (dy == 0 && dx > 0);
            }
            for (int py = y0; py <= y1; ++py) {
                const double yc = py + 0.5;
                for (int px = x0; px <= x1; ++px) {
                    const double xc = px + 0.5;
                    double w[3];
                    bool inside = true;
                    for (int e = 0; e < 3; ++e) {
                        const int a = (e + 1) % 3, b = (e + 2) % 3;
                        // Weight of vertex e = edge function of the opposite edge (a, b).
                        const double ef = (X[b] - X[a]) * (yc - Y[a]) - (Y[b] - Y[a]) * (xc - X[a]);
                        if (ef < 0 || (ef == 0 && !owns[a])) {
                            inside = false;
                            break;
                        }
                        w[e] = ef / area;
                    }
                    if (!inside) continue;
                    // Perspective-correct weights.
                    double pw[3], inv = 0.0;
                    for (int e = 0; e < 3; ++e) {
                        pw[e] = w[e] * iz[idx[e]];
                        inv += pw[e];
                    }
                    const double z = 1.0 / inv;
                    const std::size_t pix = static_cast<std::size_t>(py) * W + px;
                    if (!(z < depth[pix])) continue;
                    depth[pix] = z;
                    Vec3 n = Vec3::Zero();
                    Vec2 uv = Vec2::Zero();
                    for (int e = 0; e < 3; ++e) {
                        const double c = pw[e] * z;
                        n += c * tri[idx[e]]->normal;
                        uv += c * tri[idx[e]]->uv;
                    }
                    n = n.norm() > 1e-12 ? Vec3(n.normalized()) : Vec3(face_n.normalized());
                    if (flip) n = -n;
                    double intensity = lighting.ambient + sky;
                    if (sun_up) intensity += std::max(0.0, n.dot(sun_dir)) * (1.0 - lighting.overcast);
                    intensity = std::clamp(intensity, 0.0, 1.0);
                    const Rgb base = tex.sample(uv.x(), uv.y());
                    auto q = [&](std::uint8_t c) {
                        return static_cast<std::uint8_t>(std::lround(c * intensity));
                    };
                    frame.color.set(px, py, {q(base.r), q(base.g), q(base.b)});
                    frame.ids.at(px, py) = crack;
                }
            }
        }
    }
    return frame;
}

std::vector<RenderedFrame> render_flight(const TriangleMesh& mesh, const CameraPath& path,
                                         const LightingEnvironment& lighting, Resolution resolution, unsigned threads,
                                         const RenderSettings& settings) {
    path.validate();
    std::vector<RenderedFrame> frames(static_cast<std::size_t>(path.frame_count));
    parallel_for(frames.size(), threads, [&](std::size_t i) {
        frames[i] = render_frame(mesh, interpolate_camera(path, static_cast<int>(i)), lighting, resolution, settings);
        frames[i].frame_index = static_cast<int>(i);
    });
    return frames;
}

}  // namespace crackgen
