#pragma once

#include "crackgen/geometry.hpp"
#include "crackgen/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace crackgen {

/// Calendar date and time in UTC.
struct UtcDateTime {
    int year = 2000;
    int month = 1;
    int day = 1;
    int hour = 12;
    int minute = 0;
    double second = 0.0;

    /// Accepts "YYYY-MM-DDTHH:MM[:SS[.fff]]" with optional trailing "Z".
    static UtcDateTime parse(const std::string& text);
    std::string to_string() const;
    double julian_day() const;
};

struct SolarPosition {
    double azimuth_deg = 0.0;    // clockwise from north
    double elevation_deg = 0.0;  // apparent, refraction-corrected
    /// World direction toward the sun: +X east, +Y north, +Z up.
    Vec3 direction() const;
};

/// NOAA solar-position equations (Meeus-based), with the NOAA atmospheric
/// refraction correction.
SolarPosition sun_direction(double latitude_deg, double longitude_deg, const UtcDateTime& when);

struct CameraKeyframe {
    Vec3 position = Vec3::Zero();
    Vec3 target = Vec3::UnitY();
    double fov_deg = 50.0;  // vertical
    double time = 0.0;      // seconds
};

struct CameraPath {
    std::vector<CameraKeyframe> keyframes;
    double fps = 10.0;
    int frame_count = 1;

    void validate() const;
};

struct CameraPose {
    Vec3 position = Vec3::Zero();
    Vec3 target = Vec3::UnitY();
    double fov_deg = 50.0;
    friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

/// Pose at time keyframes[0].time + index / fps, linearly interpolated between
/// the bracketing keyframes and held constant past either end.
CameraPose interpolate_camera(const CameraPath& path, int frame_index);

struct LightingEnvironment {
    double latitude = 0.0;
    double longitude = 0.0;
    UtcDateTime when;
    double ambient = 0.3;
    double overcast = 0.0;

    void validate() const;
};

struct Resolution {
    int width = 640;
    int height = 480;
};

struct RenderSettings {
    Rgb background{150, 180, 215};
    double diffuse_sky = 0.6;  // uniform term under full overcast
    double near_plane = 0.01;
};

struct RenderedFrame {
    RgbImage color;
    IdBuffer ids;
    CameraPose pose;
    int frame_index = 0;
};

/// Depth-buffered perspective rasterisation. World up is +Z.
///
/// Intensity = ambient + max(0, n.sun) * (1 - overcast) + overcast * diffuse_sky,
/// clamped to [0, 1] and multiplied by the texture sample. The direct term is
/// dropped while the sun is below the horizon. Pixels whose nearest surface is
/// a crack-tagged face get that crack id.
RenderedFrame render_frame(const TriangleMesh& mesh, const CameraPose& pose, const LightingEnvironment& lighting,
                           Resolution resolution, const RenderSettings& settings = {});

/// path.frame_count frames in index order; frames render on up to `threads`
/// workers with results identical to a serial run.
std::vector<RenderedFrame> render_flight(const TriangleMesh& mesh, const CameraPath& path,
                                         const LightingEnvironment& lighting, Resolution resolution,
                                         unsigned threads = 1, const RenderSettings& settings = {});

}  // namespace crackgen
