#include "crackgen/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace crackgen {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : days[m - 1];
}

double wrap360(double x) {
    x = std::fmod(x, 360.0);
    return x < 0 ? x + 360.0 : x;
}

}  // namespace

UtcDateTime UtcDateTime::parse(const std::string& text) {
    UtcDateTime t;
    int consumed = 0;
    const int n = std::sscanf(text.c_str(), "%d-%d-%dT%d:%d%n", &t.year, &t.month, &t.day, &t.hour, &t.minute, &consumed);
    if (n < 5) throw ValidationError("invalid UTC datetime '" + text + "' (expected YYYY-MM-DDTHH:MM[:SS]Z)");
    std::string rest = text.substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest[0] == ':') {
        char* end = nullptr;
        t.second = std::strtod(rest.c_str() + 1, &end);
        rest = end;
    }
    if (!(rest.empty() || rest == "Z")) throw ValidationError("invalid UTC datetime '" + text + "': only UTC ('Z') is accepted");
    if (t.month < 1 || t.month > 12 || t.day < 1 || t.day > days_in_month(t.year, t.month) || t.hour < 0 ||
        t.hour > 23 || t.minute < 0 || t.minute > 59 || !(t.second >= 0.0 && t.second < 61.0)) {
        throw ValidationError("invalid UTC datetime '" + text + "': field out of range");
    }
    return t;
}

std::string UtcDateTime::to_string() const {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%06.3fZ", year, month, day, hour, minute, second);
    return buf;
}

double UtcDateTime::julian_day() const {
    // Meeus, Astronomical Algorithms ch. 7 (Gregorian calendar).
    int y = year, m = month;
    if (m <= 2) {
        y -= 1;
        m += 12;
    }
    const int a = y / 100;
    const int b = 2 - a + a / 4;
    const double day_fraction = (hour + minute / 60.0 + second / 3600.0) / 24.0;
    return std::floor(365.25 * (y + 4716)) + std::floor(30.6001 * (m + 1)) + day + day_fraction + b - 1524.5;
}

Vec3 SolarPosition::direction() const {
    const double az = azimuth_deg * kDeg, el = elevation_deg * kDeg;
    return {std::sin(az) * std::cos(el), std::cos(az) * std::cos(el), std::sin(el)};
}

SolarPosition sun_direction(double latitude_deg, double longitude_deg, const UtcDateTime& when) {
    const double jd = when.julian_day();
    const double t = (jd - 2451545.0) / 36525.0;

    const double l0 = wrap360(280.46646 + t * (36000.76983 + t * 0.0003032));
    const double m = 357.52911 + t * (35999.05029 - 0.0001537 * t);
    const double e = 0.016708634 - t * (0.000042037 + 0.0000001267 * t);
    const double c = std::sin(m * kDeg) * (1.914602 - t * (0.004817 + 0.000014 * t)) +
                     std::sin(2 * m * kDeg) * (0.019993 - 0.000101 * t) + std::sin(3 * m * kDeg) * 0.000289;
    const double true_long = l0 + c;
    const double omega = 125.04 - 1934.136 * t;
    const double lambda = true_long - 0.00569 - 0.00478 * std::sin(omega * kDeg);
    const double eps0 = 23.0 + (26.0 + (21.448 - t * (46.815 + t * (0.00059 - t * 0.001813))) / 60.0) / 60.0;
    const double eps = eps0 + 0.00256 * std::cos(omega * kDeg);
    const double decl = std::asin(std::sin(eps * kDeg) * std::sin(lambda * kDeg));

    const double y = std::pow(std::tan(eps * kDeg / 2), 2);
    const double eq_time = 4.0 / kDeg *
                           (y * std::sin(2 * l0 * kDeg) - 2 * e * std::sin(m * kDeg) +
                            4 * e * y * std::sin(m * kDeg) * std::cos(2 * l0 * kDeg) -
                            0.5 * y * y * std::sin(4 * l0 * kDeg) - 1.25 * e * e * std::sin(2 * m * kDeg));

    const double minutes = when.hour * 60.0 + when.minute + when.second / 60.0;
    const double true_solar = std::fmod(minutes + eq_time + 4.0 * longitude_deg + 1440.0 * 4, 1440.0);
    double hour_angle = true_solar / 4.0 - 180.0;

    const double lat = latitude_deg * kDeg;
    const double ha = hour_angle * kDeg;
    double cos_zen = std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(ha);
    cos_zen = std::clamp(cos_zen, -1.0, 1.0);
    const double zenith = std::acos(cos_zen);

    double azimuth = std::atan2(std::sin(ha), std::cos(ha) * std::sin(lat) - std::tan(decl) * std::cos(lat)) / kDeg + 180.0;
    azimuth = wrap360(azimuth);

    const double elev = 90.0 - zenith / kDeg;
    double refraction = 0.0;
    if (elev <= 85.0) {
        const double te = std::tan(elev * kDeg);
        if (elev > 5.0) {
            refraction = 58.1 / te - 0.07 / std::pow(te, 3) + 0.000086 / std::pow(te, 5);
        } else if (elev > -0.575) {
            refraction = 1735.0 + elev * (-518.2 + elev * (103.4 + elev * (-12.79 + elev * 0.711)));
        } else {
            refraction = -20.774 / te;
        }
        refraction /= 3600.0;
    }
    return {azimuth, elev + refraction};
}

}  // namespace crackgen
