#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace crackgen {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input that violates a documented contract (bad config, bad file contents).
/// The CLI maps this to exit code 1; any other Error maps to 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Parse failure with a 1-based line number.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : ValidationError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

enum class Material : std::uint8_t { Generic, Plaster, Masonry, Concrete };

std::string to_string(Material m);
/// Throws ValidationError on an unknown name.
Material material_from_string(const std::string& name);

}  // namespace crackgen
