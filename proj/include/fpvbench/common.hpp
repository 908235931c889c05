// Shared value types, angle helpers and the error hierarchy.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fpvbench {

using AgentId = std::int64_t;
using Step = std::int64_t;

struct Vec2 {
    double x{0};
    double y{0};

    friend Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) noexcept { return {s * a.x, s * a.y}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;

    [[nodiscard]] double norm() const noexcept { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) noexcept { return (a - b).norm(); }

struct Vec3 {
    double x{0};
    double y{0};
    double z{0};
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

// Ground-plane pose; heading is measured from +x towards +y.
struct Pose2 {
    double x{0};
    double y{0};
    double heading{0};

    [[nodiscard]] Vec2 position() const noexcept { return {x, y}; }
    friend bool operator==(const Pose2&, const Pose2&) = default;
};

inline constexpr double kPi = std::numbers::pi;

// Wraps to (-pi, pi].
inline double wrap_angle(double a) noexcept {
    double r = std::remainder(a, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

inline double angle_diff(double to, double from) noexcept { return wrap_angle(to - from); }

enum class Variant { kBev, kFpvGt, kFpvNoisy, kFpvDet };

inline constexpr Variant kAllVariants[] = {Variant::kBev, Variant::kFpvGt, Variant::kFpvNoisy,
                                           Variant::kFpvDet};

std::string_view to_string(Variant v) noexcept;
std::optional<Variant> parse_variant(std::string_view s) noexcept;

// ---------------------------------------------------------------------------
// Errors. DataError covers malformed or inconsistent inputs (CLI exit code 3),
// ConfigError covers bad parameters (exit code 2).

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateRecordError : public ParseError {
public:
    using ParseError::ParseError;
};

class FormatError : public DataError {
public:
    using DataError::DataError;
};

class DataIntegrityError : public DataError {
public:
    using DataError::DataError;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

class EstimationError : public DataError {
public:
    using DataError::DataError;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace fpvbench
