#pragma once

// Planar points and the two angular charts used throughout the library.
//
// Angles are CLOCKWISE-positive everywhere:
//   psi(theta, r)             = ( r cos theta, -r sin theta )
//   from_canonical(theta, rho) = ( sqrt(2 rho) cos theta, -sqrt(2 rho) sin theta )
// so a point moving from (1,0) towards (0,-1) has increasing theta. Most
// plotting code assumes the opposite orientation; flip the sign of theta
// before handing lifts to such code.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "rotdeg/error.hpp"

namespace rotdeg {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct PlanarPoint {
    double x = 0.0;
    double y = 0.0;

    constexpr PlanarPoint& operator+=(PlanarPoint o) { x += o.x; y += o.y; return *this; }
    constexpr PlanarPoint& operator-=(PlanarPoint o) { x -= o.x; y -= o.y; return *this; }
    constexpr PlanarPoint& operator*=(double s) { x *= s; y *= s; return *this; }

    friend constexpr PlanarPoint operator+(PlanarPoint a, PlanarPoint b) { return a += b; }
    friend constexpr PlanarPoint operator-(PlanarPoint a, PlanarPoint b) { return a -= b; }
    friend constexpr PlanarPoint operator-(PlanarPoint a) { return {-a.x, -a.y}; }
    friend constexpr PlanarPoint operator*(double s, PlanarPoint a) { return a *= s; }
    friend constexpr PlanarPoint operator*(PlanarPoint a, double s) { return a *= s; }
    friend constexpr bool operator==(PlanarPoint, PlanarPoint) = default;
};

inline double norm(PlanarPoint p) { return std::hypot(p.x, p.y); }
constexpr double norm2(PlanarPoint p) { return p.x * p.x + p.y * p.y; }
constexpr double dot(PlanarPoint a, PlanarPoint b) { return a.x * b.x + a.y * b.y; }

/// Symplectic matrix J = [[0, 1], [-1, 0]]: a quarter turn clockwise.
constexpr PlanarPoint apply_J(PlanarPoint p) { return {p.y, -p.x}; }

/// Unwrapped clockwise angle and radius.
struct PolarLift {
    double theta = 0.0;
    double r = 0.0;
};

/// Clockwise canonical polar coordinates with rho = |z|^2 / 2.
struct CanonicalPolar {
    double theta = 0.0;
    double rho = 0.0;
};

inline PlanarPoint psi(PolarLift lift)
{
    return {lift.r * std::cos(lift.theta), -lift.r * std::sin(lift.theta)};
}

/// Clockwise angle in (-pi, pi].
inline double clockwise_angle(PlanarPoint p) { return std::atan2(-p.y, p.x); }

/// Representative of `theta` modulo 2 pi nearest to `hint`.
inline double nearest_representative(double theta, double hint)
{
    return theta + two_pi * std::round((hint - theta) / two_pi);
}

inline PolarLift to_polar(PlanarPoint p, double theta_hint)
{
    if (p.x == 0.0 && p.y == 0.0) {
        throw Error(ErrorCode::OriginSample, "polar angle undefined at the origin");
    }
    return {nearest_representative(clockwise_angle(p), theta_hint), norm(p)};
}

/// Continuous clockwise lift of a sampled curve avoiding B[0, min_radius].
///
/// The first angle is the representative closest to `theta0_hint`; every
/// subsequent angle is chosen within pi of its predecessor. A gap that
/// cannot be told apart from a half turn is rejected instead of guessed.
inline std::vector<PolarLift> unwrap_lift(std::span<const PlanarPoint> samples, double theta0_hint,
                                          double min_radius = 0.0)
{
    std::vector<PolarLift> out;
    out.reserve(samples.size());
    double hint = theta0_hint;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const PlanarPoint p = samples[i];
        const double r = norm(p);
        if (r <= min_radius || r == 0.0) {
            throw Error(ErrorCode::OriginSample,
                        "sample " + std::to_string(i) + " lies within the origin exclusion radius");
        }
        PolarLift lift{nearest_representative(clockwise_angle(p), hint), r};
        if (i > 0 && std::abs(lift.theta - out.back().theta) >= std::numbers::pi * (1.0 - 1e-12)) {
            throw Error(ErrorCode::UnderSampled,
                        "angular gap of half a turn between samples " + std::to_string(i - 1) + " and " +
                            std::to_string(i));
        }
        hint = lift.theta;
        out.push_back(lift);
    }
    return out;
}

inline CanonicalPolar to_canonical(PlanarPoint p, double theta_hint)
{
    if (p.x == 0.0 && p.y == 0.0) {
        throw Error(ErrorCode::OriginSample, "canonical polar coordinates undefined at the origin");
    }
    return {nearest_representative(clockwise_angle(p), theta_hint), 0.5 * norm2(p)};
}

inline PlanarPoint from_canonical(CanonicalPolar c)
{
    const double r = std::sqrt(2.0 * c.rho);
    return {r * std::cos(c.theta), -r * std::sin(c.theta)};
}

/// Canonical radius rho = |z|^2 / 2.
constexpr double action_radius(PlanarPoint p) { return 0.5 * norm2(p); }

}  // namespace rotdeg
