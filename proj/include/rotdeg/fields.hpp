#pragma once

// Planar time-periodic vector fields z' = F(t, z), optionally generated by a
// Hamiltonian through F = J grad H with the clockwise J of geometry.hpp.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rotdeg/error.hpp"
#include "rotdeg/geometry.hpp"

namespace rotdeg {

using FieldFn = std::function<PlanarPoint(double, PlanarPoint)>;
using ScalarFn = std::function<double(double, PlanarPoint)>;

/// dH/dtheta and dH/drho in clockwise canonical polar coordinates.
struct CanonicalPartials {
    double d_theta = 0.0;
    double d_rho = 0.0;
};

struct Hamiltonian {
    ScalarFn energy;
    FieldFn gradient;
    /// Optional native canonical-polar partials; derived from `gradient`
    /// when empty.
    std::function<CanonicalPartials(double, CanonicalPolar)> polar_partials;
};

/// A known solution of the field in canonical polar coordinates, defined on
/// windows [k P, k P + length) in local time s = t - k P. Trajectories that
/// start within `capture()` of it in rho are integrated as deviations
/// (u, delta) = (theta - theta_ref, rho - rho_ref) (Encke's method), which
/// resolves motion near an unstable reference far below the rounding level
/// of the absolute coordinates.
struct ReferenceOrbit {
    virtual ~ReferenceOrbit() = default;
    virtual double period() const = 0;
    virtual double window_length() const = 0;
    virtual CanonicalPolar state(double s) const = 0;
    /// (u', delta') at local time s and deviation (u, delta).
    virtual std::array<double, 2> deviation_rate(double s, double u, double delta) const = 0;
    virtual double capture() const = 0;
};

struct FieldSpec {
    std::string name;
    double period = two_pi;
    FieldFn eval;
    std::optional<Hamiltonian> hamiltonian;

    /// Times in [0, period) where the field may jump in t. Repeated with
    /// the period; the integrator never lets a step straddle one.
    std::vector<double> seams;

    /// Smoothness advisory: largest step the integrator should attempt at
    /// (t, z). Empty means no cap.
    ScalarFn step_cap;

    /// Optional known solution used by the integrator's deviation chart.
    std::shared_ptr<const ReferenceOrbit> reference;

    PlanarPoint operator()(double t, PlanarPoint z) const { return eval(t, z); }

    bool is_hamiltonian() const { return hamiltonian.has_value(); }
};

/// Canonical-polar partials of a Hamiltonian at a Cartesian point.
inline CanonicalPartials polar_partials(const Hamiltonian& h, double t, PlanarPoint z)
{
    if (h.polar_partials) {
        return h.polar_partials(t, to_canonical(z, 0.0));
    }
    const PlanarPoint g = h.gradient(t, z);
    return {dot(g, apply_J(z)), dot(g, z) / norm2(z)};
}

/// Angular velocity <F, Jz> / |z|^2 (clockwise-positive).
inline double angular_velocity(PlanarPoint f, PlanarPoint z) { return dot(f, apply_J(z)) / norm2(z); }

inline FieldSpec make_field(std::string name, double period, FieldFn eval)
{
    if (!(period > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "period must be positive");
    }
    FieldSpec spec;
    spec.name = std::move(name);
    spec.period = period;
    spec.eval = std::move(eval);
    return spec;
}

/// F = J grad H = (dH/dy, -dH/dx).
inline FieldSpec make_hamiltonian_field(ScalarFn energy, FieldFn gradient, double period,
                                        std::string name = "hamiltonian")
{
    if (!(period > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "period must be positive");
    }
    FieldSpec spec;
    spec.name = std::move(name);
    spec.period = period;
    spec.eval = [gradient](double t, PlanarPoint z) { return apply_J(gradient(t, z)); };
    spec.hamiltonian = Hamiltonian{std::move(energy), std::move(gradient), {}};
    return spec;
}

/// H = |z|^2 / 2, F = Jz: unit-speed clockwise rotation.
inline FieldSpec linear_clockwise(double period = two_pi)
{
    auto spec = make_hamiltonian_field([](double, PlanarPoint z) { return 0.5 * norm2(z); },
                                       [](double, PlanarPoint z) { return z; }, period, "linear_clockwise");
    spec.hamiltonian->polar_partials = [](double, CanonicalPolar) { return CanonicalPartials{0.0, 1.0}; };
    return spec;
}

/// H = rho^alpha with rho = |z|^2/2; every circle rotates rigidly with
/// angular speed alpha rho^(alpha-1).
inline FieldSpec radial_power(double alpha, double period)
{
    if (!(alpha > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "radial power exponent must be positive");
    }
    auto spec = make_hamiltonian_field(
        [alpha](double, PlanarPoint z) { return std::pow(action_radius(z), alpha); },
        [alpha](double, PlanarPoint z) {
            const double rho = action_radius(z);
            if (rho == 0.0) {
                return PlanarPoint{};
            }
            return alpha * std::pow(rho, alpha - 1.0) * z;
        },
        period, "radial_power");
    spec.hamiltonian->polar_partials = [alpha](double, CanonicalPolar c) {
        return CanonicalPartials{0.0, alpha * std::pow(c.rho, alpha - 1.0)};
    };
    return spec;
}

/// x'' + x^3 = amp sin(omega t) on the phase plane z = (x, x').
/// H = v^2/2 + x^4/4 - amp sin(omega t) x.
inline FieldSpec duffing_field(double amp, double omega)
{
    if (!(omega > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "forcing frequency must be positive");
    }
    const double period = amp == 0.0 ? two_pi : two_pi / omega;
    auto spec = make_hamiltonian_field(
        [amp, omega](double t, PlanarPoint z) {
            return 0.5 * z.y * z.y + 0.25 * z.x * z.x * z.x * z.x - amp * std::sin(omega * t) * z.x;
        },
        [amp, omega](double t, PlanarPoint z) {
            return PlanarPoint{z.x * z.x * z.x - amp * std::sin(omega * t), z.y};
        },
        period, "duffing");
    return spec;
}

struct TimedPoint {
    double t = 0.0;
    PlanarPoint z;
};

/// Largest discrepancy between the analytic gradient and central
/// differences of the energy, scaled by 1 + |grad H|.
inline double grad_check(const FieldSpec& spec, std::span<const TimedPoint> samples, double h)
{
    if (!spec.hamiltonian) {
        throw Error(ErrorCode::MissingHamiltonian, "field '" + spec.name + "' has no Hamiltonian");
    }
    const auto& ham = *spec.hamiltonian;
    double worst = 0.0;
    for (const auto& s : samples) {
        const PlanarPoint ex{h, 0.0};
        const PlanarPoint ey{0.0, h};
        const PlanarPoint fd{(ham.energy(s.t, s.z + ex) - ham.energy(s.t, s.z - ex)) / (2.0 * h),
                             (ham.energy(s.t, s.z + ey) - ham.energy(s.t, s.z - ey)) / (2.0 * h)};
        const PlanarPoint g = ham.gradient(s.t, s.z);
        worst = std::max(worst, norm(fd - g) / (1.0 + norm(g)));
    }
    return worst;
}

}  // namespace rotdeg
