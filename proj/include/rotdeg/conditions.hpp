#pragma once

// Sampling-based checkers for the structural conditions on a field. Every
// verdict holds "at resolution": constants are fitted on seeded random
// samples, certified with a safety factor, and can be re-validated on a
// fresh sample drawn from the same distribution with a new seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rotdeg/error.hpp"
#include "rotdeg/fields.hpp"
#include "rotdeg/geometry.hpp"
#include "rotdeg/integrator.hpp"
#include "rotdeg/parallel.hpp"
#include "rotdeg/rotation.hpp"

namespace rotdeg {

struct Witness {
    double t = 0.0;
    PlanarPoint z;
};

struct ConditionVerdict {
    std::string condition;
    bool holds_at_resolution = false;
    std::optional<Witness> witness;
    std::map<std::string, double> certificate;
    std::string note;
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Certified constants are the sampled extremes scaled by this factor, so a
/// fresh sample from the same distribution does not land below them.
inline constexpr double kCertificateFactor = 0.5;

inline double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double log_uniform(std::mt19937_64& rng, double lo, double hi)
{
    return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

/// Least-squares slope of y against x; 0 with fewer than two points.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    if (n < 2) {
        return 0.0;
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

inline double certify_lower(double sampled)
{
    if (std::isinf(sampled)) {
        return std::numeric_limits<double>::max();
    }
    return kCertificateFactor * sampled;
}

inline const Hamiltonian& require_hamiltonian(const FieldSpec& spec)
{
    if (!spec.hamiltonian) {
        throw Error(ErrorCode::MissingHamiltonian, "field '" + spec.name + "' has no Hamiltonian");
    }
    return *spec.hamiltonian;
}

inline CanonicalPartials partials_at(const Hamiltonian& h, double t, CanonicalPolar c)
{
    if (h.polar_partials) {
        return h.polar_partials(t, c);
    }
    return polar_partials(h, t, from_canonical(c));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// (star): |<F, z>| <= c |z| on B(0, cT)

struct StarOptions {
    double c_min = 1e-3;
    double c_max = 1e3;
    std::size_t c_per_decade = 4;
    std::size_t samples = 4096;
    std::uint64_t seed = 1;
};

namespace detail {

struct StarSample {
    double t_frac = 0.0;
    PlanarPoint unit;  // uniform in the unit disk
};

inline std::vector<StarSample> star_samples(const StarOptions& opt)
{
    std::mt19937_64 rng(opt.seed);
    std::vector<StarSample> out(opt.samples);
    for (auto& s : out) {
        s.t_frac = uniform(rng, 0.0, 1.0);
        const double r = std::sqrt(uniform(rng, 0.0, 1.0));
        const double a = uniform(rng, 0.0, two_pi);
        s.unit = {r * std::cos(a), r * std::sin(a)};
    }
    return out;
}

/// Largest |<F,z>| / (c |z|) over the samples scaled to B(0, cT).
inline double star_ratio(const FieldSpec& spec, double c, double T, const std::vector<StarSample>& samples,
                         Witness* worst)
{
    double best = 0.0;
    for (const auto& s : samples) {
        const PlanarPoint z = (c * T) * s.unit;
        const double nz = norm(z);
        if (nz == 0.0) {
            continue;
        }
        const double t = s.t_frac * T;
        const double r = std::abs(dot(spec(t, z), z)) / (c * nz);
        if (r > best) {
            best = r;
            if (worst != nullptr) {
                *worst = {t, z};
            }
        }
    }
    return best;
}

inline constexpr double kStarTol = 1e-12;

}  // namespace detail

/// Scans c upward on a log grid and certifies the first c that validates
/// every sample.
inline ConditionVerdict check_star(const FieldSpec& spec, const StarOptions& opt, double T)
{
    if (!(T > 0.0) || !(opt.c_min > 0.0 && opt.c_max >= opt.c_min) || opt.c_per_decade == 0 || opt.samples == 0) {
        throw Error(ErrorCode::InvalidParams, "check_star needs T > 0, a positive c range and samples");
    }
    const auto samples = detail::star_samples(opt);
    const int n = static_cast<int>(std::ceil(std::log10(opt.c_max / opt.c_min) * static_cast<double>(opt.c_per_decade)));
    ConditionVerdict v;
    v.condition = "star";
    double least = detail::kInf;
    Witness least_w;
    double least_c = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double c = opt.c_min * std::pow(10.0, static_cast<double>(i) / static_cast<double>(opt.c_per_decade));
        Witness w;
        const double r = detail::star_ratio(spec, c, T, samples, &w);
        if (r <= 1.0 + detail::kStarTol) {
            v.holds_at_resolution = true;
            v.certificate = {{"c", c}, {"max_ratio", r}, {"T", T}, {"samples", static_cast<double>(samples.size())}};
            return v;
        }
        if (r < least) {
            least = r;
            least_w = w;
            least_c = c;
        }
    }
    v.witness = least_w;
    v.certificate = {{"best_c", least_c}, {"max_ratio", least}, {"T", T}, {"samples", static_cast<double>(samples.size())}};
    v.note = "no c on the grid satisfies |<F,z>| <= c|z| on B(0,cT)";
    return v;
}

/// Number of fresh samples violating a star certificate.
inline std::size_t revalidate_star(const FieldSpec& spec, const ConditionVerdict& v, const StarOptions& fresh)
{
    const double c = v.certificate.at("c");
    const double T = v.certificate.at("T");
    std::size_t bad = 0;
    for (const auto& s : detail::star_samples(fresh)) {
        const PlanarPoint z = (c * T) * s.unit;
        const double t = s.t_frac * T;
        if (std::abs(dot(spec(t, z), z)) > c * norm(z) * (1.0 + detail::kStarTol)) {
            ++bad;
        }
    }
    return bad;
}

// ---------------------------------------------------------------------------
// (A6): angular velocity bounded below at large radius

struct A6Options {
    std::size_t samples_per_annulus = 512;
    std::uint64_t seed = 1;
};

namespace detail {

struct AnnulusSample {
    std::size_t annulus = 0;
    double t = 0.0;
    PlanarPoint z;
};

inline std::vector<AnnulusSample> annulus_samples(const std::vector<double>& radii, const std::vector<double>& mesh,
                                                  const A6Options& opt)
{
    std::mt19937_64 rng(opt.seed);
    std::vector<AnnulusSample> out;
    for (std::size_t k = 0; k + 1 < radii.size(); ++k) {
        const double a2 = radii[k] * radii[k];
        const double b2 = radii[k + 1] * radii[k + 1];
        for (std::size_t i = 0; i < opt.samples_per_annulus; ++i) {
            const double r = std::sqrt(uniform(rng, a2, b2));
            const double a = uniform(rng, 0.0, two_pi);
            for (double t : mesh) {
                out.push_back({k, t, {r * std::cos(a), r * std::sin(a)}});
            }
        }
    }
    return out;
}

inline void validate_a6_inputs(const std::vector<double>& radii, const std::vector<double>& mesh, const A6Options& opt)
{
    bool ok = radii.size() >= 2 && !mesh.empty() && opt.samples_per_annulus > 0 && radii.front() > 0.0;
    for (std::size_t i = 1; ok && i < radii.size(); ++i) {
        ok = radii[i] > radii[i - 1];
    }
    if (!ok) {
        throw Error(ErrorCode::InvalidParams, "check_A6 needs increasing positive annulus radii and a time mesh");
    }
}

inline constexpr double kA6Tol = 1e-9;

}  // namespace detail

/// Per-annulus minima of <F, Jz>/|z|^2; holds when the outermost minimum is
/// not below the smallest minimum of the inner annuli, i.e. the lower bound
/// does not degrade with the radius.
inline ConditionVerdict check_A6(const FieldSpec& spec, const std::vector<double>& annuli_radii,
                                 const std::vector<double>& time_mesh, const A6Options& opt = {})
{
    detail::validate_a6_inputs(annuli_radii, time_mesh, opt);
    const auto samples = detail::annulus_samples(annuli_radii, time_mesh, opt);
    const std::size_t m = annuli_radii.size() - 1;
    std::vector<double> minima(m, detail::kInf);
    std::vector<Witness> argmin(m);
    for (const auto& s : samples) {
        const double w = angular_velocity(spec(s.t, s.z), s.z);
        if (w < minima[s.annulus]) {
            minima[s.annulus] = w;
            argmin[s.annulus] = {s.t, s.z};
        }
    }
    const double lowest = *std::min_element(minima.begin(), minima.end());
    const double inner = m > 1 ? *std::min_element(minima.begin(), minima.end() - 1) : minima.back();
    const double ell_hat = minima.back();
    ConditionVerdict v;
    v.condition = "A6";
    v.holds_at_resolution = std::isfinite(ell_hat) && ell_hat >= inner - detail::kA6Tol * (1.0 + std::abs(inner));
    v.certificate["ell_hat"] = ell_hat;
    v.certificate["ell"] = ell_hat - detail::kCertificateFactor * std::abs(ell_hat);
    v.certificate["lowest_annulus_min"] = lowest;
    for (std::size_t k = 0; k < m; ++k) {
        v.certificate["annulus_min_" + std::to_string(k)] = minima[k];
    }
    v.certificate["r_inner"] = annuli_radii[m - 1];
    v.certificate["r_outer"] = annuli_radii[m];
    if (!v.holds_at_resolution) {
        v.witness = argmin.back();
        v.note = "angular velocity minimum decreases toward the outer annulus";
    }
    return v;
}

/// Fresh samples on the outermost annulus below the certified ell.
inline std::size_t revalidate_A6(const FieldSpec& spec, const ConditionVerdict& v, const std::vector<double>& time_mesh,
                                 const A6Options& fresh)
{
    const double ell = v.certificate.at("ell");
    const std::vector<double> radii{v.certificate.at("r_inner"), v.certificate.at("r_outer")};
    std::size_t bad = 0;
    for (const auto& s : detail::annulus_samples(radii, time_mesh, fresh)) {
        if (angular_velocity(spec(s.t, s.z), s.z) < ell) {
            ++bad;
        }
    }
    return bad;
}

// ---------------------------------------------------------------------------
// (H1), (H2) and superquadratic growth: Hamiltonian conditions in canonical
// polar coordinates over a range of rho.

struct RhoSampling {
    double rho_lo = 1.0;
    double rho_hi = 1e6;
    /// Generic samples: t uniform over the period, theta uniform, rho
    /// log-uniform.
    std::size_t grid_samples = 8000;
    /// Samples around the field's reference orbit (if any): the
    /// perturbation of a reference solution is where the partials are
    /// extreme.
    std::size_t reference_samples = 8000;
    std::uint64_t seed = 1;
    /// A fitted constant must not decay faster than rho^(-slope_tolerance)
    /// over the outermost decades.
    double slope_tolerance = 0.25;
    std::size_t tail_decades = 3;
};

namespace detail {

struct RhoSample {
    double t = 0.0;
    CanonicalPolar c;
};

/// Local time s in [0, window) where the reference rho equals target;
/// assumes rho_ref increases over the window.
inline double reference_time_at(const ReferenceOrbit& ref, double target)
{
    double lo = 0.0;
    double hi = ref.window_length();
    for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) {
            break;
        }
        (ref.state(mid).rho < target ? lo : hi) = mid;
    }
    return lo;
}

inline std::vector<RhoSample> rho_samples(const FieldSpec& spec, const RhoSampling& opt)
{
    if (!(opt.rho_lo > 0.0 && opt.rho_hi > opt.rho_lo) || opt.grid_samples + opt.reference_samples == 0) {
        throw Error(ErrorCode::InvalidParams, "rho sampling needs 0 < rho_lo < rho_hi and samples");
    }
    std::mt19937_64 rng(opt.seed);
    std::vector<RhoSample> out;
    out.reserve(opt.grid_samples + opt.reference_samples);
    for (std::size_t i = 0; i < opt.grid_samples; ++i) {
        const double t = uniform(rng, 0.0, spec.period);
        const double th = uniform(rng, 0.0, two_pi);
        out.push_back({t, {th, log_uniform(rng, opt.rho_lo, opt.rho_hi)}});
    }
    if (spec.reference) {
        const auto& ref = *spec.reference;
        const double lo = std::max(opt.rho_lo, ref.state(0.0).rho);
        if (lo < opt.rho_hi) {
            for (std::size_t i = 0; i < opt.reference_samples; ++i) {
                const double s = reference_time_at(ref, log_uniform(rng, lo, opt.rho_hi));
                const CanonicalPolar c = ref.state(s);
                double u = 0.0;
                if (uniform(rng, 0.0, 1.0) < 0.5) {
                    u = std::pow(10.0, uniform(rng, -9.0, 0.0)) * (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
                }
                double d = 0.0;
                if (uniform(rng, 0.0, 1.0) < 0.5) {
                    d = uniform(rng, -0.5, 0.5) * ref.capture();
                }
                if (c.rho + d >= opt.rho_lo && c.rho + d <= opt.rho_hi) {
                    out.push_back({s, {c.theta + u, c.rho + d}});
                }
            }
        }
    }
    return out;
}

/// Lower edges of the decades of [rho_lo, rho_hi).
inline std::vector<double> decade_edges(const RhoSampling& opt)
{
    std::vector<double> e;
    for (double r = opt.rho_lo; r < opt.rho_hi; r *= 10.0) {
        e.push_back(r);
    }
    return e;
}

inline std::size_t decade_of(double rho, const RhoSampling& opt)
{
    return static_cast<std::size_t>(std::max(0.0, std::floor(std::log10(rho / opt.rho_lo))));
}

inline Witness witness_of(const RhoSample& s) { return {s.t, from_canonical(s.c)}; }

/// Tail trend of per-decade minima of a ratio: fits log(min) against
/// log(rho at the minimum) over the outermost decades with finite minima.
struct TailTrend {
    double minimum = kInf;
    std::size_t argmin = 0;
    double slope = 0.0;
};

inline TailTrend tail_trend(const std::vector<RhoSample>& samples, const std::vector<double>& ratio,
                            double r_floor, const RhoSampling& opt)
{
    const std::size_t nd = decade_edges(opt).size();
    std::vector<double> dmin(nd, kInf);
    std::vector<double> drho(nd, 0.0);
    TailTrend out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double rho = samples[i].c.rho;
        if (rho < r_floor) {
            continue;
        }
        const std::size_t d = std::min(decade_of(rho, opt), nd - 1);
        if (ratio[i] < dmin[d]) {
            dmin[d] = ratio[i];
            drho[d] = rho;
        }
        if (ratio[i] < out.minimum) {
            out.minimum = ratio[i];
            out.argmin = i;
        }
    }
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t d = nd; d-- > 0 && x.size() < opt.tail_decades;) {
        if (std::isfinite(dmin[d]) && dmin[d] > 0.0 && drho[d] >= r_floor) {
            x.push_back(std::log(drho[d]));
            y.push_back(std::log(dmin[d]));
        }
    }
    out.slope = ls_slope(x, y);
    return out;
}

}  // namespace detail

struct H1Options {
    RhoSampling sampling;
    double gamma_min = 1.0;
    double gamma_max = 4.0;
    std::size_t gamma_steps = 13;
};

/// dH/drho >= c |dH/dtheta|^gamma for rho >= r. The threshold r is the lowest
/// decade edge above which dH/drho is positive; for each gamma the largest
/// feasible c is the sampled minimum of the ratio, and (c, gamma, r) is
/// accepted when that minimum does not decay over the outermost decades.
inline ConditionVerdict check_H1(const FieldSpec& spec, const H1Options& opt = {})
{
    const auto& ham = detail::require_hamiltonian(spec);
    const auto& so = opt.sampling;
    const auto samples = detail::rho_samples(spec, so);
    std::vector<CanonicalPartials> d(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) { d[i] = detail::partials_at(ham, samples[i].t, samples[i].c); });

    ConditionVerdict v;
    v.condition = "H1";
    v.certificate["samples"] = static_cast<double>(samples.size());

    const auto edges = detail::decade_edges(so);
    std::optional<double> r_floor;
    std::size_t worst_sign = 0;
    for (double e : edges) {
        bool ok = true;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples[i].c.rho >= e && !(d[i].d_rho > 0.0 || (d[i].d_rho >= 0.0 && d[i].d_theta == 0.0))) {
                ok = false;
                worst_sign = i;
                break;
            }
        }
        if (ok) {
            r_floor = e;
            break;
        }
    }
    if (!r_floor) {
        v.witness = detail::witness_of(samples[worst_sign]);
        v.note = "dH/drho is not positive at large rho";
        return v;
    }

    std::optional<detail::TailTrend> first;
    double first_gamma = 0.0;
    std::vector<double> ratio(samples.size());
    for (std::size_t g = 0; g < opt.gamma_steps; ++g) {
        const double gamma = opt.gamma_steps == 1 ? opt.gamma_min
                                                  : opt.gamma_min + (opt.gamma_max - opt.gamma_min) * static_cast<double>(g) /
                                                                        static_cast<double>(opt.gamma_steps - 1);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const double a = std::abs(d[i].d_theta);
            ratio[i] = a == 0.0 ? detail::kInf : d[i].d_rho / std::pow(a, gamma);
        }
        const auto tr = detail::tail_trend(samples, ratio, *r_floor, so);
        if (!first) {
            first = tr;
            first_gamma = gamma;
        }
        if (tr.minimum > 0.0 && tr.slope >= -so.slope_tolerance) {
            v.holds_at_resolution = true;
            v.certificate["c"] = detail::certify_lower(tr.minimum);
            v.certificate["c_hat"] = std::isinf(tr.minimum) ? std::numeric_limits<double>::max() : tr.minimum;
            v.certificate["gamma"] = gamma;
            v.certificate["r"] = *r_floor;
            v.certificate["tail_slope"] = tr.slope;
            return v;
        }
    }
    v.witness = detail::witness_of(samples[first->argmin]);
    v.certificate["gamma"] = first_gamma;
    v.certificate["c_hat"] = first->minimum;
    v.certificate["r"] = *r_floor;
    v.certificate["tail_slope"] = first->slope;
    v.note = "the feasible c decays with rho for every gamma on the grid";
    return v;
}

inline std::size_t revalidate_H1(const FieldSpec& spec, const ConditionVerdict& v, const RhoSampling& fresh)
{
    const auto& ham = detail::require_hamiltonian(spec);
    const double c = v.certificate.at("c");
    const double gamma = v.certificate.at("gamma");
    const double r = v.certificate.at("r");
    std::size_t bad = 0;
    for (const auto& s : detail::rho_samples(spec, fresh)) {
        if (s.c.rho < r) {
            continue;
        }
        const auto d = detail::partials_at(ham, s.t, s.c);
        const double a = std::abs(d.d_theta);
        if (a == 0.0 ? d.d_rho < 0.0 : d.d_rho < c * std::pow(a, gamma)) {
            ++bad;
        }
    }
    return bad;
}

struct H2Options {
    RhoSampling sampling;
    double k_step = 0.01;
};

/// m <= H <= 2k rho dH/drho for rho >= r with k < 1/2. The smallest grid k
/// strictly above the sampled maximum of H / (2 rho dH/drho) is certified;
/// r is the lowest decade edge where such a k exists.
inline ConditionVerdict check_H2(const FieldSpec& spec, const H2Options& opt = {})
{
    const auto& ham = detail::require_hamiltonian(spec);
    const auto& so = opt.sampling;
    const auto samples = detail::rho_samples(spec, so);
    struct Eval {
        double h = 0.0;
        double d_rho = 0.0;
    };
    std::vector<Eval> e(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        e[i] = {ham.energy(samples[i].t, from_canonical(samples[i].c)),
                detail::partials_at(ham, samples[i].t, samples[i].c).d_rho};
    });
    auto ratio_of = [&](std::size_t i) {
        const double rho = samples[i].c.rho;
        if (!(e[i].h > 0.0) || !(e[i].d_rho > 0.0)) {
            return detail::kInf;
        }
        return e[i].h / (2.0 * rho * e[i].d_rho);
    };

    ConditionVerdict v;
    v.condition = "H2";
    v.certificate["samples"] = static_cast<double>(samples.size());
    std::size_t worst = 0;
    double worst_ratio = -1.0;
    for (double edge : detail::decade_edges(so)) {
        double k_hat = 0.0;
        double m_hat = detail::kInf;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples[i].c.rho < edge) {
                continue;
            }
            const double r = ratio_of(i);
            if (r > k_hat) {
                k_hat = r;
                arg = i;
            }
            m_hat = std::min(m_hat, e[i].h);
        }
        if (worst_ratio < 0.0) {
            worst = arg;
            worst_ratio = k_hat;
        }
        const double k = opt.k_step * (std::floor(k_hat / opt.k_step) + 1.0);
        if (k < 0.5 && std::isfinite(m_hat) && m_hat > 0.0) {
            v.holds_at_resolution = true;
            v.certificate["k"] = k;
            v.certificate["k_hat"] = k_hat;
            v.certificate["m"] = detail::certify_lower(m_hat);
            v.certificate["m_hat"] = m_hat;
            v.certificate["r"] = edge;
            return v;
        }
    }
    v.witness = detail::witness_of(samples[worst]);
    v.certificate["k_hat"] = worst_ratio;
    v.note = "H / (2 rho dH/drho) reaches 1/2 on every tail of the rho range";
    return v;
}

inline std::size_t revalidate_H2(const FieldSpec& spec, const ConditionVerdict& v, const RhoSampling& fresh)
{
    const auto& ham = detail::require_hamiltonian(spec);
    const double k = v.certificate.at("k");
    const double m = v.certificate.at("m");
    const double r = v.certificate.at("r");
    std::size_t bad = 0;
    for (const auto& s : detail::rho_samples(spec, fresh)) {
        if (s.c.rho < r) {
            continue;
        }
        const double h = ham.energy(s.t, from_canonical(s.c));
        const double d_rho = detail::partials_at(ham, s.t, s.c).d_rho;
        if (h < m || h > 2.0 * k * s.c.rho * d_rho) {
            ++bad;
        }
    }
    return bad;
}

struct GrowthOptions {
    std::size_t samples_per_radius = 256;
    std::uint64_t seed = 1;
    double slope_tolerance = 0.25;
};

namespace detail {

inline std::vector<std::pair<std::size_t, Witness>> circle_samples(const std::vector<double>& radii, double period,
                                                                   std::size_t per_radius, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::size_t, Witness>> out;
    for (std::size_t k = 0; k < radii.size(); ++k) {
        for (std::size_t i = 0; i < per_radius; ++i) {
            const double t = uniform(rng, 0.0, period);
            const double a = uniform(rng, 0.0, two_pi);
            out.push_back({k, {t, radii[k] * PlanarPoint{std::cos(a), std::sin(a)}}});
        }
    }
    return out;
}

}  // namespace detail

/// H >= a |z|^(1/k) on the sampled circles |z| = radii; holds when the
/// per-radius minima of H / |z|^(1/k) are positive and do not decay.
inline ConditionVerdict check_growth(const FieldSpec& spec, double k, const std::vector<double>& radii,
                                     const GrowthOptions& opt = {})
{
    const auto& ham = detail::require_hamiltonian(spec);
    if (!(k > 0.0 && k < 0.5) || radii.empty() || opt.samples_per_radius == 0 ||
        !std::all_of(radii.begin(), radii.end(), [](double r) { return r > 0.0; })) {
        throw Error(ErrorCode::InvalidParams, "check_growth needs k in (0, 1/2) and positive radii");
    }
    const auto samples = detail::circle_samples(radii, spec.period, opt.samples_per_radius, opt.seed);
    std::vector<double> minima(radii.size(), detail::kInf);
    std::vector<Witness> argmin(radii.size());
    for (const auto& [idx, w] : samples) {
        const double a = ham.energy(w.t, w.z) / std::pow(norm(w.z), 1.0 / k);
        if (a < minima[idx]) {
            minima[idx] = a;
            argmin[idx] = w;
        }
    }
    const auto it = std::min_element(minima.begin(), minima.end());
    const double a_hat = *it;
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (minima[i] > 0.0) {
            x.push_back(std::log(radii[i]));
            y.push_back(std::log(minima[i]));
        }
    }
    const double slope = detail::ls_slope(x, y);
    ConditionVerdict v;
    v.condition = "growth";
    v.holds_at_resolution = a_hat > 0.0 && slope >= -opt.slope_tolerance;
    v.certificate = {{"k", k}, {"a_hat", a_hat}, {"slope", slope}, {"R", *std::min_element(radii.begin(), radii.end())}};
    if (v.holds_at_resolution) {
        v.certificate["a"] = detail::certify_lower(a_hat);
    } else {
        v.witness = a_hat > 0.0 ? argmin.back() : argmin[static_cast<std::size_t>(it - minima.begin())];
        v.note = a_hat > 0.0 ? "H / |z|^(1/k) decays with the radius" : "H is not positive on the sampled circles";
    }
    return v;
}

inline std::size_t revalidate_growth(const FieldSpec& spec, const ConditionVerdict& v, const std::vector<double>& radii,
                                     const GrowthOptions& fresh)
{
    const auto& ham = detail::require_hamiltonian(spec);
    const double k = v.certificate.at("k");
    const double a = v.certificate.at("a");
    std::size_t bad = 0;
    for (const auto& [idx, w] : detail::circle_samples(radii, spec.period, fresh.samples_per_radius, fresh.seed)) {
        if (ham.energy(w.t, w.z) < a * std::pow(norm(w.z), 1.0 / k)) {
            ++bad;
        }
    }
    return bad;
}

// ---------------------------------------------------------------------------
// (A4): the rotation of blow-up solutions diverges

struct A4Options {
    std::vector<double> escape_radii{1e3, 1e4, 1e5};
    /// With three or more radii, the last rotation increment must be at
    /// least this fraction of the first.
    double min_increment_ratio = 0.5;
};

/// Each seed is integrated over one period from t = 0 once per escape
/// radius. Seeds that do not blow up are skipped; a seed that blows up passes
/// when its rotation at escape increases across the radii and does not
/// settle: with three or more radii the increments must not decay (a
/// convergent rotation has geometrically shrinking increments, a divergent
/// one constant or growing increments per decade of radius); with fewer the
/// last rotation must exceed the threshold. Whether the threshold was
/// reached is reported either way. Radii whose escape lies closer to the end
/// of the window than the time resolution are not resolved and are dropped
/// from that seed's ladder. Seeds whose integration fails are recorded and
/// skipped.
inline ConditionVerdict check_A4_empirical(const FieldSpec& spec, const std::vector<PlanarPoint>& seeds,
                                           double rot_threshold, IntegratorConfig cfg, const A4Options& opt = {})
{
    if (opt.escape_radii.empty() || !std::is_sorted(opt.escape_radii.begin(), opt.escape_radii.end())) {
        throw Error(ErrorCode::InvalidParams, "A4 escape radii must be nonempty and increasing");
    }
    cfg.t_end = spec.period;
    struct SeedResult {
        bool blowup = false;
        bool errored = false;
        bool unresolved = false;
        std::vector<double> rots;
        Witness last;
    };
    const auto results = parallel_map<SeedResult>(seeds.size(), [&](std::size_t i) {
        SeedResult r;
        try {
            for (double R : opt.escape_radii) {
                IntegratorConfig c = cfg;
                c.escape_radius = R;
                const Trajectory tr = integrate(spec, seeds[i], 0.0, c);
                if (tr.outcome() != Outcome::BlowUp) {
                    if (r.rots.empty()) {
                        return r;
                    }
                    break;
                }
                // A blow-up closer to the end of the window than the time
                // resolution stops short of the escape radius; that checkpoint
                // and all later ones are not resolved in double precision.
                if (norm(tr.final_state()) < R * (1.0 - 1e-6)) {
                    break;
                }
                r.rots.push_back(tr.final_rot());
                r.last = {tr.t_stop(), tr.final_state()};
            }
            r.blowup = !r.rots.empty();
            r.unresolved = r.rots.empty();
        } catch (const Error&) {
            r.errored = true;
        }
        return r;
    });

    ConditionVerdict v;
    v.condition = "A4";
    v.holds_at_resolution = true;
    std::size_t blowups = 0;
    std::size_t errored = 0;
    std::size_t unresolved = 0;
    std::size_t passed = 0;
    const SeedResult* worst = nullptr;
    bool worst_ok = true;
    for (const auto& r : results) {
        errored += r.errored ? 1 : 0;
        unresolved += r.unresolved ? 1 : 0;
        if (!r.blowup) {
            continue;
        }
        ++blowups;
        const std::size_t nr = r.rots.size();
        bool ok = true;
        for (std::size_t k = 1; k < nr; ++k) {
            ok = ok && r.rots[k] > r.rots[k - 1];
        }
        if (nr >= 3) {
            ok = ok && (r.rots[nr - 1] - r.rots[nr - 2]) >= opt.min_increment_ratio * (r.rots[1] - r.rots[0]);
        } else {
            ok = ok && r.rots.back() > rot_threshold;
        }
        passed += ok ? 1 : 0;
        if (!ok && v.holds_at_resolution) {
            v.holds_at_resolution = false;
            v.witness = r.last;
        }
        // Report a failing seed when there is one, else the slowest.
        if (worst == nullptr || (!ok && worst_ok) || (ok == worst_ok && r.rots.back() < worst->rots.back())) {
            worst = &r;
            worst_ok = ok;
        }
    }
    v.certificate = {{"rot_threshold", rot_threshold},
                     {"seeds", static_cast<double>(seeds.size())},
                     {"blowup_seeds", static_cast<double>(blowups)},
                     {"seeds_passed", static_cast<double>(passed)},
                     {"seeds_errored", static_cast<double>(errored)},
                     {"seeds_unresolved", static_cast<double>(unresolved)}};
    if (worst != nullptr) {
        const std::size_t nr = worst->rots.size();
        v.certificate["checkpoints_resolved"] = static_cast<double>(nr);
        for (std::size_t k = 0; k < nr; ++k) {
            v.certificate["escape_radius_" + std::to_string(k + 1)] = opt.escape_radii[k];
            v.certificate["rot_checkpoint_" + std::to_string(k + 1)] = worst->rots[k];
        }
        v.certificate["rot_plateau"] = worst->rots.back();
        v.certificate["threshold_reached"] = worst->rots.back() > rot_threshold ? 1.0 : 0.0;
        if (nr >= 3) {
            v.certificate["increment_ratio"] =
                (worst->rots[nr - 1] - worst->rots[nr - 2]) / (worst->rots[1] - worst->rots[0]);
        }
    }
    if (blowups == 0) {
        v.note = "no seed blows up; the condition holds vacuously";
    } else if (!v.holds_at_resolution) {
        v.note = "rotation of a blow-up solution levels off (increments decay or stop)";
    }
    return v;
}

// ---------------------------------------------------------------------------
// (A5): GRot_T grows without bound at infinity

struct A5Options {
    std::size_t angles = 32;
    int targets = 3;
    std::uint64_t seed = 1;
};

namespace detail {

inline constexpr double kA5Tol = 1e-9;

inline std::vector<double> a5_angles(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<double> a(n);
    for (auto& x : a) {
        x = uniform(rng, 0.0, two_pi);
    }
    return a;
}

/// Minimum of GRot_T over random points of the circle |z| = R, and its
/// argmin.
inline std::pair<double, PlanarPoint> a5_circle_min(const FieldSpec& spec, double R, const IntegratorConfig& cfg,
                                                    const std::vector<double>& angles)
{
    const auto vals = parallel_map<double>(angles.size(), [&](std::size_t i) {
        return grot_T(spec, R * PlanarPoint{std::cos(angles[i]), std::sin(angles[i])}, cfg).value;
    });
    const std::size_t k = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    return {vals[k], R * PlanarPoint{std::cos(angles[k]), std::sin(angles[k])}};
}

}  // namespace detail

/// The ladder is given in rho = |z|^2/2. Holds when the circle minima are
/// nondecreasing from some rung R on and every integer target n = 1..targets
/// is reached at some rung R_n (reported as |z| radii).
inline ConditionVerdict check_A5_empirical(const FieldSpec& spec, const std::vector<double>& rho_ladder,
                                           const IntegratorConfig& cfg, const A5Options& opt = {})
{
    if (rho_ladder.empty() || !std::is_sorted(rho_ladder.begin(), rho_ladder.end()) || rho_ladder.front() <= 0.0 ||
        opt.angles == 0 || opt.targets < 1) {
        throw Error(ErrorCode::InvalidParams, "A5 needs an increasing positive ladder, angles and targets");
    }
    const auto angles = detail::a5_angles(opt.angles, opt.seed);
    const std::size_t n = rho_ladder.size();
    std::vector<double> minima(n);
    std::vector<PlanarPoint> argmin(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::tie(minima[k], argmin[k]) = detail::a5_circle_min(spec, std::sqrt(2.0 * rho_ladder[k]), cfg, angles);
    }
    std::size_t k0 = n - 1;
    while (k0 > 0 && minima[k0 - 1] <= minima[k0] + detail::kA5Tol * (1.0 + std::abs(minima[k0]))) {
        --k0;
    }
    ConditionVerdict v;
    v.condition = "A5";
    v.holds_at_resolution = true;
    v.certificate["R"] = std::sqrt(2.0 * rho_ladder[k0]);
    for (std::size_t k = 0; k < n; ++k) {
        v.certificate["min_grot_rho_" + std::to_string(k)] = minima[k];
    }
    for (int t = 1; t <= opt.targets; ++t) {
        const double target = static_cast<double>(t) * (1.0 - detail::kA5Tol);
        std::optional<std::size_t> hit;
        for (std::size_t k = k0; k < n && !hit; ++k) {
            if (minima[k] >= target) {
                hit = k;
            }
        }
        if (!hit) {
            v.holds_at_resolution = false;
            v.witness = Witness{0.0, argmin.back()};
            v.note = "circle minima of GRot_T do not reach " + std::to_string(t) + " on the ladder";
            break;
        }
        v.certificate["R_" + std::to_string(t)] = std::sqrt(2.0 * rho_ladder[*hit]);
    }
    return v;
}

/// Fresh circle points at each certified R_n whose GRot_T is below n.
inline std::size_t revalidate_A5(const FieldSpec& spec, const ConditionVerdict& v, const IntegratorConfig& cfg,
                                 const A5Options& fresh)
{
    const auto angles = detail::a5_angles(fresh.angles, fresh.seed);
    std::size_t bad = 0;
    for (int t = 1;; ++t) {
        const auto it = v.certificate.find("R_" + std::to_string(t));
        if (it == v.certificate.end()) {
            break;
        }
        const double R = it->second;
        const auto vals = parallel_map<double>(angles.size(), [&](std::size_t i) {
            return grot_T(spec, R * PlanarPoint{std::cos(angles[i]), std::sin(angles[i])}, cfg).value;
        });
        for (double g : vals) {
            if (g < static_cast<double>(t) * (1.0 - detail::kA5Tol)) {
                ++bad;
            }
        }
    }
    return bad;
}

}  // namespace rotdeg
