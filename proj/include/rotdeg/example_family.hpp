#pragma once

// A planar Hamiltonian family with an explicit finite-time blow-up solution.
//
// In clockwise canonical polar coordinates (theta, rho):
//   H(t, theta, rho) = rho^alpha + K(t, theta, rho)
//   K = f(t, theta - theta*(t)) g(rho - rho*(t))   for t in [0, T_F), 0 on [T_F, T)
// extended T-periodically in t, with
//   rho*(t)   = sigma0 T_F / (T_F - t)^beta
//   theta*(t) = alpha (sigma0 T_F)^(alpha-1) int_0^t (T_F - s)^(-beta(alpha-1)) ds.
// The pair (theta*, rho*) solves theta' = dH/drho, rho' = -dH/dtheta and
// reaches infinity at t = T_F. Its rotation diverges iff beta(alpha-1) >= 1.
//
// The dip f and the radial bump g are built from the mollifier
// b(w) = exp(1 - 1/(1 - w^2)) on (-1, 1):
//   g(u)      = b(2u)
//   f(t, u)   = -d sigma(rho*'(t) u / d) chi(u)      (u reduced to [-pi, pi))
//   sigma(v)  = int_0^v b(s / V) ds                  (odd, sigma'(0) = 1, saturates for |v| >= V)
//   chi       = smooth plateau, 1 on [-1/4, 1/4], 0 outside (-1/2, 1/2)
//   d         = min(eps/2, beta / (2 T_F L_chi), rho*'(0) / (4 V), depth_cap)

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rotdeg/error.hpp"
#include "rotdeg/fields.hpp"
#include "rotdeg/geometry.hpp"

namespace rotdeg {

namespace detail {

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights)
{
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

inline double unit_bump(double w)
{
    const double w2 = w * w;
    if (w2 >= 1.0) {
        return 0.0;
    }
    return std::exp(1.0 - 1.0 / (1.0 - w2));
}

inline double unit_bump_prime(double w)
{
    const double w2 = w * w;
    if (w2 >= 1.0) {
        return 0.0;
    }
    const double q = 1.0 - w2;
    return unit_bump(w) * (-2.0 * w / (q * q));
}

/// 1 - b(w), accurate for small w.
inline double unit_bump_deficit(double w)
{
    const double w2 = w * w;
    if (w2 >= 1.0) {
        return 1.0;
    }
    return -std::expm1(-w2 / (1.0 - w2));
}

/// B(w) = int_0^w b(s) ds, tabulated once and evaluated by quintic Hermite
/// interpolation using the exact first and second derivatives b and b'.
class UnitBumpIntegral {
public:
    static const UnitBumpIntegral& instance()
    {
        static const UnitBumpIntegral table;
        return table;
    }

    double operator()(double w) const
    {
        const double a = std::abs(w);
        const double sign = w < 0.0 ? -1.0 : 1.0;
        if (a >= 1.0) {
            return sign * values_.back();
        }
        const double pos = a * cells;
        const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), cells - 1);
        const double s = pos - static_cast<double>(i);
        const double h = 1.0 / cells;
        const double w0 = static_cast<double>(i) * h;
        const double w1 = static_cast<double>(i + 1) * h;
        const double s2 = s * s;
        const double s3 = s2 * s;
        const double s4 = s3 * s;
        const double s5 = s4 * s;
        const double h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        const double h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        const double h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
        const double h3 = 0.5 * s3 - s4 + 0.5 * s5;
        const double h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        const double h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        const double v = h0 * values_[i] + h1 * h * unit_bump(w0) + h2 * h * h * unit_bump_prime(w0) +
                         h3 * h * h * unit_bump_prime(w1) + h4 * h * unit_bump(w1) + h5 * values_[i + 1];
        return sign * v;
    }

    /// B(1) = sup |B|.
    double total() const { return values_.back(); }

private:
    static constexpr std::size_t cells = 1024;

    UnitBumpIntegral()
    {
        std::vector<double> x;
        std::vector<double> wt;
        gauss_legendre(12, x, wt);
        values_.assign(cells + 1, 0.0);
        const double h = 1.0 / cells;
        for (std::size_t i = 0; i < cells; ++i) {
            const double a = static_cast<double>(i) * h;
            double acc = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) {
                acc += wt[k] * unit_bump(a + 0.5 * h * (x[k] + 1.0));
            }
            values_[i + 1] = values_[i] + 0.5 * h * acc;
        }
    }

    std::vector<double> values_;
};

/// Smooth step from 0 (x <= 0) to 1 (x >= 1) built from exp(-1/x).
inline double smooth_step(double x)
{
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    const double a = std::exp(-1.0 / x);
    const double b = std::exp(-1.0 / (1.0 - x));
    return a / (a + b);
}

inline double smooth_step_prime(double x)
{
    if (x <= 0.0 || x >= 1.0) {
        return 0.0;
    }
    const double a = std::exp(-1.0 / x);
    const double b = std::exp(-1.0 / (1.0 - x));
    const double da = a / (x * x);
    const double db = -b / ((1.0 - x) * (1.0 - x));
    return (da * b - a * db) / ((a + b) * (a + b));
}

}  // namespace detail

/// Radial bump g: support [-1/2, 1/2], g(0) = 1, g'(0) = 0.
inline double bump_g(double u) { return detail::unit_bump(2.0 * u); }
inline double bump_g_prime(double u) { return 2.0 * detail::unit_bump_prime(2.0 * u); }

/// Plateau cutoff chi: 1 on [-1/4, 1/4], support [-1/2, 1/2].
inline double plateau_chi(double u) { return detail::smooth_step(4.0 * (0.5 - std::abs(u))); }
inline double plateau_chi_prime(double u)
{
    const double s = u < 0.0 ? 1.0 : -1.0;
    return s * 4.0 * detail::smooth_step_prime(4.0 * (0.5 - std::abs(u)));
}

namespace detail {

inline double sup_abs_on_grid(double (*fn)(double), double lo, double hi, int n)
{
    double worst = 0.0;
    for (int i = 0; i <= n; ++i) {
        worst = std::max(worst, std::abs(fn(lo + (hi - lo) * i / n)));
    }
    return worst;
}

}  // namespace detail

/// sup |g'|, computed once on a fine grid.
inline double bump_g_lipschitz()
{
    static const double value = detail::sup_abs_on_grid(&bump_g_prime, -0.5, 0.5, 200000);
    return value;
}

/// sup |chi'|, computed once on a fine grid.
inline double plateau_chi_lipschitz()
{
    static const double value = detail::sup_abs_on_grid(&plateau_chi_prime, -0.5, 0.5, 200000);
    return value;
}

struct ExampleParams {
    double alpha = 2.0;
    double beta = 1.0;
    double sigma0 = 1.0;
    double blowup_time = 1.0;  ///< T_F
    double period = 1.0;       ///< T
    double epsilon = 0.1;      ///< sup |f| bound
    double slope_support = 2.0;  ///< V: half-width of the support of sigma'
    double depth_cap = std::numeric_limits<double>::infinity();
};

/// Value of f and its u-derivative.
struct DipValue {
    double f = 0.0;
    double f_u = 0.0;
};

class ExampleFamily;

struct SpecialSolution {
    std::shared_ptr<const ExampleFamily> family;
    double theta_star(double t) const;
    double rho_star(double t) const;
    /// Limit of the rotation number at T_F; +inf when it diverges.
    double rot_limit = 0.0;
};

class ExampleFamily {
public:
    explicit ExampleFamily(const ExampleParams& p) : p_(p)
    {
        validate();
        const double lchi = plateau_chi_lipschitz();
        depth_ = std::min({p_.depth_cap, 0.5 * p_.epsilon, p_.beta / (2.0 * p_.blowup_time * lchi),
                           rho_star_dot(0.0) / (4.0 * p_.slope_support)});
        sigma_sup_ = p_.slope_support * detail::UnitBumpIntegral::instance().total();
        if (!(depth_ * sigma_sup_ < p_.epsilon)) {
            throw Error(ErrorCode::InvalidParams, "dip depth violates sup|f| < epsilon");
        }
        if (!(depth_ * sigma_sup_ * lchi < p_.beta / p_.blowup_time)) {
            throw Error(ErrorCode::InvalidParams, "dip depth violates the upper slope bound beta/T_F");
        }
    }

    const ExampleParams& params() const { return p_; }
    double depth() const { return depth_; }
    double sigma_sup() const { return sigma_sup_; }

    /// beta(alpha - 1): governs divergence of the rotation along theta*.
    double rotation_exponent() const { return p_.beta * (p_.alpha - 1.0); }

    double rho_star(double t) const
    {
        const double tau = p_.blowup_time - t;
        return p_.sigma0 * p_.blowup_time * std::pow(tau, -p_.beta);
    }

    double rho_star_dot(double t) const
    {
        const double tau = p_.blowup_time - t;
        return p_.sigma0 * p_.blowup_time * p_.beta * std::pow(tau, -p_.beta - 1.0);
    }

    double theta_star_dot(double t) const { return p_.alpha * std::pow(rho_star(t), p_.alpha - 1.0); }

    /// Exact antiderivative; the logarithmic case is the q -> 0 limit of
    /// -expm1(q log(tau/T_F)) / q.
    double theta_star(double t) const
    {
        const double tf = p_.blowup_time;
        const double tau = tf - t;
        const double a = p_.alpha * std::pow(p_.sigma0 * tf, p_.alpha - 1.0);
        const double q = 1.0 - rotation_exponent();
        const double lr = std::log(tau / tf);
        if (q == 0.0) {
            return -a * lr;
        }
        return -a * std::pow(tf, q) * std::expm1(q * lr) / q;
    }

    double rot_limit() const
    {
        const double e = rotation_exponent();
        if (e >= 1.0) {
            return std::numeric_limits<double>::infinity();
        }
        return p_.alpha * std::pow(p_.sigma0, p_.alpha - 1.0) *
               std::pow(p_.blowup_time, p_.alpha - e) / ((1.0 - e) * two_pi);
    }

    /// sigma(v) and sigma'(v).
    double sigma(double v) const
    {
        return p_.slope_support * detail::UnitBumpIntegral::instance()(v / p_.slope_support);
    }
    double sigma_prime(double v) const { return detail::unit_bump(v / p_.slope_support); }

    /// f(t, u) and df/du for t in [0, T_F).
    DipValue dip(double t, double u) const
    {
        if (!(t >= 0.0 && t < p_.blowup_time)) {
            throw Error(ErrorCode::OutOfTimeDomain, "dip is defined on [0, T_F) only");
        }
        const double ur = u - two_pi * std::round(u / two_pi);
        const double chi = plateau_chi(ur);
        if (chi == 0.0) {
            return {};
        }
        const double rd = rho_star_dot(t);
        const double v = rd * ur / depth_;
        const double s = sigma(v);
        return {-depth_ * s * chi, -rd * sigma_prime(v) * chi - depth_ * s * plateau_chi_prime(ur)};
    }

    /// Time reduced into [0, T).
    double reduce_time(double t) const
    {
        const double tr = t - p_.period * std::floor(t / p_.period);
        return tr >= p_.period ? 0.0 : tr;
    }

    bool perturbation_active(double tr, double rho) const
    {
        return tr < p_.blowup_time && std::abs(rho - rho_star(tr)) < 0.5;
    }

    double energy(double t, CanonicalPolar c) const
    {
        const double tr = reduce_time(t);
        double h = std::pow(c.rho, p_.alpha);
        if (perturbation_active(tr, c.rho)) {
            h += dip(tr, c.theta - theta_star(tr)).f * bump_g(c.rho - rho_star(tr));
        }
        return h;
    }

    CanonicalPartials partials(double t, CanonicalPolar c) const
    {
        const double tr = reduce_time(t);
        CanonicalPartials out{0.0, c.rho > 0.0 ? p_.alpha * std::pow(c.rho, p_.alpha - 1.0) : 0.0};
        if (perturbation_active(tr, c.rho)) {
            const double dr = c.rho - rho_star(tr);
            const DipValue fv = dip(tr, c.theta - theta_star(tr));
            out.d_theta = fv.f_u * bump_g(dr);
            out.d_rho += fv.f * bump_g_prime(dr);
        }
        return out;
    }

    /// Cartesian gradient from the canonical partials:
    /// grad H = dH/dtheta (y, -x)/|z|^2 + dH/drho (x, y).
    PlanarPoint gradient(double t, PlanarPoint z) const
    {
        const double r2 = norm2(z);
        if (r2 == 0.0) {
            return {};
        }
        const CanonicalPartials d = partials(t, to_canonical(z, 0.0));
        return (d.d_theta / r2) * apply_J(z) + d.d_rho * z;
    }

    PlanarPoint field(double t, PlanarPoint z) const { return apply_J(gradient(t, z)); }

    /// Step advisory: when the moving bump approaches or crosses the point,
    /// resolve the encounter in time.
    double step_cap(double t, PlanarPoint z) const
    {
        const double tr = reduce_time(t);
        if (tr >= p_.blowup_time) {
            return std::numeric_limits<double>::infinity();
        }
        const double rho = action_radius(z);
        const double gap = rho - rho_star(tr);
        if (gap < -0.5) {
            return std::numeric_limits<double>::infinity();
        }
        const double rd = rho_star_dot(tr);
        if (gap >= 0.5) {
            return std::max(gap - 0.45, 0.05) / rd;
        }
        const double rho_dot = -partials(t, to_canonical(z, 0.0)).d_theta;
        const double closing = std::abs(rd - rho_dot);
        return closing > 0.0 ? 0.05 / closing : std::numeric_limits<double>::infinity();
    }

    /// Rates of the deviation (u, delta) = (theta - theta*, rho - rho*) at
    /// t in [0, T_F), written so that both vanish exactly at (0, 0):
    ///   u'     = alpha (rho^(alpha-1) - rho*^(alpha-1)) + f g'(delta)
    ///   delta' = -rho*' (1 - sigma' chi g) + d sigma chi' g
    std::array<double, 2> deviation_rate(double t, double u, double delta) const
    {
        const double rs = rho_star(t);
        const double rd = rho_star_dot(t);
        const double a = p_.alpha;
        double du = a * std::pow(rs, a - 1.0) * std::expm1((a - 1.0) * std::log1p(delta / rs));
        double dd = -rd;
        if (std::abs(delta) < 0.5) {
            const double ur = u - two_pi * std::round(u / two_pi);
            const double chi = plateau_chi(ur);
            if (chi > 0.0) {
                const double v = rd * ur / depth_;
                const double s = sigma(v);
                const double sp = sigma_prime(v);
                const double g = bump_g(delta);
                du += -depth_ * s * chi * bump_g_prime(delta);
                const double deficit = (1.0 - chi) + chi * (detail::unit_bump_deficit(v / p_.slope_support) +
                                                            sp * detail::unit_bump_deficit(2.0 * delta));
                dd = -rd * deficit + depth_ * s * plateau_chi_prime(ur) * g;
            }
        }
        return {du, dd};
    }

    /// Initial point of the blow-up solution.
    PlanarPoint special_initial_point() const { return from_canonical({theta_star(0.0), rho_star(0.0)}); }

    bool h1_predicate() const { return p_.beta * (p_.alpha - 2.0) >= 1.0; }
    bool a4_predicate() const { return rotation_exponent() >= 1.0; }

private:
    void validate() const
    {
        auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidParams, why); };
        if (!(p_.alpha > 1.0)) fail("alpha must exceed 1");
        if (!(p_.beta > 0.0)) fail("beta must be positive");
        if (!(p_.blowup_time > 0.0 && p_.blowup_time <= p_.period)) fail("need 0 < T_F <= T");
        if (!(p_.sigma0 * std::pow(p_.blowup_time, 1.0 - p_.beta) >= 1.0)) fail("need rho*(0) >= 1");
        if (!(p_.epsilon > 0.0)) fail("epsilon must be positive");
        if (!(p_.slope_support > 0.0)) fail("slope support V must be positive");
        if (!(p_.depth_cap > 0.0)) fail("depth cap must be positive");
    }

    ExampleParams p_;
    double depth_ = 0.0;
    double sigma_sup_ = 0.0;
};

inline double SpecialSolution::theta_star(double t) const { return family->theta_star(t); }
inline double SpecialSolution::rho_star(double t) const { return family->rho_star(t); }

inline SpecialSolution special_solution(const ExampleParams& p)
{
    auto fam = std::make_shared<const ExampleFamily>(p);
    const double lim = fam->rot_limit();
    return {fam, lim};
}

inline DipValue dip_f(const ExampleParams& p, double t, double u) { return ExampleFamily(p).dip(t, u); }

inline bool h1_predicate(const ExampleParams& p) { return p.beta * (p.alpha - 2.0) >= 1.0; }
inline bool a4_predicate(const ExampleParams& p) { return p.beta * (p.alpha - 1.0) >= 1.0; }

/// The special solution as a reference orbit for the integrator.
class ExampleReference : public ReferenceOrbit {
public:
    explicit ExampleReference(std::shared_ptr<const ExampleFamily> fam) : fam_(std::move(fam)) {}
    double period() const override { return fam_->params().period; }
    double window_length() const override { return fam_->params().blowup_time; }
    CanonicalPolar state(double s) const override { return {fam_->theta_star(s), fam_->rho_star(s)}; }
    std::array<double, 2> deviation_rate(double s, double u, double delta) const override
    {
        return fam_->deviation_rate(s, u, delta);
    }
    /// Twice the support radius of g, so trajectories leave the chart only
    /// once they are clear of the perturbation.
    double capture() const override { return 1.0; }

private:
    std::shared_ptr<const ExampleFamily> fam_;
};

/// Hamiltonian field of the family. K vanishes for rho < 1/2 automatically
/// because rho*(t) >= rho*(0) >= 1.
inline FieldSpec make_example_field(const ExampleParams& p)
{
    auto fam = std::make_shared<const ExampleFamily>(p);
    FieldSpec spec;
    spec.name = "example_family";
    spec.period = p.period;
    spec.eval = [fam](double t, PlanarPoint z) { return fam->field(t, z); };
    spec.hamiltonian = Hamiltonian{
        [fam](double t, PlanarPoint z) { return fam->energy(t, to_canonical(z, 0.0)); },
        [fam](double t, PlanarPoint z) { return fam->gradient(t, z); },
        [fam](double t, CanonicalPolar c) { return fam->partials(t, c); },
    };
    if (p.blowup_time < p.period) {
        spec.seams = {0.0, p.blowup_time};
    } else {
        spec.seams = {0.0};
    }
    spec.step_cap = [fam](double t, PlanarPoint z) { return fam->step_cap(t, z); };
    spec.reference = std::make_shared<const ExampleReference>(fam);
    return spec;
}

/// Largest residual of theta' = dH/drho, rho' = -dH/dtheta along the special
/// solution, each term relative to the size of the derivative it checks.
inline double residual_special_solution(const ExampleParams& p, std::span<const double> t_grid)
{
    const ExampleFamily fam(p);
    double worst = 0.0;
    for (double t : t_grid) {
        const CanonicalPolar c{fam.theta_star(t), fam.rho_star(t)};
        const CanonicalPartials d = fam.partials(t, c);
        const double th_dot = fam.theta_star_dot(t);
        const double rh_dot = fam.rho_star_dot(t);
        const double r = std::abs(th_dot - d.d_rho) / std::max(1.0, std::abs(th_dot)) +
                         std::abs(rh_dot + d.d_theta) / std::max(1.0, std::abs(rh_dot));
        worst = std::max(worst, r);
    }
    return worst;
}

}  // namespace rotdeg
