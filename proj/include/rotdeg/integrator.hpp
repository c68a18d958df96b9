#pragma once

// Adaptive Dormand-Prince 5(4) integration of z' = F(t, z) augmented with the
// rotation channel rot' = <F, Jz> / (2 pi |z|^2). Both ride the same stages,
// so the state and its rotation are accurate to the same order.
//
// A run stops at the first of:
//   |z| <= origin_radius   -> OriginHit{t_hit}
//   |z| >= escape_radius   -> BlowUp{t_f_est}
//   t == t_end             -> Complete
// Events are located by bisection on the dense output.
//
// When the field carries a ReferenceOrbit and the start lies in its capture
// tube, the run begins in the deviation chart (u, delta) and falls back to
// Cartesian coordinates once |delta| exceeds the capture width or the
// reference window ends. In that chart the angle is known directly, so
// rot = (theta - theta(t0)) / 2 pi needs no separate channel.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rotdeg/error.hpp"
#include "rotdeg/fields.hpp"
#include "rotdeg/geometry.hpp"

namespace rotdeg {

struct IntegratorConfig {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_min = 1e-15;
    double escape_radius = 1e3;
    double origin_radius = 1e-8;
    double t_end = two_pi;
    long max_steps = 2'000'000;
    /// Extra dense samples are stored so that consecutive samples differ by
    /// at most this many turns.
    double max_sample_turn = 0.125;
    /// Use the field's reference orbit, when it has one.
    bool use_reference = true;
    /// Stop at B[0, origin_radius]. Maps that do not need rotation (the
    /// Poincare displacement) may pass through the origin.
    bool detect_origin = true;

    void validate() const
    {
        auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
        if (!(rtol > 0.0 && atol > 0.0)) fail("tolerances must be positive");
        if (!(h_min > 0.0)) fail("h_min must be positive");
        if (!(origin_radius > 0.0 && origin_radius < escape_radius)) fail("need 0 < origin_radius < escape_radius");
        if (!std::isfinite(t_end)) fail("t_end must be finite");
        if (max_steps <= 0) fail("max_steps must be positive");
        if (!(max_sample_turn > 0.0 && max_sample_turn < 0.5)) fail("max_sample_turn must lie in (0, 0.5)");
    }
};

enum class Outcome { Complete, BlowUp, OriginHit };

inline const char* to_string(Outcome o)
{
    switch (o) {
    case Outcome::Complete: return "Complete";
    case Outcome::BlowUp: return "BlowUp";
    case Outcome::OriginHit: return "OriginHit";
    }
    return "?";
}

struct Classification {
    Outcome outcome = Outcome::Complete;
    /// BlowUp: extrapolated blow-up time. OriginHit: time of entry into
    /// B[0, origin_radius]. Complete: end time.
    double t_event = 0.0;
    /// BlowUp only: log-log fit exponent and RMS residual.
    double fit_exponent = 0.0;
    double fit_residual = 0.0;
    /// BlowUp only: time at which |z| reached the escape radius.
    double t_escape = 0.0;
};

struct TrajectorySample {
    double t = 0.0;
    PlanarPoint z;
    double rot = 0.0;
};

namespace detail {

using State = std::array<double, 3>;

enum class Chart { Cartesian, Deviation };

/// Continuous extension of one accepted step (Hairer's dopri5 form).
struct DenseSegment {
    double t0 = 0.0;
    double h = 0.0;
    std::array<State, 5> c{};
    Chart chart = Chart::Cartesian;
    /// Deviation chart only: window origin, and the rotation and lifted
    /// angle at chart entry.
    double window_start = 0.0;
    double rot_entry = 0.0;
    double theta_entry = 0.0;

    State raw(double t) const
    {
        const double s = (t - t0) / h;
        const double s1 = 1.0 - s;
        State out{};
        for (int i = 0; i < 3; ++i) {
            out[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        return out;
    }
};

struct PointValue {
    PlanarPoint z;
    double rot = 0.0;
    double rho = 0.0;
    /// Lifted angle, known directly in the deviation chart (NaN otherwise).
    double theta = std::numeric_limits<double>::quiet_NaN();
};

inline PointValue chart_point(Chart chart, const State& y, double t, const ReferenceOrbit* ref, double window_start,
                              double rot_entry, double theta_entry)
{
    PointValue out;
    if (chart == Chart::Cartesian) {
        out.z = {y[0], y[1]};
        out.rot = y[2];
        out.rho = action_radius(out.z);
        return out;
    }
    const CanonicalPolar c = ref->state(t - window_start);
    out.theta = c.theta + y[0];
    out.rho = c.rho + y[1];
    out.z = from_canonical({out.theta, out.rho});
    out.rot = rot_entry + (out.theta - theta_entry) / two_pi;
    return out;
}

inline PointValue segment_point(const DenseSegment& seg, const ReferenceOrbit* ref, double t)
{
    return chart_point(seg.chart, seg.raw(t), t, ref, seg.window_start, seg.rot_entry, seg.theta_entry);
}

}  // namespace detail

class Trajectory {
public:
    const std::vector<TrajectorySample>& samples() const { return samples_; }
    /// Unwrapped clockwise lift of the samples; empty for OriginHit.
    const std::vector<PolarLift>& lift() const { return lift_; }
    const Classification& classification() const { return cls_; }
    Outcome outcome() const { return cls_.outcome; }
    double t_start() const { return samples_.front().t; }
    double t_stop() const { return samples_.back().t; }
    PlanarPoint final_state() const { return samples_.back().z; }
    double final_rot() const { return samples_.back().rot; }
    long steps() const { return steps_; }
    long rejected() const { return rejected_; }
    /// Time at which the run left the deviation chart (NaN if it never used it
    /// or never left it).
    double chart_exit_time() const { return chart_exit_; }
    bool used_reference() const { return used_reference_; }

    bool covers(double t) const
    {
        const double lo = std::min(t_start(), t_stop());
        const double hi = std::max(t_start(), t_stop());
        return t >= lo && t <= hi;
    }

    /// Dense-output state and rotation at t within the integrated range.
    TrajectorySample at(double t) const
    {
        if (!covers(t)) {
            throw Error(ErrorCode::OutOfRange, "time outside the integrated range");
        }
        if (segments_.empty()) {
            return samples_.front();
        }
        const bool forward = t_stop() >= t_start();
        auto it = std::lower_bound(segments_.begin(), segments_.end(), t,
                                   [forward](const detail::DenseSegment& s, double v) {
                                       return forward ? s.t0 + s.h < v : s.t0 + s.h > v;
                                   });
        if (it == segments_.end()) {
            --it;
        }
        const auto p = detail::segment_point(*it, reference_.get(), t);
        return {t, p.z, p.rot};
    }

    /// Rotation from the unwrapped lift, (theta(i) - theta(0)) / 2 pi.
    double lift_rot(std::size_t i) const { return (lift_[i].theta - lift_[0].theta) / two_pi; }

private:
    friend class Integrator;
    std::vector<TrajectorySample> samples_;
    std::vector<double> direct_theta_;  // parallel to samples_, NaN outside the deviation chart
    std::vector<PolarLift> lift_;
    std::vector<detail::DenseSegment> segments_;
    std::shared_ptr<const ReferenceOrbit> reference_;
    Classification cls_;
    long steps_ = 0;
    long rejected_ = 0;
    double chart_exit_ = std::numeric_limits<double>::quiet_NaN();
    bool used_reference_ = false;
};

/// Fit rho(t) ~ C (t_f - t)^(-p) to samples (t_i, rho_i) by log-log least
/// squares, scanning t_f beyond the last sample.
struct BlowUpFit {
    double t_f = 0.0;
    double exponent = 0.0;
    double residual = 0.0;
};

inline BlowUpFit fit_blowup(const std::vector<double>& ts, const std::vector<double>& rhos, double direction = 1.0)
{
    const std::size_t n = ts.size();
    BlowUpFit best{ts.empty() ? 0.0 : ts.back(), 0.0, std::numeric_limits<double>::infinity()};
    if (n < 3) {
        return best;
    }
    const double span = std::abs(ts.back() - ts.front());
    auto eval = [&](double gap) {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        const double tf = ts.back() + direction * gap;
        std::vector<double> xs(n), ys(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = std::log(std::abs(tf - ts[i]));
            ys[i] = std::log(rhos[i]);
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
        }
        const double dn = static_cast<double>(n);
        const double den = dn * sxx - sx * sx;
        if (den == 0.0) {
            return BlowUpFit{tf, 0.0, std::numeric_limits<double>::infinity()};
        }
        const double slope = (dn * sxy - sx * sy) / den;
        const double icpt = (sy - slope * sx) / dn;
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = ys[i] - (icpt + slope * xs[i]);
            ss += r * r;
        }
        return BlowUpFit{tf, -slope, std::sqrt(ss / dn)};
    };
    // Log-spaced scan of the gap t_f - t_last, then golden-section refinement.
    const double lo = std::log(span * 1e-9);
    const double hi = std::log(span * 1e2);
    const int scan = 120;
    double best_x = lo;
    for (int i = 0; i <= scan; ++i) {
        const double x = lo + (hi - lo) * i / scan;
        const auto f = eval(std::exp(x));
        if (f.residual < best.residual) {
            best = f;
            best_x = x;
        }
    }
    double a = best_x - (hi - lo) / scan;
    double b = best_x + (hi - lo) / scan;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - g * (b - a);
    double x2 = a + g * (b - a);
    auto f1 = eval(std::exp(x1));
    auto f2 = eval(std::exp(x2));
    for (int it = 0; it < 80; ++it) {
        if (f1.residual < f2.residual) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = eval(std::exp(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = eval(std::exp(x2));
        }
    }
    for (const auto& f : {f1, f2}) {
        if (f.residual < best.residual) {
            best = f;
        }
    }
    return best;
}

class Integrator {
public:
    Integrator(const FieldSpec& spec, const IntegratorConfig& cfg) : spec_(spec), cfg_(cfg) { cfg_.validate(); }

    Trajectory run(PlanarPoint z0, double t0) const
    {
        Trajectory traj;
        traj.reference_ = spec_.reference;
        const double dir = cfg_.t_end >= t0 ? 1.0 : -1.0;
        push_sample(traj, {t0, z0, 0.0}, std::numeric_limits<double>::quiet_NaN());

        const double r0 = norm(z0);
        if (cfg_.detect_origin && r0 <= cfg_.origin_radius) {
            traj.cls_ = {Outcome::OriginHit, t0};
            return traj;
        }
        if (r0 >= cfg_.escape_radius) {
            traj.cls_ = {Outcome::BlowUp, t0};
            traj.cls_.t_escape = t0;
            finish_lift(traj);
            return traj;
        }
        if (cfg_.t_end == t0) {
            traj.cls_ = {Outcome::Complete, t0};
            finish_lift(traj);
            return traj;
        }

        Run run{traj, dir};
        run.t = t0;
        run.y = {z0.x, z0.y, 0.0};
        try_enter_reference(run, z0);

        run.start_on_seam = is_boundary(run, t0);
        run.k1 = rhs(run, t0, run.y, t0, t0 + dir, dir < 0.0 && run.start_on_seam);
        double h = initial_step(run);

        long steps = 0;
        for (;;) {
            if (run.t == cfg_.t_end) {
                traj.cls_ = {Outcome::Complete, run.t};
                break;
            }
            if (++steps > cfg_.max_steps) {
                throw Error(ErrorCode::MaxStepsExceeded, "after " + std::to_string(cfg_.max_steps) +
                                                              " steps at t=" + num(run.t) + " " + where(run));
            }
            // Clip to t_end, to the next seam or window boundary and to the
            // field's advisory cap.
            double habs = std::abs(h);
            const double remaining = std::abs(cfg_.t_end - run.t);
            bool end_on_seam = false;
            double target = cfg_.t_end;
            if (habs >= remaining) {
                habs = remaining;
            }
            if (auto b = next_boundary(run); b && std::abs(*b - run.t) <= habs) {
                habs = std::abs(*b - run.t);
                target = *b;
                end_on_seam = true;
            } else if (habs == remaining) {
                target = cfg_.t_end;
                end_on_seam = is_boundary(run, cfg_.t_end);
            } else {
                target = run.t + dir * habs;
            }
            if (run.chart == detail::Chart::Cartesian && spec_.step_cap) {
                const double cap = spec_.step_cap(run.t, {run.y[0], run.y[1]});
                if (cap < habs) {
                    habs = cap;
                    target = run.t + dir * habs;
                    end_on_seam = false;
                }
            }
            if (habs < cfg_.h_min) {
                throw Error(ErrorCode::StepUnderflow,
                            "step " + num(habs) + " below h_min at t=" + num(run.t) + " " + where(run));
            }
            const double hs = target - run.t;  // signed, exact endpoint
            if (!run.k1_valid) {
                run.k1 = rhs(run, run.t, run.y, run.t, target, dir < 0.0 && run.start_on_seam);
                run.k1_valid = true;
            }

            const bool hi_is_seam = dir > 0.0 ? end_on_seam : run.start_on_seam;
            StepResult sr = attempt(run, hs, hi_is_seam);
            if (!sr.ok) {
                ++traj.rejected_;
                h = dir * habs * std::clamp(0.9 * std::pow(sr.err, -0.2), 0.2, 1.0);
                if (!std::isfinite(sr.err)) {
                    h = dir * habs * 0.2;
                }
                if (std::abs(h) < cfg_.h_min) {
                    throw Error(ErrorCode::StepUnderflow, "step rejected below h_min at t=" + num(run.t) + " " +
                                                              where(run) + " (possible non-smooth locus)");
                }
                continue;
            }

            detail::DenseSegment seg{run.t, hs, sr.dense, run.chart, run.window_start, run.rot_entry,
                                     run.theta_entry};
            traj.segments_.push_back(seg);
            ++traj.steps_;

            if (auto ev = locate_events(seg); ev) {
                append_samples(traj, seg, run.t, ev->first);
                push_point(traj, ev->first, detail::segment_point(seg, spec_.reference.get(), ev->first));
                if (ev->second == Outcome::OriginHit) {
                    traj.cls_ = {Outcome::OriginHit, ev->first};
                } else {
                    traj.cls_ = blowup_classification(traj, ev->first, dir);
                }
                break;
            }

            append_samples(traj, seg, run.t, target);
            run.t = target;
            run.y = sr.y;
            run.comp = sr.comp;
            const auto pv = current_point(run);
            push_point(traj, run.t, pv);

            // FSAL unless the step ended on a seam, where the next step needs
            // the one-sided value from the other side.
            run.start_on_seam = end_on_seam;
            if (end_on_seam) {
                run.k1_valid = false;
            } else {
                run.k1 = sr.k_last;
            }
            const double fac = sr.err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(sr.err, -0.2), 0.2, 5.0);
            h = dir * habs * fac;

            if (run.chart == detail::Chart::Deviation && must_leave_reference(run)) {
                leave_reference(run, pv);
                run.start_on_seam = is_boundary(run, run.t);
                run.k1_valid = false;
            }
        }
        finish_lift(traj);
        return traj;
    }

private:
    using State = detail::State;
    using Chart = detail::Chart;

    struct Run {
        Trajectory& traj;
        double dir = 1.0;
        double t = 0.0;
        State y{};
        State comp{};  // Kahan compensation of y
        State k1{};
        bool k1_valid = true;
        bool start_on_seam = false;
        Chart chart = Chart::Cartesian;
        double window_start = 0.0;
        double rot_entry = 0.0;
        double theta_entry = 0.0;
    };

    struct StepResult {
        bool ok = false;
        double err = 0.0;
        State y{};
        State comp{};
        State k_last{};
        std::array<State, 5> dense{};
    };

    static std::string num(double v)
    {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    }

    std::string where(const Run& run) const
    {
        const auto p = current_point(run);
        return "z=(" + num(p.z.x) + ", " + num(p.z.y) + ")";
    }

    detail::PointValue current_point(const Run& run) const
    {
        return detail::chart_point(run.chart, run.y, run.t, spec_.reference.get(), run.window_start, run.rot_entry,
                                   run.theta_entry);
    }

    void try_enter_reference(Run& run, PlanarPoint z0) const
    {
        const ReferenceOrbit* ref = spec_.reference.get();
        if (!cfg_.use_reference || ref == nullptr) {
            return;
        }
        const double P = ref->period();
        const double start = P * std::floor(run.t / P);
        const double s = run.t - start;
        const double len = ref->window_length();
        if (!(s < len) || (run.dir < 0.0 && s <= 0.0)) {
            return;
        }
        const CanonicalPolar c = ref->state(s);
        const CanonicalPolar p = to_canonical(z0, c.theta);
        if (!(std::abs(p.rho - c.rho) < ref->capture())) {
            return;
        }
        // A start within rounding of the reference is the reference point:
        // the absolute coordinates cannot resolve anything closer, and the
        // deviation chart would otherwise amplify the rounding.
        double u = p.theta - c.theta;
        double d = p.rho - c.rho;
        constexpr double snap = 8.0 * std::numeric_limits<double>::epsilon();
        if (std::abs(u) <= snap * std::max(1.0, std::abs(c.theta)) && std::abs(d) <= snap * c.rho) {
            u = 0.0;
            d = 0.0;
        }
        run.chart = Chart::Deviation;
        run.window_start = start;
        run.rot_entry = 0.0;
        run.theta_entry = c.theta + u;
        run.y = {u, d, 0.0};
        run.comp = {};
        run.traj.used_reference_ = true;
        run.traj.direct_theta_.back() = run.theta_entry;
    }

    bool must_leave_reference(const Run& run) const
    {
        const ReferenceOrbit* ref = spec_.reference.get();
        const double s = run.t - run.window_start;
        const bool at_edge = run.dir > 0.0 ? s >= ref->window_length() : s <= 0.0;
        return at_edge || !(std::abs(run.y[1]) <= ref->capture());
    }

    void leave_reference(Run& run, const detail::PointValue& pv) const
    {
        run.chart = Chart::Cartesian;
        run.y = {pv.z.x, pv.z.y, pv.rot};
        run.comp = {};
        run.traj.chart_exit_ = run.t;
    }

    bool is_seam(double t) const
    {
        if (spec_.seams.empty()) {
            return false;
        }
        const double T = spec_.period;
        const double tr = t - T * std::floor(t / T);
        for (double s : spec_.seams) {
            if (tr == s) {
                return true;
            }
        }
        return false;
    }

    bool is_boundary(const Run& run, double t) const
    {
        if (run.chart == Chart::Deviation) {
            const double s = t - run.window_start;
            if (s == 0.0 || s == spec_.reference->window_length()) {
                return true;
            }
        }
        return is_seam(t);
    }

    /// First seam (or deviation-window edge) strictly beyond t in the
    /// integration direction.
    std::optional<double> next_boundary(const Run& run) const
    {
        const double t = run.t;
        const double dir = run.dir;
        std::optional<double> best;
        auto consider = [&](double c) {
            if ((c - t) * dir > 0.0 && (!best || (c - *best) * dir < 0.0)) {
                best = c;
            }
        };
        if (!spec_.seams.empty()) {
            const double T = spec_.period;
            const double base = T * std::floor(t / T);
            for (int k = -1; k <= 2; ++k) {
                for (double s : spec_.seams) {
                    consider(base + k * T + s);
                }
            }
        }
        if (run.chart == Chart::Deviation) {
            consider(run.window_start);
            consider(run.window_start + spec_.reference->window_length());
        }
        return best;
    }

    /// Right-hand side at stage time s of a step between t_a and t_b. When the
    /// upper end of that interval is a seam, evaluate just inside it.
    State rhs(const Run& run, double s, const State& y, double t_a, double t_b, bool hi_is_seam) const
    {
        const double lo = std::min(t_a, t_b);
        const double hi = std::max(t_a, t_b);
        double se = s;
        if (hi_is_seam && s >= hi) {
            se = std::nextafter(hi, lo);
        }
        if (run.chart == Chart::Deviation) {
            const auto d = spec_.reference->deviation_rate(se - run.window_start, y[0], y[1]);
            return {d[0], d[1], 0.0};
        }
        const PlanarPoint z{y[0], y[1]};
        const PlanarPoint f = spec_.eval(se, z);
        const double r2 = norm2(z);
        const double w = r2 > 0.0 ? dot(f, apply_J(z)) / (two_pi * r2) : 0.0;
        return {f.x, f.y, w};
    }

    /// Per-component error scales. In the deviation chart they mirror the
    /// Cartesian atol + rtol |z| bound: an angle error of rtol + atol/|z| and a
    /// rho error of (atol + rtol |z|) |z|.
    State scales(const Run& run, double t, const State& a, double tb, const State& b) const
    {
        if (run.chart == Chart::Cartesian) {
            State sc{};
            for (int i = 0; i < 3; ++i) {
                sc[i] = cfg_.atol + cfg_.rtol * std::max(std::abs(a[i]), std::abs(b[i]));
            }
            return sc;
        }
        const ReferenceOrbit* ref = spec_.reference.get();
        auto radius = [&](double tt, const State& y) {
            const double s = std::min(tt - run.window_start, std::nextafter(ref->window_length(), 0.0));
            return std::sqrt(2.0 * std::max(ref->state(s).rho + y[1], 0.0));
        };
        const double r = std::min(radius(t, a), radius(tb, b));
        return {cfg_.rtol + cfg_.atol / std::max(r, cfg_.origin_radius), (cfg_.atol + cfg_.rtol * r) * r,
                std::numeric_limits<double>::infinity()};
    }

    int error_components(const Run& run) const { return run.chart == Chart::Cartesian ? 3 : 2; }

    double initial_step(const Run& run) const
    {
        const double t = run.t;
        const double dir = run.dir;
        const State& y = run.y;
        const State& f0 = run.k1;
        const int nc = error_components(run);
        const State sc = scales(run, t, y, t, y);
        double d0 = 0.0, d1 = 0.0;
        for (int i = 0; i < nc; ++i) {
            d0 += (y[i] / sc[i]) * (y[i] / sc[i]);
            d1 += (f0[i] / sc[i]) * (f0[i] / sc[i]);
        }
        d0 = std::sqrt(d0 / nc);
        d1 = std::sqrt(d1 / nc);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, std::abs(cfg_.t_end - t));
        if (auto b = next_boundary(run)) {
            h0 = std::min(h0, 0.5 * std::abs(*b - t));
        }
        State y1{};
        for (int i = 0; i < 3; ++i) {
            y1[i] = y[i] + dir * h0 * f0[i];
        }
        const State f1 = rhs(run, t + dir * h0, y1, t, t + dir * h0, false);
        double d2 = 0.0;
        for (int i = 0; i < nc; ++i) {
            d2 += ((f1[i] - f0[i]) / sc[i]) * ((f1[i] - f0[i]) / sc[i]);
        }
        d2 = std::sqrt(d2 / nc) / h0;
        const double dm = std::max(d1, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        return dir * std::max(std::min(100.0 * h0, h1), cfg_.h_min);
    }

    StepResult attempt(const Run& run, double h, bool hi_is_seam) const
    {
        constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        constexpr double a21 = 1.0 / 5;
        constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
        constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                         a65 = -5103.0 / 18656;
        constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                         a76 = 11.0 / 84;
        constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                         e6 = 22.0 / 525, e7 = -1.0 / 40;
        constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                         d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                         d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

        const double t = run.t;
        const State& y = run.y;
        const State& comp = run.comp;
        const State& k1 = run.k1;
        const double tb = t + h;
        auto f = [&](double s, const State& ys) { return rhs(run, s, ys, t, tb, hi_is_seam); };
        auto stage = [&](std::initializer_list<std::pair<double, const State*>> terms) {
            State out = y;
            for (int i = 0; i < 3; ++i) {
                double acc = 0.0;
                for (const auto& [a, k] : terms) {
                    acc += a * (*k)[i];
                }
                out[i] += h * acc;
            }
            return out;
        };
        StepResult res;
        const State k2 = f(t + c2 * h, stage({{a21, &k1}}));
        const State k3 = f(t + c3 * h, stage({{a31, &k1}, {a32, &k2}}));
        const State k4 = f(t + c4 * h, stage({{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        const State k5 = f(t + c5 * h, stage({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        const State k6 = f(tb, stage({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));

        State ynew{};
        State cnew{};
        for (int i = 0; i < 3; ++i) {
            const double incr = h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
            // Kahan-compensated update.
            const double yc = incr - comp[i];
            const double s = y[i] + yc;
            cnew[i] = (s - y[i]) - yc;
            ynew[i] = s;
        }
        const State k7 = f(tb, ynew);

        const int nc = error_components(run);
        bool finite = true;
        for (int i = 0; i < 3; ++i) {
            finite = finite && std::isfinite(ynew[i]) && std::isfinite(k7[i]);
        }
        if (!finite) {
            res.err = std::numeric_limits<double>::infinity();
            return res;
        }
        const State sc = scales(run, t, y, tb, ynew);
        double err = 0.0;
        for (int i = 0; i < nc; ++i) {
            const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            err += (ei / sc[i]) * (ei / sc[i]);
        }
        err = std::sqrt(err / nc);
        res.err = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
        if (!(res.err <= 1.0)) {
            return res;
        }
        res.ok = true;
        res.y = ynew;
        res.comp = cnew;
        res.k_last = k7;
        for (int i = 0; i < 3; ++i) {
            const double ydiff = ynew[i] - y[i];
            const double bspl = h * k1[i] - ydiff;
            res.dense[0][i] = y[i];
            res.dense[1][i] = ydiff;
            res.dense[2][i] = bspl;
            res.dense[3][i] = ydiff - h * k7[i] - bspl;
            res.dense[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }
        return res;
    }

    double segment_radius(const detail::DenseSegment& seg, double t) const
    {
        if (seg.chart == Chart::Cartesian) {
            const auto s = seg.raw(t);
            return std::hypot(s[0], s[1]);
        }
        const auto p = detail::segment_point(seg, spec_.reference.get(), t);
        return std::sqrt(2.0 * std::max(p.rho, 0.0));
    }

    /// First origin or escape crossing within an accepted step.
    std::optional<std::pair<double, Outcome>> locate_events(const detail::DenseSegment& seg) const
    {
        constexpr int probes = 8;
        double prev_t = seg.t0;
        for (int i = 1; i <= probes; ++i) {
            const double tt = (i == probes) ? seg.t0 + seg.h : seg.t0 + seg.h * i / probes;
            const double r = segment_radius(seg, tt);
            const bool hit_origin = cfg_.detect_origin && r <= cfg_.origin_radius;
            const bool hit_escape = r >= cfg_.escape_radius;
            if (hit_origin || hit_escape) {
                const double level = hit_origin ? cfg_.origin_radius : cfg_.escape_radius;
                const double sgn = hit_origin ? -1.0 : 1.0;  // g(t) = sgn (r - level) crosses to >= 0
                double a = prev_t;
                double b = tt;
                // Bisect to machine resolution in t. A reference orbit that is
                // singular at its window end can cross the escape level between
                // the last representable time and the singularity; the event
                // is then placed at the last time with a finite state.
                for (int it = 0; it < 200; ++it) {
                    const double m = 0.5 * (a + b);
                    if (m == a || m == b) {
                        break;
                    }
                    if (sgn * (segment_radius(seg, m) - level) >= 0.0) {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                if (!std::isfinite(segment_radius(seg, b))) {
                    b = a;
                }
                return std::make_pair(b, hit_origin ? Outcome::OriginHit : Outcome::BlowUp);
            }
            prev_t = tt;
        }
        return std::nullopt;
    }

    static void push_sample(Trajectory& traj, const TrajectorySample& s, double theta)
    {
        traj.samples_.push_back(s);
        traj.direct_theta_.push_back(theta);
    }

    static void push_point(Trajectory& traj, double t, const detail::PointValue& p)
    {
        push_sample(traj, {t, p.z, p.rot}, p.theta);
    }

    /// Dense samples strictly inside (t_a, t_b) so that consecutive stored
    /// samples differ by at most max_sample_turn turns. Cartesian segments
    /// are split uniformly; deviation segments, whose single step may carry
    /// many turns concentrated near a blow-up, are bisected to a depth of
    /// kMaxSampleDepth (their lift is exact regardless, so a capped segment
    /// only thins the stored samples).
    void append_samples(Trajectory& traj, const detail::DenseSegment& seg, double t_a, double t_b) const
    {
        if (seg.chart != Chart::Cartesian) {
            const auto* ref = spec_.reference.get();
            append_bisected(traj, seg, t_a, detail::segment_point(seg, ref, t_a).rot, t_b,
                            detail::segment_point(seg, ref, t_b).rot, 0);
            return;
        }
        const auto sa = seg.raw(t_a);
        const auto sb = seg.raw(t_b);
        const double turns = std::abs(sb[2] - sa[2]);
        const int n = static_cast<int>(std::ceil(turns / cfg_.max_sample_turn));
        for (int i = 1; i < n; ++i) {
            const double tt = t_a + (t_b - t_a) * i / n;
            const auto s = seg.raw(tt);
            push_sample(traj, {tt, {s[0], s[1]}, s[2]}, std::numeric_limits<double>::quiet_NaN());
        }
    }

    static constexpr int kMaxSampleDepth = 12;

    void append_bisected(Trajectory& traj, const detail::DenseSegment& seg, double t_a, double rot_a, double t_b,
                         double rot_b, int depth) const
    {
        if (std::abs(rot_b - rot_a) <= cfg_.max_sample_turn || depth >= kMaxSampleDepth) {
            return;
        }
        const double tm = 0.5 * (t_a + t_b);
        if (tm == t_a || tm == t_b) {
            return;
        }
        const auto pm = detail::segment_point(seg, spec_.reference.get(), tm);
        append_bisected(traj, seg, t_a, rot_a, tm, pm.rot, depth + 1);
        push_point(traj, tm, pm);
        append_bisected(traj, seg, tm, pm.rot, t_b, rot_b, depth + 1);
    }

    Classification blowup_classification(const Trajectory& traj, double t_escape, double dir) const
    {
        // rho over the last decade before escape, sampled geometrically towards
        // the upper end of each step so that long final steps still give
        // enough points.
        const double rho_esc = 0.5 * cfg_.escape_radius * cfg_.escape_radius;
        std::vector<std::pair<double, double>> pairs;
        for (auto it = traj.segments_.rbegin(); it != traj.segments_.rend(); ++it) {
            const double lo = it->t0;
            const double hi = (it == traj.segments_.rbegin()) ? t_escape : it->t0 + it->h;
            bool any = false;
            for (int k = 0; k <= 60; ++k) {
                const double tt = k == 0 ? hi : hi - (hi - lo) * std::ldexp(1.0, 1 - k);
                const auto p = detail::segment_point(*it, spec_.reference.get(), tt);
                if (p.rho >= 0.1 * rho_esc && std::isfinite(p.rho)) {
                    pairs.emplace_back(tt, p.rho);
                    any = true;
                }
            }
            if (!any) {
                break;
            }
        }
        std::sort(pairs.begin(), pairs.end(), [dir](auto a, auto b) { return a.first * dir < b.first * dir; });
        pairs.erase(std::unique(pairs.begin(), pairs.end(), [](auto a, auto b) { return a.first == b.first; }),
                    pairs.end());
        std::vector<double> ts;
        std::vector<double> rhos;
        for (auto [tt, rr] : pairs) {
            ts.push_back(tt);
            rhos.push_back(rr);
        }
        Classification c{Outcome::BlowUp, t_escape};
        c.t_escape = t_escape;
        if (ts.size() >= 3) {
            const BlowUpFit fit = fit_blowup(ts, rhos, dir);
            c.t_event = fit.t_f;
            c.fit_exponent = fit.exponent;
            c.fit_residual = fit.residual;
        }
        return c;
    }

    void finish_lift(Trajectory& traj) const
    {
        if (traj.cls_.outcome == Outcome::OriginHit) {
            return;
        }
        if (!cfg_.detect_origin) {
            // The lift is undefined if the run touched the origin.
            for (const auto& s : traj.samples_) {
                if (s.z.x == 0.0 && s.z.y == 0.0) {
                    return;
                }
            }
        }
        // Cartesian runs of samples are unwrapped from their predecessor;
        // deviation-chart samples carry their lifted angle.
        auto& lift = traj.lift_;
        lift.reserve(traj.samples_.size());
        double hint = clockwise_angle(traj.samples_.front().z);
        std::size_t i = 0;
        while (i < traj.samples_.size()) {
            if (!std::isnan(traj.direct_theta_[i])) {
                lift.push_back({traj.direct_theta_[i], norm(traj.samples_[i].z)});
                hint = traj.direct_theta_[i];
                ++i;
                continue;
            }
            std::size_t j = i;
            std::vector<PlanarPoint> pts;
            while (j < traj.samples_.size() && std::isnan(traj.direct_theta_[j])) {
                pts.push_back(traj.samples_[j].z);
                ++j;
            }
            if (!lift.empty()) {
                const double jump = std::abs(nearest_representative(clockwise_angle(pts.front()), hint) - hint);
                if (jump >= std::numbers::pi * (1.0 - 1e-12)) {
                    throw Error(ErrorCode::UnderSampled, "angular gap of half a turn at a chart switch");
                }
            }
            for (const auto& l : unwrap_lift(pts, hint)) {
                lift.push_back(l);
            }
            hint = lift.back().theta;
            i = j;
        }
    }

    const FieldSpec& spec_;
    IntegratorConfig cfg_;
};

inline Trajectory integrate(const FieldSpec& spec, PlanarPoint z0, double t0, const IntegratorConfig& cfg)
{
    return Integrator(spec, cfg).run(z0, t0);
}

struct PoincareResult {
    Outcome outcome = Outcome::Complete;
    std::optional<PlanarPoint> image;
    Classification classification;
};

/// phi(T, z0): the state after one period, when the run is Complete.
inline PoincareResult poincare_map(const FieldSpec& spec, PlanarPoint z0, IntegratorConfig cfg)
{
    cfg.t_end = spec.period;
    const Trajectory tr = integrate(spec, z0, 0.0, cfg);
    PoincareResult out{tr.outcome(), std::nullopt, tr.classification()};
    if (tr.outcome() == Outcome::Complete) {
        out.image = tr.final_state();
    }
    return out;
}

}  // namespace rotdeg
