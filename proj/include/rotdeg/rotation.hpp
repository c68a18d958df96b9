#pragma once

// Rotation numbers along trajectories, generalized rotation over one period,
// sampled D_delta sets and rotation profiles along loops.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rotdeg/error.hpp"
#include "rotdeg/fields.hpp"
#include "rotdeg/geometry.hpp"
#include "rotdeg/integrator.hpp"
#include "rotdeg/loop.hpp"
#include "rotdeg/parallel.hpp"

namespace rotdeg {

/// Finite rotation count or +inf for blow-up. Stored as a double so that the
/// natural ordering puts +inf above every real.
struct GRotValue {
    double value = 0.0;

    static GRotValue finite(double v) { return {v}; }
    static GRotValue plus_infinity() { return {std::numeric_limits<double>::infinity()}; }
    bool is_infinite() const { return std::isinf(value); }

    friend bool operator==(GRotValue, GRotValue) = default;
    friend auto operator<=>(GRotValue a, GRotValue b) { return a.value <=> b.value; }
};

inline std::string to_string(GRotValue g)
{
    if (g.is_infinite()) {
        return "inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", g.value);
    return buf;
}

/// Rotation integral at t, interpolated by the dense output.
inline double rot(const Trajectory& traj, double t)
{
    if (traj.outcome() == Outcome::OriginHit) {
        throw Error(ErrorCode::OriginHitTrajectory, "rotation undefined along a trajectory through the origin");
    }
    return traj.at(t).rot;
}

/// Rotation at t from the unwrapped lift: the angle at t is unwrapped
/// against the last stored sample at or before t.
inline double rot_by_lift(const Trajectory& traj, double t)
{
    if (traj.outcome() == Outcome::OriginHit) {
        throw Error(ErrorCode::OriginHitTrajectory, "rotation undefined along a trajectory through the origin");
    }
    const auto p = traj.at(t);
    const auto& s = traj.samples();
    const bool forward = traj.t_stop() >= traj.t_start();
    std::size_t lo = 0;
    std::size_t hi = s.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (forward ? s[mid].t <= t : s[mid].t >= t) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const std::size_t i = (forward ? s[hi].t <= t : s[hi].t >= t) ? hi : lo;
    const double theta = nearest_representative(clockwise_angle(p.z), traj.lift()[i].theta);
    return (theta - traj.lift().front().theta) / two_pi;
}

/// GRot over one period from t = 0: rot_T for Complete runs, +inf on blow-up.
inline GRotValue grot_T(const FieldSpec& spec, PlanarPoint z0, IntegratorConfig cfg)
{
    cfg.t_end = spec.period;
    const Trajectory tr = integrate(spec, z0, 0.0, cfg);
    switch (tr.outcome()) {
    case Outcome::Complete: return GRotValue::finite(tr.final_rot());
    case Outcome::BlowUp: return GRotValue::plus_infinity();
    case Outcome::OriginHit: break;
    }
    throw Error(ErrorCode::OriginHitTrajectory, "GRot undefined: trajectory reaches the origin at t=" +
                                                    std::to_string(tr.classification().t_event));
}

struct DDeltaEstimate {
    double delta = 0.0;
    std::vector<PlanarPoint> point_cloud;
    double bounding_radius = 0.0;
    /// Number of cylinder samples whose backward run passed within the
    /// origin radius; their image is recorded at the closest approach.
    std::size_t origin_passes = 0;
};

struct CylinderGrid {
    std::size_t n_t = 16;
    std::size_t n_boundary = 32;
    std::size_t n_rings = 2;
};

/// Backward images at t = 0 of a sampled cylinder [0, T] x B[0, delta].
inline DDeltaEstimate estimate_D_delta(const FieldSpec& spec, double delta, const CylinderGrid& grid,
                                       IntegratorConfig cfg)
{
    if (!(delta > 0.0) || grid.n_t < 1 || grid.n_boundary < 3 || grid.n_rings < 1) {
        throw Error(ErrorCode::InvalidParams, "D_delta needs delta > 0 and a non-trivial grid");
    }
    struct Seed {
        double t;
        PlanarPoint z;
    };
    std::vector<Seed> seeds;
    for (std::size_t i = 0; i <= grid.n_t; ++i) {
        const double t = spec.period * static_cast<double>(i) / static_cast<double>(grid.n_t);
        for (std::size_t k = 1; k <= grid.n_rings; ++k) {
            const double r = delta * static_cast<double>(k) / static_cast<double>(grid.n_rings);
            for (std::size_t j = 0; j < grid.n_boundary; ++j) {
                const double a = two_pi * static_cast<double>(j) / static_cast<double>(grid.n_boundary);
                seeds.push_back({t, {r * std::cos(a), r * std::sin(a)}});
            }
        }
    }
    cfg.t_end = 0.0;
    cfg.origin_radius = std::min(cfg.origin_radius, 1e-9 * delta);
    struct Image {
        PlanarPoint z;
        bool origin = false;
    };
    const auto images = parallel_map<Image>(seeds.size(), [&](std::size_t i) {
        const Seed& s = seeds[i];
        if (s.t == 0.0) {
            return Image{s.z, false};
        }
        const Trajectory tr = integrate(spec, s.z, s.t, cfg);
        if (tr.outcome() == Outcome::BlowUp) {
            throw Error(ErrorCode::BackwardBlowUp, "backward solution from t=" + std::to_string(s.t) + " z=(" +
                                                       std::to_string(s.z.x) + ", " + std::to_string(s.z.y) +
                                                       ") escapes before t=0");
        }
        return Image{tr.final_state(), tr.outcome() == Outcome::OriginHit};
    });
    DDeltaEstimate out;
    out.delta = delta;
    double rmax = 0.0;
    for (const auto& im : images) {
        out.point_cloud.push_back(im.z);
        rmax = std::max(rmax, norm(im.z));
        out.origin_passes += im.origin ? 1 : 0;
    }
    out.bounding_radius = 1.1 * rmax;
    return out;
}

struct ProfileOptions {
    std::size_t initial = 64;
    std::size_t max_points = 1024;
    /// Adjacent finite values differing by at least this are refined.
    double max_jump = 0.1;
    double min_ds = 1e-6;
};

struct LoopSample {
    double s = 0.0;
    PlanarPoint z;
    GRotValue grot;
    Outcome outcome = Outcome::Complete;
    /// phi(T, z) for Complete runs.
    std::optional<PlanarPoint> image;
};

struct RotationProfile {
    std::vector<LoopSample> samples;
    bool refinement_capped = false;
};

namespace detail {

inline LoopSample evaluate_loop_point(const FieldSpec& spec, const Loop& loop, double s, const IntegratorConfig& cfg)
{
    LoopSample out;
    out.s = s;
    out.z = loop.at(s);
    IntegratorConfig c = cfg;
    c.t_end = spec.period;
    const Trajectory tr = integrate(spec, out.z, 0.0, c);
    out.outcome = tr.outcome();
    switch (tr.outcome()) {
    case Outcome::Complete:
        out.grot = GRotValue::finite(tr.final_rot());
        out.image = tr.final_state();
        break;
    case Outcome::BlowUp: out.grot = GRotValue::plus_infinity(); break;
    case Outcome::OriginHit:
        throw Error(ErrorCode::OriginOnBoundary, "trajectory from loop point s=" + std::to_string(s) +
                                                     " reaches the origin; N meets the boundary");
    }
    return out;
}

/// Bisects cyclically adjacent pairs flagged by `needs_split` until none
/// remain or the point budget is spent. Deterministic: each round is
/// evaluated in parallel but merged in parameter order.
template <class Split>
void refine_loop(const FieldSpec& spec, const Loop& loop, const IntegratorConfig& cfg, const ProfileOptions& opt,
                 RotationProfile& prof, Split needs_split)
{
    for (;;) {
        std::vector<double> mids;
        const std::size_t n = prof.samples.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = prof.samples[i];
            const auto& b = prof.samples[(i + 1) % n];
            const double sb = (i + 1 == n) ? b.s + 1.0 : b.s;
            if (sb - a.s > opt.min_ds && needs_split(a, b)) {
                mids.push_back(0.5 * (a.s + sb));
            }
        }
        if (mids.empty()) {
            break;
        }
        if (n + mids.size() > opt.max_points) {
            prof.refinement_capped = true;
            mids.resize(opt.max_points > n ? opt.max_points - n : 0);
            if (mids.empty()) {
                break;
            }
        }
        auto fresh = parallel_map<LoopSample>(mids.size(), [&](std::size_t i) {
            auto ls = evaluate_loop_point(spec, loop, mids[i], cfg);
            ls.s = mids[i] >= 1.0 ? mids[i] - 1.0 : mids[i];
            return ls;
        });
        prof.samples.insert(prof.samples.end(), fresh.begin(), fresh.end());
        std::sort(prof.samples.begin(), prof.samples.end(),
                  [](const LoopSample& a, const LoopSample& b) { return a.s < b.s; });
        if (prof.refinement_capped) {
            break;
        }
    }
}

/// Samples a loop at `initial` uniform parameters, then refines.
template <class Split>
RotationProfile sample_loop(const FieldSpec& spec, const Loop& loop, const IntegratorConfig& cfg,
                            const ProfileOptions& opt, Split needs_split)
{
    RotationProfile prof;
    std::vector<double> ss;
    for (std::size_t i = 0; i < opt.initial; ++i) {
        ss.push_back(static_cast<double>(i) / static_cast<double>(opt.initial));
    }
    prof.samples = parallel_map<LoopSample>(
        ss.size(), [&](std::size_t i) { return evaluate_loop_point(spec, loop, ss[i], cfg); });
    refine_loop(spec, loop, cfg, opt, prof, needs_split);
    return prof;
}

inline bool profile_jump(const LoopSample& a, const LoopSample& b, double max_jump)
{
    if (a.grot.is_infinite() != b.grot.is_infinite()) {
        return true;
    }
    return !a.grot.is_infinite() && std::abs(a.grot.value - b.grot.value) >= max_jump;
}

}  // namespace detail

/// GRot_T along a loop, refined until adjacent values differ by less than
/// opt.max_jump or the point budget is reached.
inline RotationProfile rotation_profile(const FieldSpec& spec, const Loop& loop, const IntegratorConfig& cfg,
                                        const ProfileOptions& opt = {})
{
    return detail::sample_loop(spec, loop, cfg, opt, [&](const LoopSample& a, const LoopSample& b) {
        return detail::profile_jump(a, b, opt.max_jump);
    });
}

struct RotationBoundEstimate {
    double delta = 0.0;
    double lambda = 0.0;
    std::size_t samples_used = 0;
    std::size_t samples_skipped = 0;
};

/// Empirical Lambda: the largest backward unwinding sup_{s<t}(rot_s - rot_t)
/// over [0, T] among sampled starts outside the D_delta estimate.
inline RotationBoundEstimate estimate_unwinding_bound(const FieldSpec& spec, const DDeltaEstimate& dd,
                                                      const std::vector<PlanarPoint>& starts, IntegratorConfig cfg)
{
    cfg.t_end = spec.period;
    std::vector<PlanarPoint> used;
    RotationBoundEstimate out;
    out.delta = dd.delta;
    for (const auto& z : starts) {
        if (norm(z) > dd.bounding_radius) {
            used.push_back(z);
        } else {
            ++out.samples_skipped;
        }
    }
    const auto lambdas = parallel_map<double>(used.size(), [&](std::size_t i) {
        const Trajectory tr = integrate(spec, used[i], 0.0, cfg);
        if (tr.outcome() == Outcome::OriginHit) {
            return 0.0;
        }
        double peak = -std::numeric_limits<double>::infinity();
        double worst = 0.0;
        for (const auto& s : tr.samples()) {
            peak = std::max(peak, s.rot);
            worst = std::max(worst, peak - s.rot);
        }
        return worst;
    });
    out.samples_used = used.size();
    for (double l : lambdas) {
        out.lambda = std::max(out.lambda, l);
    }
    return out;
}

}  // namespace rotdeg
