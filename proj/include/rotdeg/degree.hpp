#pragma once

// Degree of the Poincare displacement P(z) = phi(T, z) - z on loops.
//
// Winding numbers here are COUNTERCLOCKWISE-positive, the orientation of the
// Brouwer degree, even though rotation numbers elsewhere are clockwise.
// Worked example: for LinearClockwise with T = 3, phi(T) turns the plane
// clockwise by 3 rad, so on the unit circle z = e^{is} the displacement is
// (e^{-3i} - 1) e^{is}, a fixed multiple of z, and winds once: degree 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rotdeg/error.hpp"
#include "rotdeg/fields.hpp"
#include "rotdeg/geometry.hpp"
#include "rotdeg/integrator.hpp"
#include "rotdeg/loop.hpp"
#include "rotdeg/parallel.hpp"
#include "rotdeg/rotation.hpp"

namespace rotdeg {

/// Signed counterclockwise angle from a to b in (-pi, pi].
inline double turn_angle(PlanarPoint a, PlanarPoint b)
{
    return std::atan2(a.x * b.y - a.y * b.x, dot(a, b));
}

/// Total counterclockwise turns of a closed sampled curve around 0. The
/// closing edge from the last sample back to the first is included.
inline int winding_number(const std::vector<PlanarPoint>& image)
{
    if (image.empty()) {
        throw Error(ErrorCode::InvalidParams, "empty image loop");
    }
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (image[i].x == 0.0 && image[i].y == 0.0) {
            throw Error(ErrorCode::ZeroOnLoop, "image sample " + std::to_string(i) + " is the origin");
        }
    }
    double total = 0.0;
    const std::size_t n = image.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = turn_angle(image[i], image[(i + 1) % n]);
        if (std::abs(d) >= std::numbers::pi * (1.0 - 1e-9)) {
            throw Error(ErrorCode::UnderSampled, "image turns by half a turn between samples " + std::to_string(i) +
                                                     " and " + std::to_string((i + 1) % n));
        }
        total += d;
    }
    return static_cast<int>(std::lround(total / two_pi));
}

struct HarnessOptions {
    ProfileOptions profile;
    double margin_required = 0.05;
    /// Adjacent displacement samples turning by more than this are refined
    /// before the winding is taken.
    double max_image_turn = std::numbers::pi / 4.0;
};

struct DegreeReport {
    Loop loop = Loop::circle({}, 1.0);
    std::vector<LoopSample> samples;
    /// All finite profile values lie in (band_n + margin, band_n + 1 - margin).
    long band_n = 0;
    double margin = 0.0;
    std::optional<int> winding;
    bool admissible = false;
    std::string reason;
    /// Admissible, every run Complete, and still winding != 1.
    bool discrepancy = false;
    bool refinement_capped = false;
};

namespace detail {

inline void profile_band(const std::vector<LoopSample>& samples, long& n, double& margin)
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
        if (!s.grot.is_infinite()) {
            lo = std::min(lo, s.grot.value);
            hi = std::max(hi, s.grot.value);
        }
    }
    if (!std::isfinite(lo)) {
        n = 0;
        margin = std::numeric_limits<double>::infinity();
        return;
    }
    n = static_cast<long>(std::floor(lo));
    margin = std::min(lo - static_cast<double>(n), static_cast<double>(n + 1) - hi);
}

inline std::optional<PlanarPoint> displacement(const LoopSample& s)
{
    if (!s.image) {
        return std::nullopt;
    }
    return *s.image - s.z;
}

}  // namespace detail

/// Checks the hypotheses of the fixed-point theorem on a loop and measures
/// the degree of phi(T, .) - Id along it.
inline DegreeReport theorem1_harness(const FieldSpec& spec, const Loop& loop, const IntegratorConfig& cfg,
                                     const HarnessOptions& opt = {})
{
    DegreeReport rep;
    rep.loop = loop;
    if (!loop.contains({0.0, 0.0})) {
        rep.reason = "origin is not inside the loop";
        return rep;
    }
    RotationProfile prof;
    try {
        prof = rotation_profile(spec, loop, cfg, opt.profile);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::OriginOnBoundary) {
            throw;
        }
        rep.reason = e.what();
        return rep;
    }
    rep.samples = prof.samples;
    rep.refinement_capped = prof.refinement_capped;
    detail::profile_band(rep.samples, rep.band_n, rep.margin);
    if (!(rep.margin >= opt.margin_required)) {
        rep.reason = "boundary rotation is within " + std::to_string(std::max(rep.margin, 0.0)) +
                     " of an integer (margin " + std::to_string(opt.margin_required) + " required)";
        return rep;
    }
    rep.admissible = true;

    const bool all_complete = std::all_of(rep.samples.begin(), rep.samples.end(),
                                          [](const LoopSample& s) { return s.outcome == Outcome::Complete; });
    if (!all_complete) {
        rep.reason = "some boundary trajectories blow up; winding not computed";
        return rep;
    }
    detail::refine_loop(spec, loop, cfg, opt.profile, prof, [&](const LoopSample& a, const LoopSample& b) {
        const auto da = detail::displacement(a);
        const auto db = detail::displacement(b);
        if (!da || !db) {
            return false;
        }
        return std::abs(turn_angle(*da, *db)) > opt.max_image_turn;
    });
    rep.samples = prof.samples;
    rep.refinement_capped = rep.refinement_capped || prof.refinement_capped;
    std::vector<PlanarPoint> disp;
    for (const auto& s : rep.samples) {
        disp.push_back(*detail::displacement(s));
    }
    try {
        rep.winding = winding_number(disp);
    } catch (const Error& e) {
        rep.reason = e.what();
        return rep;
    }
    rep.discrepancy = *rep.winding != 1;
    if (rep.discrepancy) {
        rep.reason = "admissible boundary with winding " + std::to_string(*rep.winding) + " (expected 1)";
    }
    return rep;
}

inline void require_admissible(const DegreeReport& rep)
{
    if (!rep.admissible) {
        throw Error(ErrorCode::NotAdmissible, rep.reason);
    }
}

struct LevelGrid {
    double r_inner = 1.0;
    double r_outer = 2.0;
    std::size_t n_r = 24;
    std::size_t n_phi = 64;
    /// Contour vertices re-integrated for validation.
    std::size_t validate_points = 32;
};

struct LevelBoundary {
    Loop loop = Loop::circle({}, 1.0);
    std::vector<GRotValue> validation;
};

/// Contour GRot_T = level (a half-integer n + 1/2) by marching squares on a
/// polar grid over the annulus. +inf nodes take the value level + 10.
inline LevelBoundary build_level_boundary(const FieldSpec& spec, double level, const LevelGrid& grid,
                                          const IntegratorConfig& cfg)
{
    if (!(grid.r_inner > 0.0 && grid.r_outer > grid.r_inner && grid.n_r >= 2 && grid.n_phi >= 8)) {
        throw Error(ErrorCode::InvalidParams, "annulus grid needs 0 < r_inner < r_outer, n_r >= 2, n_phi >= 8");
    }
    const std::size_t nr = grid.n_r;
    const std::size_t np = grid.n_phi;
    auto radius = [&](double i) {
        return grid.r_inner + (grid.r_outer - grid.r_inner) * i / static_cast<double>(nr - 1);
    };
    auto angle = [&](double j) { return two_pi * j / static_cast<double>(np); };
    auto node_point = [&](double i, double j) { return radius(i) * PlanarPoint{std::cos(angle(j)), std::sin(angle(j))}; };

    const auto values = parallel_map<double>(nr * np, [&](std::size_t k) {
        const GRotValue g = grot_T(spec, node_point(static_cast<double>(k / np), static_cast<double>(k % np)), cfg);
        return g.is_infinite() ? level + 10.0 : g.value;
    });
    auto val = [&](std::size_t i, std::size_t j) { return values[i * np + (j % np)]; };
    for (std::size_t j = 0; j < np; ++j) {
        if (!(val(0, j) < level) || !(val(nr - 1, j) > level)) {
            throw Error(ErrorCode::LevelNotBracketed, "GRot does not cross " + std::to_string(level) +
                                                          " between the inner and outer circles at angle " +
                                                          std::to_string(angle(static_cast<double>(j))));
        }
    }

    // Edge keys: radial edge (i,j)-(i+1,j) -> 2 (i np + j); angular edge
    // (i,j)-(i,j+1) -> 2 (i np + j) + 1. Crossing points in (i, j) units.
    auto crossing = [&](std::size_t key) {
        const std::size_t base = key / 2;
        const std::size_t i = base / np;
        const std::size_t j = base % np;
        const double a = val(i, j);
        if (key % 2 == 0) {
            const double b = val(i + 1, j);
            return std::pair<double, double>{static_cast<double>(i) + (level - a) / (b - a), static_cast<double>(j)};
        }
        const double b = val(i, j + 1);
        return std::pair<double, double>{static_cast<double>(i), static_cast<double>(j) + (level - a) / (b - a)};
    };
    std::multimap<std::size_t, std::size_t> adjacency;  // edge key -> segment index
    std::vector<std::array<std::size_t, 2>> segments;
    auto add = [&](std::size_t e0, std::size_t e1) {
        adjacency.emplace(e0, segments.size());
        adjacency.emplace(e1, segments.size());
        segments.push_back({e0, e1});
    };
    for (std::size_t i = 0; i + 1 < nr; ++i) {
        for (std::size_t j = 0; j < np; ++j) {
            const std::size_t jn = (j + 1) % np;
            const bool b0 = val(i, j) > level;
            const bool b1 = val(i + 1, j) > level;
            const bool b2 = val(i + 1, jn) > level;
            const bool b3 = val(i, jn) > level;
            const std::size_t bottom = 2 * (i * np + j);       // (i,j)-(i+1,j)
            const std::size_t right = 2 * ((i + 1) * np + j) + 1;  // (i+1,j)-(i+1,j+1)
            const std::size_t top = 2 * (i * np + jn);         // (i,j+1)-(i+1,j+1)
            const std::size_t left = 2 * (i * np + j) + 1;     // (i,j)-(i,j+1)
            const int code = (b0 ? 1 : 0) | (b1 ? 2 : 0) | (b2 ? 4 : 0) | (b3 ? 8 : 0);
            switch (code) {
            case 0:
            case 15: break;
            case 1:
            case 14: add(left, bottom); break;
            case 2:
            case 13: add(bottom, right); break;
            case 3:
            case 12: add(left, right); break;
            case 4:
            case 11: add(right, top); break;
            case 6:
            case 9: add(bottom, top); break;
            case 7:
            case 8: add(left, top); break;
            case 5:
            case 10: {
                const double centre = 0.25 * (val(i, j) + val(i + 1, j) + val(i + 1, jn) + val(i, jn));
                const bool c = centre > level;
                if ((code == 5) == c) {
                    add(left, top);
                    add(bottom, right);
                } else {
                    add(left, bottom);
                    add(right, top);
                }
                break;
            }
            default: break;
            }
        }
    }

    // Chain segments into closed polylines; keep those circling the origin.
    std::vector<bool> used(segments.size(), false);
    std::vector<std::vector<std::pair<double, double>>> rings;
    for (std::size_t s0 = 0; s0 < segments.size(); ++s0) {
        if (used[s0]) {
            continue;
        }
        std::vector<std::size_t> keys{segments[s0][0]};
        used[s0] = true;
        std::size_t cur = segments[s0][1];
        bool closed = false;
        for (;;) {
            if (cur == keys.front()) {
                closed = true;
                break;
            }
            keys.push_back(cur);
            std::optional<std::size_t> next;
            auto [lo, hi] = adjacency.equal_range(cur);
            for (auto it = lo; it != hi; ++it) {
                if (!used[it->second]) {
                    next = it->second;
                    break;
                }
            }
            if (!next) {
                break;
            }
            used[*next] = true;
            cur = segments[*next][0] == cur ? segments[*next][1] : segments[*next][0];
        }
        if (!closed) {
            throw Error(ErrorCode::ContourBroken, "open level contour at grid resolution");
        }
        std::vector<std::pair<double, double>> pts;
        for (auto k : keys) {
            pts.push_back(crossing(k));
        }
        double dj = 0.0;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            double step = pts[(k + 1) % pts.size()].second - pts[k].second;
            step -= static_cast<double>(np) * std::round(step / static_cast<double>(np));
            dj += step;
        }
        if (std::abs(std::abs(dj) - static_cast<double>(np)) < 0.5) {
            if (dj < 0.0) {
                std::reverse(pts.begin(), pts.end());
            }
            rings.push_back(std::move(pts));
        }
    }
    if (rings.empty()) {
        throw Error(ErrorCode::ContourBroken, "no level contour encloses the origin");
    }
    auto mean_radius = [&](const std::vector<std::pair<double, double>>& pts) {
        double acc = 0.0;
        for (const auto& p : pts) {
            acc += radius(p.first);
        }
        return acc / static_cast<double>(pts.size());
    };
    const auto& outer = *std::max_element(rings.begin(), rings.end(), [&](const auto& a, const auto& b) {
        return mean_radius(a) < mean_radius(b);
    });
    std::vector<PlanarPoint> verts;
    for (const auto& p : outer) {
        verts.push_back(node_point(p.first, p.second));
    }

    LevelBoundary out;
    out.loop = Loop::polygon(verts);
    const std::size_t nv = std::min(grid.validate_points, verts.size());
    const double lo = std::floor(level) + 0.25;
    const double hi = std::floor(level) + 0.75;
    out.validation = parallel_map<GRotValue>(nv, [&](std::size_t k) {
        return grot_T(spec, verts[k * verts.size() / nv], cfg);
    });
    for (std::size_t k = 0; k < nv; ++k) {
        const GRotValue g = out.validation[k];
        if (g.is_infinite() || !(g.value > lo && g.value < hi)) {
            throw Error(ErrorCode::ContourBroken, "contour vertex has GRot " + to_string(g) + " outside (" +
                                                      std::to_string(lo) + ", " + std::to_string(hi) + ")");
        }
    }
    return out;
}

struct FixedPointOptions {
    double min_cell = 1e-3;
    std::size_t max_cells = 4000;
    std::size_t edge_samples = 8;
    std::size_t max_edge_samples = 1024;
    double max_image_turn = std::numbers::pi / 3.0;
    double residual_tol = 1e-8;
    std::size_t max_polish = 64;
    int polish_iterations = 60;
};

struct FixedPoint {
    PlanarPoint z;
    double residual = 0.0;
};

struct QuadCell {
    PlanarPoint lo;
    double size = 0.0;
    /// Winding of the displacement on the cell boundary; empty when a
    /// boundary run did not complete or the boundary was under-resolved.
    std::optional<int> winding;
};

struct FixedPointSearch {
    std::vector<FixedPoint> points;
    std::vector<QuadCell> candidates;
    std::size_t cells_processed = 0;
    bool budget_exhausted = false;
};

namespace detail {

class DisplacementCache {
public:
    DisplacementCache(const FieldSpec& spec, const IntegratorConfig& cfg) : spec_(spec), cfg_(cfg) {}

    /// Evaluates every missing point in parallel, in the given order.
    void fill(const std::vector<PlanarPoint>& pts)
    {
        std::vector<PlanarPoint> missing;
        for (const auto& p : pts) {
            if (!cache_.count(key(p)) &&
                std::find(missing.begin(), missing.end(), p) == missing.end()) {
                missing.push_back(p);
            }
        }
        const auto res = parallel_map<std::optional<PlanarPoint>>(missing.size(), [&](std::size_t i) {
            const auto r = poincare_map(spec_, missing[i], cfg_);
            return r.image ? std::optional<PlanarPoint>(*r.image - missing[i]) : std::nullopt;
        });
        for (std::size_t i = 0; i < missing.size(); ++i) {
            cache_.emplace(key(missing[i]), res[i]);
        }
    }

    std::optional<PlanarPoint> get(PlanarPoint p) const { return cache_.at(key(p)); }

private:
    static std::pair<double, double> key(PlanarPoint p) { return {p.x, p.y}; }
    const FieldSpec& spec_;
    IntegratorConfig cfg_;
    std::map<std::pair<double, double>, std::optional<PlanarPoint>> cache_;
};

/// Point at boundary parameter u in [0, 4) of a square cell, counterclockwise
/// from the lower-left corner.
inline PlanarPoint cell_boundary_point(const QuadCell& c, double u)
{
    const int side = std::min(3, static_cast<int>(u));
    const double w = u - side;
    const double s = c.size;
    switch (side) {
    case 0: return c.lo + PlanarPoint{w * s, 0.0};
    case 1: return c.lo + PlanarPoint{s, w * s};
    case 2: return c.lo + PlanarPoint{(1.0 - w) * s, s};
    default: return c.lo + PlanarPoint{0.0, (1.0 - w) * s};
    }
}

inline std::optional<int> cell_winding(const QuadCell& c, DisplacementCache& cache, const FixedPointOptions& opt)
{
    std::vector<double> us;
    const std::size_t per = opt.edge_samples;
    for (std::size_t k = 0; k < 4 * per; ++k) {
        us.push_back(static_cast<double>(k) / static_cast<double>(per));
    }
    for (;;) {
        std::vector<PlanarPoint> pts;
        for (double u : us) {
            pts.push_back(cell_boundary_point(c, u));
        }
        cache.fill(pts);
        std::vector<PlanarPoint> disp;
        for (const auto& p : pts) {
            const auto d = cache.get(p);
            if (!d || (d->x == 0.0 && d->y == 0.0)) {
                return std::nullopt;
            }
            disp.push_back(*d);
        }
        std::vector<double> extra;
        const double min_du = 4.0 / static_cast<double>(opt.max_edge_samples);
        bool unresolved = false;
        for (std::size_t k = 0; k < us.size(); ++k) {
            const double ua = us[k];
            const double ub = k + 1 < us.size() ? us[k + 1] : 4.0;
            if (std::abs(turn_angle(disp[k], disp[(k + 1) % disp.size()])) > opt.max_image_turn) {
                if (ub - ua <= min_du) {
                    unresolved = true;
                } else {
                    extra.push_back(0.5 * (ua + ub));
                }
            }
        }
        if (extra.empty()) {
            if (unresolved) {
                return std::nullopt;
            }
            try {
                return winding_number(disp);
            } catch (const Error&) {
                return std::nullopt;
            }
        }
        us.insert(us.end(), extra.begin(), extra.end());
        std::sort(us.begin(), us.end());
    }
}

struct Mat2 {
    double a, b, c, d;
};

/// Levenberg-Marquardt on r(z) = phi(T, z) - z with central-difference
/// Jacobians.
inline std::optional<FixedPoint> polish_fixed_point(const FieldSpec& spec, PlanarPoint z, const IntegratorConfig& cfg,
                                                    const FixedPointOptions& opt)
{
    auto residual = [&](PlanarPoint p) -> std::optional<PlanarPoint> {
        const auto r = poincare_map(spec, p, cfg);
        if (!r.image) {
            return std::nullopt;
        }
        return *r.image - p;
    };
    auto r = residual(z);
    if (!r) {
        return std::nullopt;
    }
    double lambda = 1e-3;
    for (int it = 0; it < opt.polish_iterations; ++it) {
        if (norm(*r) < 1e-3 * opt.residual_tol) {
            break;
        }
        const double h = 1e-7 * std::max(1.0, norm(z));
        const auto rxp = residual(z + PlanarPoint{h, 0.0});
        const auto rxm = residual(z - PlanarPoint{h, 0.0});
        const auto ryp = residual(z + PlanarPoint{0.0, h});
        const auto rym = residual(z - PlanarPoint{0.0, h});
        if (!rxp || !rxm || !ryp || !rym) {
            return std::nullopt;
        }
        const PlanarPoint jx = (1.0 / (2.0 * h)) * (*rxp - *rxm);
        const PlanarPoint jy = (1.0 / (2.0 * h)) * (*ryp - *rym);
        // Normal equations (J^T J + lambda diag) dz = -J^T r.
        const double a11 = dot(jx, jx);
        const double a12 = dot(jx, jy);
        const double a22 = dot(jy, jy);
        const double g1 = dot(jx, *r);
        const double g2 = dot(jy, *r);
        bool improved = false;
        for (int inner = 0; inner < 12 && !improved; ++inner) {
            const double m11 = a11 * (1.0 + lambda) + 1e-300;
            const double m22 = a22 * (1.0 + lambda) + 1e-300;
            const double det = m11 * m22 - a12 * a12;
            if (!(std::abs(det) > 0.0)) {
                lambda *= 10.0;
                continue;
            }
            const PlanarPoint dz{-(m22 * g1 - a12 * g2) / det, -(-a12 * g1 + m11 * g2) / det};
            const auto rn = residual(z + dz);
            if (rn && norm(*rn) < norm(*r)) {
                z = z + dz;
                r = rn;
                lambda = std::max(lambda / 5.0, 1e-12);
                improved = true;
            } else {
                lambda *= 8.0;
            }
        }
        if (!improved) {
            break;
        }
    }
    return FixedPoint{z, norm(*r)};
}

}  // namespace detail

/// Quadtree search for zeros of phi(T, .) - Id inside a region. Cells with a
/// nonzero boundary winding are split; cells whose boundary runs do not all
/// complete are split too (never discarded). Leaves are polished by
/// Levenberg-Marquardt with tolerances tightened 10x.
inline FixedPointSearch find_fixed_points(const FieldSpec& spec, const Loop& region, const IntegratorConfig& cfg,
                                          const FixedPointOptions& opt = {})
{
    FixedPointSearch out;
    IntegratorConfig base = cfg;
    base.detect_origin = false;
    detail::DisplacementCache cache(spec, base);
    const auto [blo, bhi] = region.bounds();
    const double side = std::max(bhi.x - blo.x, bhi.y - blo.y);
    const PlanarPoint mid = 0.5 * (blo + bhi);
    std::vector<QuadCell> level{{mid - PlanarPoint{0.5 * side, 0.5 * side}, side, std::nullopt}};
    std::vector<QuadCell> leaves;
    while (!level.empty()) {
        std::vector<QuadCell> next;
        for (auto& c : level) {
            if (out.cells_processed >= opt.max_cells) {
                out.budget_exhausted = true;
                leaves.push_back(c);
                continue;
            }
            ++out.cells_processed;
            c.winding = detail::cell_winding(c, cache, opt);
            if (c.winding && *c.winding == 0) {
                continue;
            }
            if (c.size <= opt.min_cell) {
                leaves.push_back(c);
                continue;
            }
            const double h = 0.5 * c.size;
            next.push_back({c.lo, h, std::nullopt});
            next.push_back({c.lo + PlanarPoint{h, 0.0}, h, std::nullopt});
            next.push_back({c.lo + PlanarPoint{0.0, h}, h, std::nullopt});
            next.push_back({c.lo + PlanarPoint{h, h}, h, std::nullopt});
        }
        level = std::move(next);
    }
    out.candidates = leaves;

    IntegratorConfig tight = base;
    tight.rtol = cfg.rtol / 10.0;
    tight.atol = cfg.atol / 10.0;
    // Cells with a certified nonzero winding first, then undetermined cells
    // by the size of the displacement at their centre.
    std::vector<std::pair<double, std::size_t>> order;
    {
        std::vector<PlanarPoint> centres;
        for (const auto& c : leaves) {
            centres.push_back(c.lo + PlanarPoint{0.5 * c.size, 0.5 * c.size});
        }
        cache.fill(centres);
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            const auto d = cache.get(centres[i]);
            const double rank = leaves[i].winding ? -1.0 : (d ? norm(*d) : std::numeric_limits<double>::infinity());
            order.emplace_back(rank, i);
        }
        std::stable_sort(order.begin(), order.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
    }
    std::vector<QuadCell> to_polish;
    for (const auto& [rank, i] : order) {
        if (to_polish.size() >= opt.max_polish || std::isinf(rank)) {
            break;
        }
        to_polish.push_back(leaves[i]);
    }
    const auto polished = parallel_map<std::optional<FixedPoint>>(to_polish.size(), [&](std::size_t i) {
        const auto& c = to_polish[i];
        return detail::polish_fixed_point(spec, c.lo + PlanarPoint{0.5 * c.size, 0.5 * c.size}, tight, opt);
    });
    for (const auto& p : polished) {
        if (!p || !(p->residual < opt.residual_tol) || !region.contains(p->z)) {
            continue;
        }
        bool dup = false;
        for (auto& q : out.points) {
            if (norm(q.z - p->z) < 1e-6) {
                dup = true;
                if (p->residual < q.residual) {
                    q = *p;
                }
            }
        }
        if (!dup) {
            out.points.push_back(*p);
        }
    }
    if (out.points.empty()) {
        throw Error(ErrorCode::NoConvergence, "no fixed point polished to residual " +
                                                  std::to_string(opt.residual_tol) + " from " +
                                                  std::to_string(leaves.size()) + " candidate cells");
    }
    return out;
}

}  // namespace rotdeg
