#pragma once

// CSV and SVG emitters and atomic file writes. Numbers are printed with
// %.17g so that files round-trip exactly and are byte-identical across runs.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rotdeg/degree.hpp"
#include "rotdeg/error.hpp"
#include "rotdeg/geometry.hpp"
#include "rotdeg/integrator.hpp"
#include "rotdeg/rotation.hpp"

namespace rotdeg {

/// Shortest exact decimal form; "inf", "-inf" and "nan" for non-finite
/// values.
inline std::string format_number(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0.0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes to a sibling temporary file and renames it over the target, so a
/// reader never sees a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content)
{
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

inline std::string csv_row(const std::vector<std::string>& cells)
{
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            line += ',';
        }
        line += cells[i];
    }
    return line + "\n";
}

/// Columns t, x, y, theta_lift, rho, rot with rho = |z|^2 / 2.
inline std::string trajectory_csv(const Trajectory& traj)
{
    std::string out = csv_row({"t", "x", "y", "theta_lift", "rho", "rot"});
    const auto& s = traj.samples();
    const auto& lift = traj.lift();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double th = i < lift.size() ? lift[i].theta : std::nan("");
        out += csv_row({format_number(s[i].t), format_number(s[i].z.x), format_number(s[i].z.y), format_number(th),
                        format_number(action_radius(s[i].z)), format_number(s[i].rot)});
    }
    return out;
}

/// Columns s, x, y, grot.
inline std::string profile_csv(const std::vector<LoopSample>& samples)
{
    std::string out = csv_row({"s", "x", "y", "grot"});
    for (const auto& p : samples) {
        out += csv_row({format_number(p.s), format_number(p.z.x), format_number(p.z.y), to_string(p.grot)});
    }
    return out;
}

struct SweepRow {
    double alpha = 0.0;
    double beta = 0.0;
    bool h1_predicate = false;
    bool a4_predicate = false;
    bool h1_empirical = false;
    bool a4_empirical = false;
    double rot_limit = 0.0;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    std::string out = csv_row({"alpha", "beta", "h1_predicate", "a4_predicate", "h1_empirical", "a4_empirical", "rot_limit"});
    for (const auto& r : rows) {
        out += csv_row({format_number(r.alpha), format_number(r.beta), b(r.h1_predicate), b(r.a4_predicate),
                        b(r.h1_empirical), b(r.a4_empirical), format_number(r.rot_limit)});
    }
    return out;
}

inline std::string points_csv(const std::vector<PlanarPoint>& pts)
{
    std::string out = csv_row({"x", "y"});
    for (const auto& p : pts) {
        out += csv_row({format_number(p.x), format_number(p.y)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// SVG phase portrait

struct Portrait {
    std::vector<PlanarPoint> loop;
    std::vector<PlanarPoint> image;
    /// (base, tip) pairs.
    std::vector<std::pair<PlanarPoint, PlanarPoint>> arrows;
    std::vector<PlanarPoint> fixed_points;
    std::vector<std::vector<PlanarPoint>> trajectories;
};

namespace detail {

struct SvgFrame {
    double cx = 0.0;
    double cy = 0.0;
    double scale = 1.0;
    double size = 600.0;

    std::string x(double v) const { return format_number(std::round((size / 2.0 + (v - cx) * scale) * 100.0) / 100.0); }
    std::string y(double v) const { return format_number(std::round((size / 2.0 - (v - cy) * scale) * 100.0) / 100.0); }
};

inline std::string svg_polyline(const std::vector<PlanarPoint>& pts, const SvgFrame& f, const char* style)
{
    std::string out = "<polyline fill=\"none\" " + std::string(style) + " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i > 0) {
            out += ' ';
        }
        out += f.x(pts[i].x) + "," + f.y(pts[i].y);
    }
    return out + "\"/>\n";
}

}  // namespace detail

/// Self-contained SVG; the view is fitted to the loop, the image and the
/// fixed points (trajectories are clipped to it).
inline std::string portrait_svg(const Portrait& p, const std::string& title)
{
    double lo_x = -1.0;
    double hi_x = 1.0;
    double lo_y = -1.0;
    double hi_y = 1.0;
    bool first = true;
    auto grow = [&](PlanarPoint q) {
        if (!std::isfinite(q.x) || !std::isfinite(q.y)) {
            return;
        }
        if (first) {
            lo_x = hi_x = q.x;
            lo_y = hi_y = q.y;
            first = false;
        }
        lo_x = std::min(lo_x, q.x);
        hi_x = std::max(hi_x, q.x);
        lo_y = std::min(lo_y, q.y);
        hi_y = std::max(hi_y, q.y);
    };
    for (const auto& q : p.loop) grow(q);
    for (const auto& q : p.image) grow(q);
    for (const auto& q : p.fixed_points) grow(q);
    detail::SvgFrame f;
    f.cx = 0.5 * (lo_x + hi_x);
    f.cy = 0.5 * (lo_y + hi_y);
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
    f.scale = 0.9 * f.size / span;
    const std::string sz = format_number(f.size);
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + sz + "\" height=\"" + sz +
                      "\" viewBox=\"0 0 " + sz + " " + sz + "\">\n";
    out += "<title>" + title + "</title>\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<defs><clipPath id=\"view\"><rect width=\"" + sz + "\" height=\"" + sz + "\"/></clipPath></defs>\n";
    out += "<line x1=\"0\" y1=\"" + f.y(0.0) + "\" x2=\"" + sz + "\" y2=\"" + f.y(0.0) + "\" stroke=\"#ccc\"/>\n";
    out += "<line x1=\"" + f.x(0.0) + "\" y1=\"0\" x2=\"" + f.x(0.0) + "\" y2=\"" + sz + "\" stroke=\"#ccc\"/>\n";
    out += "<g clip-path=\"url(#view)\">\n";
    for (const auto& tr : p.trajectories) {
        out += detail::svg_polyline(tr, f, "stroke=\"#999\" stroke-width=\"0.5\"");
    }
    for (const auto& [a, b] : p.arrows) {
        out += "<line x1=\"" + f.x(a.x) + "\" y1=\"" + f.y(a.y) + "\" x2=\"" + f.x(b.x) + "\" y2=\"" + f.y(b.y) +
               "\" stroke=\"#e08000\" stroke-width=\"0.7\"/>\n";
    }
    if (!p.loop.empty()) {
        out += detail::svg_polyline(p.loop, f, "stroke=\"#1f4e9c\" stroke-width=\"1.5\"");
    }
    if (!p.image.empty()) {
        out += detail::svg_polyline(p.image, f, "stroke=\"#2a9d3a\" stroke-width=\"1\" stroke-dasharray=\"4 2\"");
    }
    for (const auto& q : p.fixed_points) {
        out += "<circle cx=\"" + f.x(q.x) + "\" cy=\"" + f.y(q.y) + "\" r=\"4\" fill=\"#c0392b\"/>\n";
    }
    out += "</g>\n</svg>\n";
    return out;
}

}  // namespace rotdeg
