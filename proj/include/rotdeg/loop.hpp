#pragma once

// Closed planar curves parameterized by s in [0, 1), counterclockwise for
// circles (the orientation the degree of a planar map is measured in).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "rotdeg/error.hpp"
#include "rotdeg/geometry.hpp"

namespace rotdeg {

class Loop {
public:
    enum class Kind { Circle, Polygon };

    static Loop circle(PlanarPoint center, double radius)
    {
        if (!(radius > 0.0)) {
            throw Error(ErrorCode::InvalidParams, "circle radius must be positive");
        }
        Loop l;
        l.kind_ = Kind::Circle;
        l.center_ = center;
        l.radius_ = radius;
        return l;
    }

    /// Vertices in order; a repeated closing vertex is dropped.
    static Loop polygon(std::vector<PlanarPoint> vertices)
    {
        if (vertices.size() >= 2 && norm(vertices.front() - vertices.back()) <= 1e-9) {
            vertices.pop_back();
        }
        if (vertices.size() < 3) {
            throw Error(ErrorCode::InvalidParams, "polygon needs at least three vertices");
        }
        Loop l;
        l.kind_ = Kind::Polygon;
        l.vertices_ = std::move(vertices);
        l.cumulative_.assign(l.vertices_.size() + 1, 0.0);
        for (std::size_t i = 0; i < l.vertices_.size(); ++i) {
            const auto& a = l.vertices_[i];
            const auto& b = l.vertices_[(i + 1) % l.vertices_.size()];
            l.cumulative_[i + 1] = l.cumulative_[i] + norm(b - a);
        }
        if (!(l.cumulative_.back() > 0.0)) {
            throw Error(ErrorCode::InvalidParams, "degenerate polygon");
        }
        return l;
    }

    Kind kind() const { return kind_; }
    PlanarPoint center() const { return center_; }
    double radius() const { return radius_; }
    const std::vector<PlanarPoint>& vertices() const { return vertices_; }

    /// Point at parameter s (taken modulo 1); arclength-uniform for polygons.
    PlanarPoint at(double s) const
    {
        s -= std::floor(s);
        if (kind_ == Kind::Circle) {
            const double a = two_pi * s;
            return center_ + radius_ * PlanarPoint{std::cos(a), std::sin(a)};
        }
        const double L = s * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), L);
        std::size_t i = static_cast<std::size_t>(std::distance(cumulative_.begin(), it)) - 1;
        i = std::min(i, vertices_.size() - 1);
        const double seg = cumulative_[i + 1] - cumulative_[i];
        const double w = seg > 0.0 ? (L - cumulative_[i]) / seg : 0.0;
        const auto& a = vertices_[i];
        const auto& b = vertices_[(i + 1) % vertices_.size()];
        return a + w * (b - a);
    }

    /// n + 1 samples with the first repeated at the end.
    std::vector<PlanarPoint> samples(std::size_t n) const
    {
        std::vector<PlanarPoint> out;
        out.reserve(n + 1);
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(at(static_cast<double>(i) / static_cast<double>(n)));
        }
        out.push_back(out.front());
        return out;
    }

    /// Even-odd containment (exact for circles).
    bool contains(PlanarPoint p) const
    {
        if (kind_ == Kind::Circle) {
            return norm(p - center_) < radius_;
        }
        bool inside = false;
        const std::size_t n = vertices_.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const auto& a = vertices_[i];
            const auto& b = vertices_[j];
            if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
                inside = !inside;
            }
        }
        return inside;
    }

    /// Axis-aligned bounding box as (min corner, max corner).
    std::pair<PlanarPoint, PlanarPoint> bounds() const
    {
        if (kind_ == Kind::Circle) {
            return {center_ - PlanarPoint{radius_, radius_}, center_ + PlanarPoint{radius_, radius_}};
        }
        PlanarPoint lo = vertices_.front();
        PlanarPoint hi = vertices_.front();
        for (const auto& v : vertices_) {
            lo = {std::min(lo.x, v.x), std::min(lo.y, v.y)};
            hi = {std::max(hi.x, v.x), std::max(hi.y, v.y)};
        }
        return {lo, hi};
    }

private:
    Kind kind_ = Kind::Circle;
    PlanarPoint center_;
    double radius_ = 1.0;
    std::vector<PlanarPoint> vertices_;
    std::vector<double> cumulative_;
};

}  // namespace rotdeg
