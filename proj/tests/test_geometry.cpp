#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "rotdeg/geometry.hpp"
#include "rotdeg/loop.hpp"

using namespace rotdeg;
using Catch::Matchers::WithinAbs;

TEST_CASE("psi uses the clockwise convention")
{
    const auto a = psi({0.0, 1.0});
    CHECK_THAT(a.x, WithinAbs(1.0, 1e-15));
    CHECK_THAT(a.y, WithinAbs(0.0, 1e-15));
    const auto b = psi({std::numbers::pi / 2, 2.0});
    CHECK_THAT(b.x, WithinAbs(0.0, 1e-15));
    CHECK_THAT(b.y, WithinAbs(-2.0, 1e-15));
    const auto c = psi({two_pi + 0.3, 5.0});
    const auto d = psi({0.3, 5.0});
    CHECK_THAT(c.x, WithinAbs(d.x, 1e-12));
    CHECK_THAT(c.y, WithinAbs(d.y, 1e-12));
}

TEST_CASE("unwrap_lift follows a clockwise quarter turn")
{
    std::vector<PlanarPoint> pts;
    for (int i = 0; i < 90; ++i) {
        const double a = (std::numbers::pi / 2) * i / 89.0;
        pts.push_back(psi({a, 1.0}));
    }
    const auto lift = unwrap_lift(pts, 0.0);
    CHECK_THAT(lift.back().theta, WithinAbs(std::numbers::pi / 2, 1e-12));
}

TEST_CASE("unwrap_lift of a constant sequence is constant")
{
    const std::vector<PlanarPoint> pts(10, PlanarPoint{1.0, 0.0});
    for (const auto& l : unwrap_lift(pts, 0.0)) {
        CHECK(l.theta == 0.0);
        CHECK(l.r == 1.0);
    }
}

TEST_CASE("unwrap_lift of a full circle does not re-wrap")
{
    std::vector<PlanarPoint> pts;
    for (int i = 0; i <= 720; ++i) {
        pts.push_back(psi({two_pi * i / 720.0, 1.0}));
    }
    CHECK_THAT(unwrap_lift(pts, 0.0).back().theta, WithinAbs(two_pi, 1e-12));
}

TEST_CASE("unwrap_lift rejects the origin and half-turn gaps")
{
    const std::vector<PlanarPoint> origin{{1.0, 0.0}, {0.0, 0.0}};
    CHECK_THROWS_MATCHES(unwrap_lift(origin, 0.0), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::OriginSample; }));
    const std::vector<PlanarPoint> inside{{1.0, 0.0}, {0.05, 0.0}};
    CHECK_THROWS_AS(unwrap_lift(inside, 0.0, 0.1), Error);
    const std::vector<PlanarPoint> gap{{1.0, 0.0}, {-1.0, 0.0}};
    CHECK_THROWS_MATCHES(unwrap_lift(gap, 0.0), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::UnderSampled; }));
}

TEST_CASE("canonical polar coordinates")
{
    const auto c = to_canonical({std::sqrt(2.0), 0.0}, 0.0);
    CHECK_THAT(c.theta, WithinAbs(0.0, 1e-15));
    CHECK_THAT(c.rho, WithinAbs(1.0, 1e-15));
    const auto z = from_canonical({std::numbers::pi, 2.0});
    CHECK_THAT(z.x, WithinAbs(-2.0, 1e-15));
    CHECK_THAT(z.y, WithinAbs(0.0, 1e-15));
    const PlanarPoint p{0.3, -0.4};
    const auto q = from_canonical(to_canonical(p, 0.0));
    CHECK_THAT(q.x, WithinAbs(p.x, 1e-12));
    CHECK_THAT(q.y, WithinAbs(p.y, 1e-12));
    CHECK_THROWS_AS(to_canonical({0.0, 0.0}, 0.0), Error);
}

TEST_CASE("loops are closed, counterclockwise and contain their interior")
{
    const auto c = Loop::circle({0.5, 0.0}, 2.0);
    CHECK_THAT(c.at(0.25).x, WithinAbs(0.5, 1e-15));
    CHECK_THAT(c.at(0.25).y, WithinAbs(2.0, 1e-15));
    CHECK(c.contains({0.0, 0.0}));
    CHECK_FALSE(c.contains({3.0, 0.0}));
    const auto sq = Loop::polygon({{-1, -1}, {1, -1}, {1, 1}, {-1, 1}, {-1, -1}});
    CHECK(sq.vertices().size() == 4);
    CHECK_THAT(sq.at(0.125).x, WithinAbs(0.0, 1e-15));
    CHECK_THAT(sq.at(0.125).y, WithinAbs(-1.0, 1e-15));
    CHECK(sq.contains({0.0, 0.0}));
    CHECK_THROWS_AS(Loop::circle({}, 0.0), Error);
    CHECK_THROWS_AS(Loop::polygon({{0, 0}, {1, 0}}), Error);
}
