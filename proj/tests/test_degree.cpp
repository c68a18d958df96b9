#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "rotdeg/degree.hpp"
#include "rotdeg/example_family.hpp"

using namespace rotdeg;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<PlanarPoint> circle_image(int n, int power)
{
    std::vector<PlanarPoint> out;
    for (int i = 0; i < n; ++i) {
        const double s = two_pi * i / n;
        out.push_back({std::cos(power * s), std::sin(power * s)});
    }
    return out;
}

}  // namespace

TEST_CASE("winding numbers of sampled images")
{
    CHECK(winding_number(circle_image(64, 1)) == 1);
    CHECK(winding_number(circle_image(64, 2)) == 2);
    CHECK(winding_number(circle_image(64, -1)) == -1);
    // Displacement of P(z) = 2z is z.
    CHECK(winding_number(circle_image(16, 1)) == 1);
    std::vector<PlanarPoint> shifted = circle_image(64, 1);
    for (auto& p : shifted) {
        p += PlanarPoint{3.0, 0.0};
    }
    CHECK(winding_number(shifted) == 0);
    CHECK_THROWS_AS(winding_number(circle_image(4, 2)), Error);
    auto through = circle_image(8, 1);
    through[2] = {0.0, 0.0};
    CHECK_THROWS_MATCHES(winding_number(through), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == ErrorCode::ZeroOnLoop;
                         }));
}

TEST_CASE("harness on rigid rotations")
{
    const IntegratorConfig cfg;
    const auto lc3 = theorem1_harness(linear_clockwise(3.0), Loop::circle({}, 1.0), cfg);
    CHECK(lc3.admissible);
    REQUIRE(lc3.winding);
    CHECK(*lc3.winding == 1);
    CHECK(lc3.band_n == 0);

    const auto rp = theorem1_harness(radial_power(2.0, std::numbers::pi), Loop::circle({}, std::sqrt(2.5)), cfg);
    CHECK(rp.admissible);
    REQUIRE(rp.winding);
    CHECK(*rp.winding == 1);
    CHECK(rp.band_n == 1);
    CHECK_THAT(rp.margin, WithinAbs(0.25, 1e-8));
}

TEST_CASE("resonant boundary is not admissible")
{
    const IntegratorConfig cfg;
    const auto rep = theorem1_harness(linear_clockwise(), Loop::circle({}, 1.0), cfg);
    CHECK_FALSE(rep.admissible);
    CHECK_FALSE(rep.winding);
    CHECK_THROWS_MATCHES(require_admissible(rep), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == ErrorCode::NotAdmissible;
                         }));
}

TEST_CASE("loops must enclose the origin")
{
    const auto rep = theorem1_harness(linear_clockwise(3.0), Loop::circle({5.0, 0.0}, 1.0), IntegratorConfig{});
    CHECK_FALSE(rep.admissible);
}

TEST_CASE("level boundaries")
{
    const IntegratorConfig cfg;
    const auto rp = radial_power(2.0, std::numbers::pi);
    const auto lb = build_level_boundary(rp, 1.5, LevelGrid{1.0, 2.5, 16, 32, 16}, cfg);
    for (const auto& v : lb.loop.vertices()) {
        CHECK_THAT(norm(v), WithinAbs(std::sqrt(3.0), 1e-3));
    }
    for (const auto& g : lb.validation) {
        CHECK_THAT(g.value, WithinAbs(1.5, 2e-3));
    }
    CHECK_THROWS_MATCHES(build_level_boundary(linear_clockwise(), 1.5, LevelGrid{0.5, 2.0, 8, 16, 8}, cfg), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == ErrorCode::LevelNotBracketed;
                         }));
}

TEST_CASE("fixed points of rigid rotations")
{
    const IntegratorConfig cfg;
    const auto lc = find_fixed_points(linear_clockwise(3.0), Loop::circle({}, 1.0), cfg);
    REQUIRE(lc.points.size() == 1);
    CHECK(norm(lc.points[0].z) < 1e-8);
    CHECK(lc.points[0].residual < 1e-10);

    FixedPointOptions opt;
    opt.max_cells = 600;
    const auto rp = find_fixed_points(radial_power(2.0, std::numbers::pi), Loop::circle({}, std::sqrt(3.0)), cfg, opt);
    REQUIRE_FALSE(rp.points.empty());
    bool found = false;
    for (const auto& p : rp.points) {
        found = found || (p.residual < 1e-8 && std::abs(norm(p.z) - std::sqrt(2.0)) < 1e-6);
    }
    CHECK(found);
}

TEST_CASE("Duffing periodic solution is a genuine fixed point")
{
    const IntegratorConfig cfg;
    const auto spec = duffing_field(0.5, 1.0);
    const auto fp = find_fixed_points(spec, Loop::circle({}, 2.0), cfg);
    REQUIRE_FALSE(fp.points.empty());
    // Independent shooting oracle: march the Poincare map from the result
    // and confirm it does not move.
    const auto& z = fp.points[0].z;
    IntegratorConfig raw = cfg;
    raw.detect_origin = false;
    const auto once = poincare_map(spec, z, raw);
    REQUIRE(once.image);
    CHECK(norm(*once.image - z) < 1e-7);
}
