#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "rotdeg/example_family.hpp"
#include "rotdeg/fields.hpp"
#include "rotdeg/integrator.hpp"

using namespace rotdeg;
using Catch::Matchers::WithinAbs;

TEST_CASE("linear clockwise rotation returns after 2 pi")
{
    IntegratorConfig cfg;
    const auto tr = integrate(linear_clockwise(), {1.0, 0.0}, 0.0, cfg);
    CHECK(tr.outcome() == Outcome::Complete);
    CHECK(norm(tr.final_state() - PlanarPoint{1.0, 0.0}) < 1e-8);
    CHECK_THAT(tr.final_rot(), WithinAbs(1.0, 1e-8));
    // Clockwise: a quarter period later the point is at (0, -1).
    const auto q = tr.at(std::numbers::pi / 2);
    CHECK_THAT(q.z.x, WithinAbs(0.0, 1e-9));
    CHECK_THAT(q.z.y, WithinAbs(-1.0, 1e-9));
}

TEST_CASE("dense output matches the closed form between steps")
{
    IntegratorConfig cfg;
    const auto tr = integrate(linear_clockwise(), {2.0, 0.0}, 0.0, cfg);
    for (int k = 0; k <= 50; ++k) {
        const double t = two_pi * k / 50.0;
        const auto s = tr.at(t);
        CHECK_THAT(s.z.x, WithinAbs(2.0 * std::cos(t), 1e-8));
        CHECK_THAT(s.z.y, WithinAbs(-2.0 * std::sin(t), 1e-8));
    }
}

TEST_CASE("global error tracks the tolerance")
{
    double prev = 1.0;
    for (double tol : {1e-6, 1e-8, 1e-10}) {
        IntegratorConfig cfg;
        cfg.rtol = tol;
        cfg.atol = tol;
        const auto tr = integrate(linear_clockwise(), {1.0, 0.0}, 0.0, cfg);
        const double err = norm(tr.final_state() - PlanarPoint{1.0, 0.0});
        CHECK(err < prev);
        CHECK(err < 1e3 * tol);
        prev = err;
    }
}

TEST_CASE("the forced Duffing equilibrium at zero forcing stays put")
{
    IntegratorConfig cfg;
    cfg.detect_origin = false;
    const auto tr = integrate(duffing_field(0.0, 1.0), {0.0, 0.0}, 0.0, cfg);
    CHECK(tr.outcome() == Outcome::Complete);
    CHECK(tr.final_state() == PlanarPoint{0.0, 0.0});
}

TEST_CASE("runs reaching the origin are classified OriginHit")
{
    const auto in = make_field("inward", 1.0, [](double, PlanarPoint z) { return -1.0 * (z * (1.0 / norm(z))); });
    IntegratorConfig cfg;
    cfg.t_end = 2.0;
    const auto tr = integrate(in, {1.0, 0.0}, 0.0, cfg);
    CHECK(tr.outcome() == Outcome::OriginHit);
    CHECK_THAT(tr.classification().t_event, WithinAbs(1.0, 1e-6));
}

TEST_CASE("radial blow-up z' = |z|^2 z is detected with a fitted blow-up time")
{
    // rho' = 4 rho^2 from rho0 = 1/2 blows up at t = 1/2.
    const auto f = make_field("explode", 1.0, [](double, PlanarPoint z) { return norm2(z) * z; });
    IntegratorConfig cfg;
    cfg.t_end = 1.0;
    const auto tr = integrate(f, {1.0, 0.0}, 0.0, cfg);
    CHECK(tr.outcome() == Outcome::BlowUp);
    CHECK_THAT(tr.classification().t_event, WithinAbs(0.5, 1e-3));
}

TEST_CASE("the example family blow-up seed blows up near T_F")
{
    ExampleParams p;
    const ExampleFamily fam(p);
    IntegratorConfig cfg;
    cfg.t_end = 1.0;
    cfg.escape_radius = std::sqrt(2.0 * 1e3);
    const auto tr = integrate(make_example_field(p), fam.special_initial_point(), 0.0, cfg);
    CHECK(tr.outcome() == Outcome::BlowUp);
    CHECK(tr.classification().t_event >= 0.998);
    CHECK(tr.classification().t_event <= 1.0 + 1e-9);
    const auto pm = poincare_map(make_example_field(p), fam.special_initial_point(), cfg);
    CHECK(pm.outcome == Outcome::BlowUp);
    CHECK_FALSE(pm.image.has_value());
}

TEST_CASE("Poincare map of resonant and rigid rotations")
{
    IntegratorConfig cfg;
    const auto lc = poincare_map(linear_clockwise(), {2.0, 1.0}, cfg);
    REQUIRE(lc.image);
    CHECK(norm(*lc.image - PlanarPoint{2.0, 1.0}) < 1e-8);
    const PlanarPoint z0 = from_canonical({0.4, 1.0});
    const auto rp = poincare_map(radial_power(2.0, std::numbers::pi), z0, cfg);
    REQUIRE(rp.image);
    CHECK(norm(*rp.image - z0) < 1e-8);
}

TEST_CASE("stored samples never skip half a turn")
{
    ExampleParams p;
    const ExampleFamily fam(p);
    IntegratorConfig cfg;
    cfg.t_end = 1.0;
    const auto tr = integrate(make_example_field(p), fam.special_initial_point(), 0.0, cfg);
    REQUIRE(tr.used_reference());
    const auto& s = tr.samples();
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (action_radius(s[i].z) > 1e4) {
            break;
        }
        CHECK(std::abs(s[i].rot - s[i - 1].rot) < 0.5);
    }
}

TEST_CASE("configuration validation")
{
    IntegratorConfig cfg;
    cfg.rtol = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.origin_radius = 1e4;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.max_steps = 10;
    CHECK_THROWS_MATCHES(integrate(duffing_field(0.5, 1.0), {2.0, 0.0}, 0.0, cfg), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == ErrorCode::MaxStepsExceeded;
                         }));
}
