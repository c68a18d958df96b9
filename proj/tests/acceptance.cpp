// Acceptance suite: one PASS/FAIL line per criterion, with measured values
// and wall-clock time against the budget. Exit status is nonzero when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "rotdeg/conditions.hpp"
#include "rotdeg/degree.hpp"
#include "rotdeg/example_family.hpp"
#include "rotdeg/fields.hpp"
#include "rotdeg/integrator.hpp"
#include "rotdeg/rotation.hpp"

using namespace rotdeg;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a)
{
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

int run(int id, const char* title, double budget_s, const std::function<Result()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Result out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = out.pass && el < budget_s;
    std::printf("[%s] %2d %s: %s (%.2f s, budget %.0f s)\n", pass ? "PASS" : "FAIL", id, title, out.detail.c_str(), el,
                budget_s);
    std::fflush(stdout);
    return pass ? 0 : 1;
}

PlanarPoint on_circle(double r, double a) { return r * PlanarPoint{std::cos(a), std::sin(a)}; }

Result c1_rotation_exactness()
{
    IntegratorConfig cfg;
    cfg.t_end = two_pi;
    const auto lc = integrate(linear_clockwise(), {1.0, 0.0}, 0.0, cfg);
    const double e1 = std::abs(rot(lc, two_pi) - 1.0);
    cfg.t_end = std::numbers::pi;
    const auto rp = integrate(radial_power(2.0, std::numbers::pi), on_circle(std::sqrt(2.0), 0.7), 0.0, cfg);
    const double e2 = std::abs(rot(rp, std::numbers::pi) - 1.0);
    return {e1 < 1e-8 && e2 < 1e-7, "linear err " + fmt("%.2e", e1) + ", radial err " + fmt("%.2e", e2)};
}

Result c2_two_method_agreement()
{
    struct Case {
        FieldSpec spec;
        std::vector<double> radii;
    };
    std::vector<Case> cases{
        {linear_clockwise(), {0.5, 1.0, 2.0}},
        {radial_power(2.0, std::numbers::pi), {0.5, 1.0, 1.5, 2.0}},
        {duffing_field(0.5, 1.0), {0.3, 1.0, 2.0, 2.5}},
        {make_example_field(ExampleParams{}), {0.2, 0.6, 0.9, 2.5, 4.0}},
        {make_example_field(ExampleParams{.alpha = 1.5}), {0.3, 0.9, 3.0}},
    };
    IntegratorConfig cfg;
    std::size_t complete = 0;
    double worst = 0.0;
    for (const auto& c : cases) {
        cfg.t_end = c.spec.period;
        for (double r : c.radii) {
            for (int k = 0; k < 4; ++k) {
                const auto tr = integrate(c.spec, on_circle(r, 0.4 + 1.57 * k), 0.0, cfg);
                if (tr.outcome() != Outcome::Complete) {
                    continue;
                }
                ++complete;
                for (std::size_t i = 0; i < tr.samples().size(); ++i) {
                    worst = std::max(worst, std::abs(tr.samples()[i].rot - tr.lift_rot(i)));
                }
            }
        }
    }
    return {complete >= 50 && worst < 1e-6,
            std::to_string(complete) + " Complete trajectories, max |integral - lift| " + fmt("%.2e", worst)};
}

Result c3_special_solution()
{
    const ExampleParams p;
    const ExampleFamily fam(p);
    IntegratorConfig cfg;
    cfg.t_end = p.period;
    const auto tr = integrate(make_example_field(p), fam.special_initial_point(), 0.0, cfg);
    double rel = 0.0;
    double rot_err = 0.0;
    double reached = 0.0;
    // Stored samples plus a geometric grid in 1 - t read from the dense
    // output, both up to rho* = 1e4.
    std::vector<double> ts;
    for (const auto& s : tr.samples()) {
        ts.push_back(s.t);
    }
    for (int k = 0; k <= 400; ++k) {
        ts.push_back(1.0 - std::pow(10.0, -4.0 * k / 400.0));
    }
    for (double t : ts) {
        const double rho_closed = 1.0 / (1.0 - t);
        if (rho_closed > 1e4 * (1.0 + 1e-9) || !tr.covers(t)) {
            continue;
        }
        const auto s = tr.at(t);
        reached = std::max(reached, rho_closed);
        rel = std::max(rel, std::abs(action_radius(s.z) / rho_closed - 1.0));
        rot_err = std::max(rot_err, std::abs(s.rot + std::log1p(-t) / std::numbers::pi));
    }
    const auto& c = tr.classification();
    const bool ok = rel < 1e-4 && rot_err < 1e-4 && reached > 0.9e4 && c.outcome == Outcome::BlowUp &&
                    c.t_event >= 0.995 && c.t_event <= 1.005;
    return {ok, "rho rel err " + fmt("%.2e", rel) + ", rot err " + fmt("%.2e", rot_err) + " up to rho " +
                    fmt("%.0f", reached) + ", " + to_string(c.outcome) + " t_f_est " + fmt("%.6f", c.t_event)};
}

Result c4_a4_dichotomy()
{
    const IntegratorConfig cfg;
    auto check = [&](double alpha) {
        ExampleParams p;
        p.alpha = alpha;
        return check_A4_empirical(make_example_field(p), {ExampleFamily(p).special_initial_point()}, 3.0, cfg);
    };
    const auto a2 = check(2.0);
    const auto a4 = check(4.0);
    const auto a15 = check(1.5);
    const double plateau = a15.certificate.count("rot_plateau") ? a15.certificate.at("rot_plateau") : std::nan("");
    const double target = 3.0 / (2.0 * std::numbers::pi);
    const bool ok = a2.holds_at_resolution && a4.holds_at_resolution && !a15.holds_at_resolution &&
                    std::abs(plateau - target) < 2e-3;
    return {ok, std::string("(2,1) ") + (a2.holds_at_resolution ? "true" : "false") + ", (4,1) " +
                    (a4.holds_at_resolution ? "true" : "false") + ", (1.5,1) " +
                    (a15.holds_at_resolution ? "true" : "false") + " plateau " + fmt("%.6f", plateau)};
}

Result c5_h1_dichotomy()
{
    int matched = 0;
    int total = 0;
    std::string mism;
    for (double a : {1.5, 2.0, 3.0, 4.0}) {
        for (double b : {0.5, 1.0, 2.0}) {
            ExampleParams p;
            p.alpha = a;
            p.beta = b;
            const bool got = check_H1(make_example_field(p)).holds_at_resolution;
            ++total;
            if (got == h1_predicate(p)) {
                ++matched;
            } else {
                mism += " (" + fmt("%g", a) + "," + fmt("%g", b) + ")";
            }
        }
    }
    return {matched == total, std::to_string(matched) + "/" + std::to_string(total) + " cells match" +
                                  (mism.empty() ? "" : ", mismatches:" + mism)};
}

Result c6_dip_constraints()
{
    bool ok = true;
    double sup_f = 0.0;
    double worst_low = 0.0;
    double max_fu_ratio = -1e300;
    double origin_err = 0.0;
    std::string why;
    for (const auto& [alpha, beta] : std::vector<std::pair<double, double>>{{2, 1}, {1.5, 1}, {4, 1}, {3, 0.5}, {2, 2}}) {
        ExampleParams p;
        p.alpha = alpha;
        p.beta = beta;
        const ExampleFamily fam(p);
        std::vector<double> ts{0.0};
        for (double tau = 0.5; tau >= 1e-4 * (1 - 1e-12); tau /= std::sqrt(10.0)) {
            ts.push_back(p.blowup_time - tau);
        }
        ts.push_back(p.blowup_time - 1e-4);
        const int nu = 10000;
        for (double t : ts) {
            const double rd = fam.rho_star_dot(t);
            for (int i = 0; i < nu; ++i) {
                const double u = -std::numbers::pi + two_pi * i / nu;
                const DipValue d = fam.dip(t, u);
                sup_f = std::max(sup_f, std::abs(d.f));
                if (std::abs(d.f) >= p.epsilon) {
                    ok = false;
                    why = " sup|f| violated";
                }
                if (d.f_u < -rd * (1.0 + 1e-9)) {
                    ok = false;
                    why = " lower slope violated";
                }
                worst_low = std::min(worst_low, d.f_u / rd + 1.0);
                max_fu_ratio = std::max(max_fu_ratio, d.f_u * p.blowup_time / p.beta);
                if (!(d.f_u < p.beta / p.blowup_time)) {
                    ok = false;
                    why = " upper slope violated";
                }
                if (std::abs(u) >= 0.5 && (d.f != 0.0 || d.f_u != 0.0)) {
                    ok = false;
                    why = " f support violated";
                }
            }
            const double e0 = std::abs(fam.dip(t, 0.0).f_u + rd) / rd;
            origin_err = std::max(origin_err, e0);
        }
    }
    ok = ok && origin_err < 1e-6;
    const bool g_ok = bump_g(0.0) == 1.0 && bump_g_prime(0.0) == 0.0 && bump_g(0.5) == 0.0 && bump_g(-0.5) == 0.0 &&
                      bump_g(0.6) == 0.0 && bump_g(-0.6) == 0.0 && bump_g(0.45) > 0.0 && plateau_chi(0.25) == 1.0 &&
                      plateau_chi(0.5) == 0.0 && plateau_chi(-0.5) == 0.0;
    if (!g_ok) {
        why += " g/chi properties violated";
    }
    return {ok && g_ok, "sup|f| " + fmt("%.4f", sup_f) + ", min f_u/rho*' + 1 = " + fmt("%.2e", worst_low) +
                            ", max f_u T_F/beta " + fmt("%.3f", max_fu_ratio) + ", f_u(t,0) rel err " +
                            fmt("%.2e", origin_err) + why};
}

Result c7_hamiltonian_identities()
{
    double worst_res = 0.0;
    for (const auto& [alpha, beta] : std::vector<std::pair<double, double>>{{2, 1}, {3, 0.5}, {1.5, 1}, {4, 1}, {2, 2}}) {
        ExampleParams p;
        p.alpha = alpha;
        p.beta = beta;
        const std::vector<double> grid{0.0, 0.3, 0.6, 0.9, 0.99, 0.999, 0.9999};
        worst_res = std::max(worst_res, residual_special_solution(p, grid));
    }
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto annulus = [&](double lo, double hi, double period) {
        std::vector<TimedPoint> pts;
        for (int i = 0; i < 100; ++i) {
            const double r = lo + (hi - lo) * U(rng);
            pts.push_back({period * U(rng), on_circle(r, two_pi * U(rng))});
        }
        return pts;
    };
    double worst_grad = 0.0;
    worst_grad = std::max(worst_grad, grad_check(linear_clockwise(), annulus(0.5, 3.0, two_pi), 1e-5));
    worst_grad = std::max(worst_grad, grad_check(radial_power(2.0, std::numbers::pi), annulus(0.5, 3.0, 1.0), 1e-5));
    worst_grad = std::max(worst_grad, grad_check(radial_power(3.0, 1.0), annulus(0.5, 2.0, 1.0), 1e-5));
    worst_grad = std::max(worst_grad, grad_check(duffing_field(0.5, 1.0), annulus(0.0, 3.0, two_pi), 1e-5));
    {
        // Example family away from the non-smooth loci: sample both inside
        // the perturbation tube and outside it, and in [T_F, T) when T_F < T.
        ExampleParams p;
        p.period = 2.0;
        const ExampleFamily fam(p);
        const auto spec = make_example_field(p);
        std::vector<TimedPoint> pts;
        for (int i = 0; i < 200; ++i) {
            const double t = 0.9 * U(rng);
            const double rho = fam.rho_star(t) + (i % 2 == 0 ? 0.8 * (U(rng) - 0.5) : 0.6 + 3.0 * U(rng));
            const double theta = fam.theta_star(t) + (i % 4 < 2 ? 0.6 * (U(rng) - 0.5) : two_pi * U(rng));
            pts.push_back({t, from_canonical({theta, rho})});
            pts.push_back({1.0 + U(rng), on_circle(0.5 + 3.0 * U(rng), two_pi * U(rng))});
        }
        worst_grad = std::max(worst_grad, grad_check(spec, pts, 1e-6));
    }
    return {worst_res < 1e-6 && worst_grad < 1e-6,
            "special-solution residual " + fmt("%.2e", worst_res) + ", grad_check " + fmt("%.2e", worst_grad)};
}

Result c8_harness_soundness()
{
    const IntegratorConfig cfg;
    struct Case {
        std::string name;
        FieldSpec spec;
        Loop loop;
    };
    std::vector<Case> corpus{
        {"linear T=3", linear_clockwise(3.0), Loop::circle({}, 1.0)},
        {"linear T=3 square", linear_clockwise(3.0), Loop::polygon({{-1, -1}, {1, -1}, {1, 1}, {-1, 1}})},
        {"radial rho=1.25", radial_power(2.0, std::numbers::pi), Loop::circle({}, std::sqrt(2.5))},
        {"radial rho=0.5", radial_power(2.0, std::numbers::pi), Loop::circle({}, 1.0)},
        {"duffing R=2", duffing_field(0.5, 1.0), Loop::circle({}, 2.0)},
        {"duffing R=1", duffing_field(0.5, 1.0), Loop::circle({}, 1.0)},
        {"example rho=0.3", make_example_field(ExampleParams{}), Loop::circle({}, std::sqrt(0.6))},
        {"linear T=2pi", linear_clockwise(), Loop::circle({}, 1.0)},
    };
    std::size_t admissible = 0;
    bool ok = true;
    std::string notes;
    bool resonant_rejected = false;
    for (const auto& c : corpus) {
        const auto rep = theorem1_harness(c.spec, c.loop, cfg);
        if (c.name == "linear T=2pi") {
            resonant_rejected = !rep.admissible;
            try {
                require_admissible(rep);
                resonant_rejected = false;
            } catch (const Error& e) {
                resonant_rejected = resonant_rejected && e.code() == ErrorCode::NotAdmissible;
            }
            continue;
        }
        if (rep.admissible && rep.winding) {
            ++admissible;
            if (*rep.winding != 1) {
                ok = false;
                notes += " " + c.name + " winding " + std::to_string(*rep.winding);
            }
        }
    }
    return {ok && resonant_rejected && admissible >= 5,
            std::to_string(admissible) + " admissible reports, all winding 1: " + (ok ? "yes" : "no") +
                ", resonant NotAdmissible: " + (resonant_rejected ? "yes" : "no") + notes};
}

Result c9_duffing_periodic_orbit()
{
    const auto spec = duffing_field(0.5, 1.0);
    IntegratorConfig cfg;
    const auto rep = theorem1_harness(spec, Loop::circle({}, 2.0), cfg);
    require_admissible(rep);
    const auto search = find_fixed_points(spec, Loop::circle({}, 2.0), cfg);
    IntegratorConfig back = cfg;
    back.detect_origin = false;
    back.t_end = 2.0 * two_pi;
    double best_res = 1e300;
    double best_ret = 1e300;
    for (const auto& p : search.points) {
        const auto tr = integrate(spec, p.z, 0.0, back);
        const double ret = tr.outcome() == Outcome::Complete ? norm(tr.final_state() - p.z) : 1e300;
        if (p.residual < 1e-7 && ret < best_ret) {
            best_res = p.residual;
            best_ret = ret;
        }
    }
    return {best_res < 1e-7 && best_ret < 1e-5,
            std::to_string(search.points.size()) + " fixed point(s), residual " + fmt("%.2e", best_res) +
                ", return error over [0,4pi] " + fmt("%.2e", best_ret)};
}

Result c10_d_delta()
{
    const IntegratorConfig cfg;
    const CylinderGrid grid;
    const auto lc = estimate_D_delta(linear_clockwise(), 0.1, grid, cfg).bounding_radius;
    const auto rp = estimate_D_delta(radial_power(2.0, std::numbers::pi), 0.1, grid, cfg).bounding_radius;
    bool ok = lc >= 0.1 && lc <= 0.12 && rp >= 0.1 && rp <= 0.12;
    std::string nest;
    for (const auto& spec : {linear_clockwise(), radial_power(2.0, std::numbers::pi), duffing_field(0.5, 1.0),
                             make_example_field(ExampleParams{})}) {
        const double a = estimate_D_delta(spec, 0.05, grid, cfg).bounding_radius;
        const double b = estimate_D_delta(spec, 0.1, grid, cfg).bounding_radius;
        ok = ok && a <= b;
        nest += " " + spec.name + " " + fmt("%.4f", a) + "<=" + fmt("%.4f", b);
    }
    return {ok, "linear " + fmt("%.4f", lc) + ", radial " + fmt("%.4f", rp) + ";" + nest};
}

}  // namespace

int main()
{
    int failures = 0;
    failures += run(1, "rotation exactness", 1, c1_rotation_exactness);
    failures += run(2, "two-method rotation agreement", 30, c2_two_method_agreement);
    failures += run(3, "special solution reproduction", 10, c3_special_solution);
    failures += run(4, "A4 dichotomy", 60, c4_a4_dichotomy);
    failures += run(5, "H1 dichotomy", 120, c5_h1_dichotomy);
    failures += run(6, "f/g constraint suite", 10, c6_dip_constraints);
    failures += run(7, "Hamiltonian residual identity", 10, c7_hamiltonian_identities);
    failures += run(8, "degree harness soundness", 30, c8_harness_soundness);
    failures += run(9, "periodic-orbit discovery", 120, c9_duffing_periodic_orbit);
    failures += run(10, "D_delta sanity", 30, c10_d_delta);
    std::printf("%d/10 criteria passed\n", 10 - failures);
    return failures == 0 ? 0 : 1;
}
