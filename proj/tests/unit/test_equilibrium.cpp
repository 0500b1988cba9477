#include <doctest.h>

#include <cmath>

#include "bubble/equilibrium.hpp"
#include "fixtures.hpp"

using namespace bubble;
using testing::small_scenario;

TEST_CASE("endogenous burst uses the running minimum") {
    Scenario s = preset("Default");
    s.burst.zeta_slope = 0.0;
    const TimeGrid g(100, 1.0);
    std::vector<double> mu(101, 10.0);
    CHECK(endogenous_burst(mu, g, s) == 1.0);
    for (int i = 0; i <= 100; ++i) mu[i] = 10.0 - 10.0 * g.t(i);
    CHECK(endogenous_burst(mu, g, s) == doctest::Approx(0.8));
    for (int i = 0; i <= 100; ++i) {
        const double t = g.t(i);
        mu[i] = t <= 0.3 ? 10.0 - (8.1 / 0.3) * t : 1.9 + (3.1 / 0.7) * (t - 0.3);
    }
    CHECK(endogenous_burst(mu, g, s) == doctest::Approx(0.3));
    // t = 0 never counts
    mu.assign(101, 1.0);
    CHECK(endogenous_burst(mu, g, s) == doctest::Approx(0.01));
}

TEST_CASE("entry grid") {
    Scenario s = preset("Default");
    const TimeGrid g(100, 1.0);
    const EntryGrid fixed = make_entry_grid(s, g);
    CHECK(fixed.size() == 1);
    CHECK(fixed.steps[0] == 0);
    CHECK(fixed.weights[0] == 1.0);

    s.entry.kind = EntryKind::atom_plus_uniform;
    s.entry.p0 = 0.4;
    s.entry.eta = 0.5;
    s.entry.n_entry_grid = 6;
    const EntryGrid e = make_entry_grid(s, g);
    CHECK(e.size() == 6);
    double total = 0.0;
    for (double w : e.weights) total += w;
    CHECK(total == doctest::Approx(1.0));
    CHECK(e.weights[0] == doctest::Approx(0.4));
    for (std::size_t j = 1; j < e.size(); ++j) {
        CHECK(e.steps[j] >= e.steps[j - 1]);
        CHECK(e.times[j] <= 0.5);
    }
    CHECK(e.entered_mass(0) == doctest::Approx(0.4));
    CHECK(e.entered_mass(100) == doctest::Approx(1.0));
}

TEST_CASE("entry weighted mean: two-point entry") {
    EntryGrid e;
    e.times = {0.0, 0.5};
    e.steps = {0, 50};
    e.weights = {0.5, 0.5};
    std::vector<std::vector<double>> m{std::vector<double>(101, 4.0), std::vector<double>(101, 0.0)};
    for (int i = 50; i <= 100; ++i) m[1][i] = 8.0;
    const auto out = entry_weighted_mean(m, e, 100);
    CHECK(out[25] == doctest::Approx(4.0));  // only the entered half counts, renormalised
    CHECK(out[50] == doctest::Approx(6.0));
    CHECK(out[100] == doctest::Approx(6.0));
}

TEST_CASE("fixed entry: flows are plain path means") {
    const auto& eq = testing::default_equilibrium();
    const auto paths = simulate_paths(eq.policies.front(), eq.flows, eq.bundle, eq.scenario);
    const int n = eq.grid.n_steps;
    for (int i = 0; i < n; ++i) {
        double ma = 0.0, mx = 0.0;
        for (std::size_t p = 0; p < paths.n_paths; ++p) {
            ma += paths.a_at(p, i);
            mx += paths.x_at(p, i);
        }
        CHECK(eq.response.theta_bar[i] == doctest::Approx(ma / paths.n_paths).epsilon(1e-12));
        CHECK(eq.response.mu_bar[i] == doctest::Approx(mx / paths.n_paths).epsilon(1e-12));
    }
}

TEST_CASE("zero-cost scenario: nobody trades") {
    Scenario s = small_scenario("Default", 3000, 20);
    s.model.phi = 0.0;
    s.model.c = 1e-12;  // must stay positive
    s.model.delta = 0.0;
    s.bubble.B0 = 0.0;
    s.numerics.max_iter = 10;  // only the sampling noise of mu_bar is left to damp out
    const auto eq = picard_solve(s);
    for (double th : eq.response.theta_bar) CHECK(std::abs(th) < 1e-8);
    for (double m : eq.response.mu_bar) CHECK(std::abs(m - 10.0) < 3.0 * std::sqrt((4.0 + 1.0) / 3000.0));
    CHECK(std::abs(eq.objective.mean) < 1e-8);
    CHECK(eq.report.converged);
}

TEST_CASE("picard on no bubble converges to a consistent fixed point") {
    const auto& eq = testing::nobubble_equilibrium();
    CHECK(eq.report.converged);
    CHECK(eq.report.residuals.back() < eq.scenario.numerics.tol);
    CHECK(endogenous_burst(eq.flows.mu_bar, eq.grid, eq.scenario) == eq.flows.tau_bar);
    for (double r : eq.report.residuals) CHECK(std::isfinite(r));
    const Estimate iota = mean_estimate(eq.bundle.iota);
    CHECK(eq.flows.mu_bar[0] == doctest::Approx(iota.mean));
    CHECK(std::abs(iota.mean - 10.0) < 3.0 * iota.se);
}

TEST_CASE("one undamped step from the fixed point stays within tolerance") {
    const auto& eq = testing::nobubble_equilibrium();
    Scenario s = eq.scenario;
    s.numerics.damping = 1.0;
    s.numerics.max_iter = 1;
    PicardOptions opt;
    opt.initial = eq.flows;
    const auto again = picard_solve(s, opt);
    CHECK(again.report.residuals.front() < eq.scenario.numerics.tol);
}

TEST_CASE("picard is deterministic") {
    Scenario s = small_scenario("Default", 1500, 25);
    s.numerics.max_iter = 4;
    const auto a = picard_solve(s);
    const auto b = picard_solve(s);
    CHECK(a.flows.theta_bar == b.flows.theta_bar);
    CHECK(a.flows.mu_bar == b.flows.mu_bar);
    CHECK(a.report.residuals == b.report.residuals);
}

TEST_CASE("default equilibrium bursts inside the horizon") {
    const auto& eq = testing::default_equilibrium();
    CHECK(eq.report.converged);
    CHECK(eq.flows.tau_bar > 0.0);
    CHECK(eq.flows.tau_bar < eq.scenario.model.T);
}

TEST_CASE("tower value matches the simulated objective") {
    for (const auto* eq : {&testing::nobubble_equilibrium(), &testing::default_equilibrium()}) {
        const NoiseCube cube = NoiseCube::from(eq->bundle);
        const auto& fam = eq->families.front();
        std::vector<double> y0(cube.n_paths);
        for (std::size_t p = 0; p < cube.n_paths; ++p) y0[p] = fam.y0_value(0, cube.iota[p], cube.iota[p]);
        const Estimate ey = mean_estimate(y0);
        CHECK(tower_value(eq->families, eq->entry, cube) == doctest::Approx(ey.mean));
        CHECK(std::abs(ey.mean - eq->objective.mean) < 3.0 * std::hypot(ey.se, eq->objective.se));
    }
}

TEST_CASE("varying entry aggregates entered cohorts only") {
    Scenario s = small_scenario("Default", 1500, 40);
    s.entry.kind = EntryKind::atom_plus_uniform;
    s.entry.p0 = 0.5;
    s.entry.eta = 0.5;
    s.entry.n_entry_grid = 3;
    const TimeGrid g = TimeGrid::from(s);
    const EntryGrid entry = make_entry_grid(s, g);
    const auto bundle = sample_bundle(s, Seed{3});
    const auto cube = NoiseCube::from(bundle);
    const auto flows = MeanFlows::initial(s, g);
    const auto fams = solve_families(flows, cube, entry, s);
    const auto resp = forward_response(fams, entry, flows, bundle, s);
    const auto first = simulate_paths(PolicyField::from_family(fams[0]), flows, bundle, s);
    for (int i = 0; i < entry.steps[1]; ++i) {
        double m = 0.0;
        for (std::size_t p = 0; p < first.n_paths; ++p) m += first.x_at(p, i);
        CHECK(resp.flows.mu_bar[i] == doctest::Approx(m / first.n_paths).epsilon(1e-12));
    }
    // at its entry step a cohort holds exactly iota
    const int j = entry.steps[1];
    double m0 = 0.0;
    for (std::size_t p = 0; p < first.n_paths; ++p) m0 += first.x_at(p, j);
    m0 /= first.n_paths;
    const double w0 = entry.weights[0], w1 = entry.weights[1];
    CHECK(resp.flows.mu_bar[j] ==
          doctest::Approx((w0 * m0 + w1 * mean_estimate(bundle.iota).mean) / (w0 + w1)).epsilon(1e-12));
}

TEST_CASE("residual and damping") {
    const TimeGrid g(10, 1.0);
    const Scenario s = preset("Default");
    MeanFlows a = MeanFlows::initial(s, g), b = a;
    CHECK(flow_residual(a, b, 1.0) == 0.0);
    for (auto& v : b.theta_bar) v = -4.0;
    for (auto& v : b.mu_bar) v = 6.0;
    b.tau_bar = 0.5;
    CHECK(flow_residual(a, b, 1.0) == doctest::Approx(4.0 + 0.5));
    const MeanFlows d = damp(a, b, 0.25, g, s);
    CHECK(d.theta_bar[3] == doctest::Approx(-1.0));
    CHECK(d.mu_bar[3] == doctest::Approx(9.0));
    CHECK(d.tau_bar == endogenous_burst(d.mu_bar, g, s));
}
