#include <doctest.h>

#include <cmath>

#include "bubble/simulate.hpp"
#include "fixtures.hpp"

using namespace bubble;
using testing::default_equilibrium;
using testing::small_scenario;

namespace {

PolicyField zero_policy(int n) {
    PolicyField p;
    p.z_pre.assign(n + 1, PolyFit{0.0, 1.0, {0.0}});
    p.z_post = p.z_pre;
    return p;
}

}  // namespace

TEST_CASE("serial reference and parallel kernel agree bitwise") {
    const auto& eq = default_equilibrium();
    const auto& pol = eq.policies.front();
    const auto ref = simulate_paths_reference(pol, eq.flows, eq.bundle, eq.scenario);
    for (Exec ex : {Exec::serial, Exec::parallel}) {
        const auto k = simulate_paths(pol, eq.flows, eq.bundle, eq.scenario, ex);
        CHECK(k.x == ref.x);
        CHECK(k.a == ref.a);
        CHECK(k.cost == ref.cost);
        CHECK(k.burst_step == ref.burst_step);
        CHECK(k.clamp_hits == ref.clamp_hits);
    }
}

TEST_CASE("zero control is a random walk from iota") {
    const Scenario s = small_scenario("NoBubble", 500, 20);
    const TimeGrid g = TimeGrid::from(s);
    const auto bundle = sample_bundle(s, Seed{2});
    const auto flows = MeanFlows::initial(s, g);
    const auto paths = simulate_paths(zero_policy(g.n_steps), flows, bundle, s);
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        double x = bundle.iota[p];
        CHECK(paths.x_at(p, 0) == x);
        for (int i = 0; i < g.n_steps; ++i) {
            x += s.model.sigma * bundle.dw(p, i);
            CHECK(paths.a_at(p, i) == 0.0);
            CHECK(paths.x_at(p, i + 1) == doctest::Approx(x).epsilon(1e-12));
        }
    }
}

TEST_CASE("state and control vanish before entry") {
    const Scenario s = small_scenario("Default", 200, 20);
    const TimeGrid g = TimeGrid::from(s);
    const auto bundle = sample_bundle(s, Seed{2});
    const auto flows = MeanFlows::initial(s, g);
    const auto fam = solve_family(flows, NoiseCube::from(bundle), 8, s);
    const auto paths = simulate_paths(PolicyField::from_family(fam), flows, bundle, s);
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        for (int i = 0; i < 8; ++i) {
            CHECK(paths.x_at(p, i) == 0.0);
            CHECK(paths.a_at(p, i) == 0.0);
        }
        CHECK(paths.x_at(p, 8) == bundle.iota[p]);
    }
}

TEST_CASE("huge temporary impact freezes trading") {
    Scenario s = small_scenario("Default", 2000, 20);
    s.model.kappa = 1e6;
    const TimeGrid g = TimeGrid::from(s);
    const auto bundle = sample_bundle(s, Seed{4});
    const auto flows = MeanFlows::initial(s, g);
    const auto fam = solve_family(flows, NoiseCube::from(bundle), 0, s);
    const auto paths = simulate_paths(PolicyField::from_family(fam), flows, bundle, s);
    double amax = 0.0;
    for (double a : paths.a) amax = std::max(amax, std::abs(a));
    CHECK(amax < 0.05);
}

TEST_CASE("controls stay in A and branches partition the paths") {
    const auto& eq = default_equilibrium();
    const auto& s = eq.scenario;
    const auto paths = simulate_paths(eq.policies.front(), eq.flows, eq.bundle, s);
    const int b = eq.flows.burst_step;
    std::array<std::size_t, 3> counts{};
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        const Branch br = paths.branch[p];
        ++counts[static_cast<int>(br)];
        if (br == Branch::exogenous) CHECK(paths.exo_step[p] < b);
        if (br == Branch::endogenous) CHECK((paths.exo_step[p] >= b && b < paths.n_steps));
        CHECK(paths.burst_step[p] == std::min(b, paths.exo_step[p]));
    }
    CHECK(counts[0] + counts[1] + counts[2] == paths.n_paths);
    for (double a : paths.a) CHECK((a >= s.model.a_lo && a <= s.model.a_hi));
    for (double th : eq.flows.theta_bar) CHECK((th >= s.model.a_lo && th <= s.model.a_hi));
}

TEST_CASE("price drops by beta gamma at the burst") {
    auto eq_s = default_equilibrium().scenario;
    eq_s.bubble.beta_table = {{0.0, 0.6}, {1.0, 0.9}};
    const auto& eq = default_equilibrium();
    const auto paths = simulate_paths(eq.policies.front(), eq.flows, eq.bundle, eq_s);
    const auto prices = simulate_price(paths, eq.flows, eq.bundle, eq_s);
    const TimeGrid g = TimeGrid::from(eq_s);
    const std::size_t n1 = g.n_steps + 1;
    double worst = 0.0;
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        const int is = paths.burst_step[p];
        if (is > g.n_steps) continue;
        const double t = g.t(is);
        const double pre_burst_price = prices.fundamental[p * n1 + is] + bubble_component(t, eq_s);
        const double drop = pre_burst_price - prices.price[p * n1 + is];
        worst = std::max(worst, std::abs(drop - loss_amplitude(t, eq_s) * bubble_component(t, eq_s)));
        if (is > 0)
            CHECK(prices.price[p * n1 + is - 1] - prices.fundamental[p * n1 + is - 1] ==
                  doctest::Approx(bubble_component(g.t(is - 1), eq_s)).epsilon(1e-12));
    }
    CHECK(worst <= 1e-12 * bubble_component(1.0, eq_s));

    // beta = 1: the price falls exactly to the fundamental
    const auto prices1 = simulate_price(paths, eq.flows, eq.bundle, eq.scenario);
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        const int is = paths.burst_step[p];
        if (is <= g.n_steps) CHECK(prices1.price[p * n1 + is] == prices1.fundamental[p * n1 + is]);
    }
}

TEST_CASE("no bubble: price equals fundamental") {
    const auto& eq = testing::nobubble_equilibrium();
    const auto paths = simulate_paths(eq.policies.front(), eq.flows, eq.bundle, eq.scenario);
    const auto prices = simulate_price(paths, eq.flows, eq.bundle, eq.scenario);
    CHECK(prices.price == prices.fundamental);
}

TEST_CASE("wealth: idle trader keeps zero wealth, burst removes X beta gamma") {
    Scenario s = small_scenario("Default", 3, 10);
    const TimeGrid g = TimeGrid::from(s);
    PathBundle b;
    b.n_paths = 3;
    b.n_steps = 10;
    b.dt = g.dt;
    b.dW.assign(30, 0.0);
    b.dW0.assign(30, 0.0);
    b.iota = {0.0, 2.0, 2.0};
    b.tau_exo = {0.45, 0.45, kNoBurst};
    MeanFlows flows = MeanFlows::initial(s, g);
    const auto paths = simulate_paths(zero_policy(g.n_steps), flows, b, s);
    const auto prices = simulate_price(paths, flows, b, s);
    const auto v = simulate_wealth(paths, prices, flows, b, s);
    const std::size_t n1 = 11;
    for (int i = 0; i <= 10; ++i) CHECK(v[i] == 0.0);

    const int is = paths.burst_step[1];
    CHECK(is == 5);
    const double before = v[n1 + is - 1];
    const double drift = 2.0 * bubble_trend(g.t(is - 1), s) * g.dt;
    CHECK(v[n1 + is] - before - drift == doctest::Approx(-2.0 * burst_loss(g.t(is), s)).epsilon(1e-12));
    // path 2 never bursts exogenously; tau_bar = T charges the loss at T
    CHECK(paths.burst_step[2] == 10);
    CHECK(paths.branch[2] == Branch::no_burst);
}

TEST_CASE("wealth and cost estimators agree") {
    const auto& eq = default_equilibrium();
    const auto paths = simulate_paths(eq.policies.front(), eq.flows, eq.bundle, eq.scenario);
    const auto prices = simulate_price(paths, eq.flows, eq.bundle, eq.scenario);
    const auto wealth = simulate_wealth(paths, prices, eq.flows, eq.bundle, eq.scenario);
    const Estimate jw = mean_estimate(wealth_objective_samples(paths, wealth, eq.scenario));
    const Estimate jc = mean_estimate(paths.cost);
    CHECK(std::abs(jw.mean - jc.mean) < 3.0 * std::hypot(jw.se, jc.se));
}

TEST_CASE("summary statistics") {
    const auto& eq = default_equilibrium();
    const auto paths = simulate_paths(eq.policies.front(), eq.flows, eq.bundle, eq.scenario);
    const PathStats st = summarize(paths, eq.flows, eq.scenario);
    std::size_t total = 0;
    for (const auto& b : st.by_branch) total += b.count;
    CHECK(total == st.all.count);
    for (std::size_t i = 0; i < st.t.size(); ++i)
        for (int q = 1; q < 5; ++q) CHECK(st.all.qx[q - 1][i] <= st.all.qx[q][i]);
    CHECK(st.concavity == doctest::Approx(concavity_diagnostic(eq.flows.theta_bar, eq.flows.burst_step)));
    CHECK(st.objective.mean == doctest::Approx(mean_estimate(paths.cost).mean));

    // constant paths give zero-width bands
    ControlledPaths flat = paths;
    std::fill(flat.x.begin(), flat.x.end(), 3.0);
    const PathStats fs = summarize(flat, eq.flows, eq.scenario);
    for (std::size_t i = 0; i < fs.t.size(); ++i) CHECK(fs.all.qx[0][i] == fs.all.qx[4][i]);
}

TEST_CASE("concavity diagnostic on hand-built rates") {
    // rates becoming more negative: mean inventory is concave
    std::vector<double> concave{-1, -2, -3, -4, -5, -6, -7, -8};
    CHECK(concavity_diagnostic(concave, 8) == 1.0);
    std::vector<double> convex{-8, -7, -6, -5, -4, -3, -2, -1};
    CHECK(concavity_diagnostic(convex, 8) == 0.0);
    CHECK(std::isnan(concavity_diagnostic(concave, 2)));
}

TEST_CASE("after tau_bar the mean trading speed drops") {
    const auto& eq = default_equilibrium();
    const int b = eq.flows.burst_step;
    REQUIRE(b > 1);
    REQUIRE(b < eq.grid.n_steps);
    CHECK(std::abs(eq.flows.theta_bar[b]) < 0.5 * std::abs(eq.flows.theta_bar[b - 1]));
}

TEST_CASE("controls switch to the post-burst feedback at i*") {
    const auto& eq = default_equilibrium();
    const auto& pol = eq.policies.front();
    const auto paths = simulate_paths(pol, eq.flows, eq.bundle, eq.scenario);
    std::size_t checked = 0;
    for (std::size_t p = 0; p < paths.n_paths; p += 7) {
        const int is = paths.burst_step[p];
        for (int i = 0; i < paths.n_steps; ++i) {
            const double x = paths.x_at(p, i);
            const double want = i < is ? pol.pre(i, x, eq.scenario) : pol.post(i, x, eq.scenario);
            CHECK(paths.a_at(p, i) == want);
            ++checked;
        }
    }
    CHECK(checked > 0);
}
