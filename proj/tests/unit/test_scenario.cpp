#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bubble/scenario.hpp"

using namespace bubble;

TEST_CASE("bubble component closed form") {
    const Scenario d = preset("Default");
    CHECK(bubble_component(0.0, d) == 0.0);
    // 10 exp(ln20 (sqrt(1.1) - sqrt(0.1))) - 10
    const double expected = 10.0 * std::exp(std::log(20.0) * (std::sqrt(1.1) - std::sqrt(0.1))) - 10.0;
    CHECK(bubble_component(1.0, d) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(bubble_component(1.0, d) == doctest::Approx(79.8).epsilon(0.01));

    const Scenario nb = preset("NoBubble");
    for (double t : {0.0, 0.3, 1.0}) {
        CHECK(bubble_component(t, nb) == 0.0);
        CHECK(bubble_trend(t, nb) == 0.0);
    }
}

TEST_CASE("bubble trend integrates to the component") {
    for (const char* name : {"Default", "BigBubble", "LowImpact"}) {
        const Scenario s = preset(name);
        for (double t : {0.1, 0.5, 0.9, 1.0}) {
            const double q = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                [&](double u) { return bubble_trend(u, s); }, 0.0, t, 15, 1e-12);
            CHECK(std::abs(q - bubble_component(t, s)) / bubble_component(t, s) < 1e-6);
        }
    }
}

TEST_CASE("bubble trend increasing on the grid") {
    const Scenario d = preset("Default");
    for (int i = 1; i <= 1000; ++i) CHECK(bubble_trend(i * 1e-3, d) > bubble_trend((i - 1) * 1e-3, d));
}

TEST_CASE("threshold and entry cdf") {
    Scenario s = preset("Default");
    CHECK(threshold(0.0, s) == 2.0);
    CHECK(threshold(1.0, s) == doctest::Approx(2.000001).epsilon(1e-12));
    s.burst.zeta_slope = 0.0;
    CHECK(threshold(0.7, s) == 2.0);

    CHECK(entry_cdf(0.0, s) == 1.0);
    CHECK(entry_cdf(0.8, s) == 1.0);
    s.entry.kind = EntryKind::atom_plus_uniform;
    s.entry.p0 = 0.5;
    s.entry.eta = 0.5;
    CHECK(entry_cdf(0.0, s) == doctest::Approx(0.5));
    CHECK(entry_cdf(0.25, s) == doctest::Approx(0.75));
    CHECK(entry_cdf(0.5, s) == doctest::Approx(1.0));
    CHECK(entry_cdf(0.9, s) == doctest::Approx(1.0));
}

TEST_CASE("running cost") {
    Scenario s = preset("Default");
    CHECK(running_cost(0.3, 0.0, 0.0, 0.0, true, s) == 0.0);
    CHECK(running_cost(0.3, 1.0, 0.0, 1.0, false, s) == doctest::Approx(0.6));
    const double t = 0.4;
    const double diff = running_cost(t, 2.0, -3.0, 1.5, true, s) - running_cost(t, 2.0, -3.0, 1.5, false, s);
    CHECK(diff == doctest::Approx(-2.0 * bubble_trend(t, s)));
    // separability: the difference does not move with a or theta_bar
    const double diff2 = running_cost(t, 2.0, 7.0, -20.0, true, s) - running_cost(t, 2.0, 7.0, -20.0, false, s);
    CHECK(diff2 == doctest::Approx(diff));
    CHECK_THROWS_AS(running_cost(t, 1.0, 0.0, 60.0, true, s), std::domain_error);
}

TEST_CASE("terminal cost") {
    const Scenario d = preset("Default");
    const Scenario nb = preset("NoBubble");
    CHECK(terminal_cost(3.0, 2.0, 0.5, nb) == doctest::Approx(40.0));
    CHECK(terminal_cost(0.0, 3.0, 0.5, d) == doctest::Approx(90.0));
    CHECK(terminal_cost(1.0, 0.0, 1.0, d) == doctest::Approx(bubble_component(1.0, d)));
    // affine in x_at_burst
    const double a = terminal_cost(0.0, 1.0, 0.6, d), b = terminal_cost(1.0, 1.0, 0.6, d),
                 c = terminal_cost(2.0, 1.0, 0.6, d);
    CHECK(c - b == doctest::Approx(b - a));
}

TEST_CASE("presets match the scenario table") {
    CHECK(preset_names().size() == 5);
    const Scenario big = preset("BigBubble");
    CHECK(big.bubble.B0 == doctest::Approx(1.3 * std::log(20.0)));
    CHECK(big.bubble.ell == 0.65);
    CHECK(preset("FearExo").burst.k == 5.0);
    const Scenario low = preset("LowImpact");
    CHECK(low.model.kappa == 0.1);
    CHECK(low.model.delta == 0.3);
    CHECK(preset("NoBubble").bubble.B0 == 0.0);
    CHECK_THROWS_AS(preset("Nope"), std::invalid_argument);
}

TEST_CASE("validate rejects broken scenarios") {
    Scenario s = preset("Default");
    CHECK_NOTHROW(s.validate());
    Scenario bad = s;
    bad.model.kappa = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = s;
    bad.burst.zeta0 = 12.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = s;
    bad.numerics.damping = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = s;
    bad.model.a_lo = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = s;
    bad.burst.zeta_slope = 0.0;
    CHECK_FALSE(bad.validate().empty());
}

TEST_CASE("config round trip and hash") {
    Scenario s = preset("LowImpact");
    set_parameter(s, "k", "3.5");
    set_parameter(s, "n_paths", "1234");
    CHECK(s.burst.k == 3.5);
    CHECK_THROWS_AS(set_parameter(s, "nonsense", "1"), std::invalid_argument);
    const Scenario back = parse_scenario(to_config_string(s));
    CHECK(to_config_string(back) == to_config_string(s));
    CHECK(scenario_hash(back) == scenario_hash(s));

    Scenario reseeded = s;
    reseeded.numerics.seed = 7;
    CHECK(scenario_hash(reseeded) == scenario_hash(s));
    Scenario moved = s;
    moved.model.phi = 0.2;
    CHECK(scenario_hash(moved) != scenario_hash(s));

    const Scenario from_preset = parse_scenario("preset = FearExo\nkappa = 0.25  # comment\n");
    CHECK(from_preset.burst.k == 5.0);
    CHECK(from_preset.model.kappa == 0.25);
}

TEST_CASE("format_double round trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-12, 79.8, 1e300}) CHECK(std::stod(format_double(v)) == v);
}
