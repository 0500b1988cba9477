#include "bubble/validation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/numeric/odeint.hpp>

#include "bubble/bsde.hpp"
#include "bubble/equilibrium.hpp"
#include "bubble/flows.hpp"

namespace bubble {

namespace {

namespace ode = boost::numeric::odeint;
using State = std::array<double, 4>;  // p, q, mu, r
constexpr double kOdeTol = 1e-8;

struct RiccatiSystem {
    double kappa, phi, delta, sigma;
    void operator()(const State& y, State& dy, double) const {
        const double p = y[0], q = y[1], mu = y[2];
        const double theta = -(2.0 * p * mu + q) / (2.0 * kappa);
        dy[0] = p * p / kappa - phi;
        dy[1] = p * q / kappa + delta * theta;
        dy[2] = theta;
        dy[3] = q * q / (4.0 * kappa) - sigma * sigma * p;
    }
};

// Integrates from T down to 0 and returns the states at the requested (descending) times.
std::vector<State> integrate_back(const RiccatiSystem& sys, State terminal,
                                  const std::vector<double>& times_desc) {
    std::vector<State> out;
    auto stepper = ode::make_controlled(kOdeTol, kOdeTol, ode::runge_kutta_dopri5<State>());
    const double dt0 = -(times_desc.front() - times_desc.back()) / 1000.0;
    ode::integrate_times(stepper, sys, terminal, times_desc.begin(), times_desc.end(), dt0,
                         [&](const State& y, double) { out.push_back(y); });
    return out;
}

struct InitialMoments {
    double mean, second;
};

InitialMoments initial_moments(const Scenario& s) {
    const double m = s.init.mean, sd = s.init.std;
    if (!s.init.truncate_at_zero || sd == 0.0) return {m, sd * sd + m * m};
    const double alpha = -m / sd;
    const double pdf = std::exp(-0.5 * alpha * alpha) / std::sqrt(2.0 * M_PI);
    const double tail = 0.5 * std::erfc(alpha / std::sqrt(2.0));
    const double lambda = pdf / tail;
    const double mean = m + sd * lambda;
    const double var = sd * sd * (1.0 + alpha * lambda - lambda * lambda);
    return {mean, var + mean * mean};
}

}  // namespace

RiccatiSolution riccati_oracle(const Scenario& s) {
    if (s.bubble.B0 != 0.0) throw std::invalid_argument("riccati_oracle: requires B0 = 0");
    const auto& m = s.model;
    const RiccatiSystem sys{m.kappa, m.phi, m.delta, m.sigma};
    const int n = s.numerics.n_steps;
    std::vector<double> times(n + 1);
    for (int i = 0; i <= n; ++i) times[i] = m.T * (n - i) / n;  // descending
    const auto moments = initial_moments(s);

    // mu(0) is affine in the unknown mu(T): two probes fix the map, a third run is exact.
    auto mu0 = [&](double muT) { return integrate_back(sys, {m.c, 0.0, muT, 0.0}, times).back()[2]; };
    const double a = mu0(0.0);
    const double slope = mu0(1.0) - a;
    if (std::abs(slope) < 1e-300) throw std::runtime_error("riccati_oracle: degenerate shooting map");
    const double muT = (moments.mean - a) / slope;
    const auto states = integrate_back(sys, {m.c, 0.0, muT, 0.0}, times);

    RiccatiSolution out;
    for (int i = 0; i <= n; ++i) {
        const State& y = states[n - i];
        out.t.push_back(times[n - i]);
        out.p.push_back(y[0]);
        out.q.push_back(y[1]);
        out.mu_bar.push_back(y[2]);
        out.r.push_back(y[3]);
        out.theta_bar.push_back(-(2.0 * y[0] * y[2] + y[1]) / (2.0 * m.kappa));
    }
    out.objective = out.p[0] * moments.second + out.q[0] * moments.mean + out.r[0];

    const double sd0 = std::sqrt(std::max(0.0, moments.second - moments.mean * moments.mean));
    for (int i = 0; i <= n; ++i) {
        const double spread = 5.0 * std::sqrt(sd0 * sd0 + m.sigma * m.sigma * out.t[i]);
        for (double x : {out.mu_bar[i] - spread, out.mu_bar[i] + spread}) {
            const double a_x = out.control(i, x, m.kappa);
            if (a_x < m.a_lo || a_x > m.a_hi) out.clamp_regime = true;
        }
    }
    return out;
}

double riccati_p_closed_form(double t, const Scenario& s) {
    return 1.0 / (1.0 / s.model.c + (s.model.T - t) / s.model.kappa);
}

std::vector<AnalyticCase> analytic_bsde_cases(double k) {
    std::vector<AnalyticCase> cases;
    cases.push_back({"terminal W_T^2, zero driver", [](double w) { return w * w; }, 0.0,
                     [](double t, double w) { return w * w + (1.0 - t); },
                     [](double, double w) { return 2.0 * w; }});
    cases.push_back({"terminal W_T, zero driver", [](double w) { return w; }, 0.0,
                     [](double, double w) { return w; }, [](double, double) { return 1.0; }});
    cases.push_back({"terminal 1, driver -kY", [](double) { return 1.0; }, k,
                     [k](double t, double) { return std::exp(-k * (1.0 - t)); },
                     [](double, double) { return 0.0; }});
    return cases;
}

AnalyticResult run_analytic_case(const AnalyticCase& c, std::size_t n_paths, int n_steps,
                                 std::uint64_t seed) {
    Scenario s;
    s.model.T = 1.0;
    s.init.mean = 0.0;
    s.init.std = 0.0;
    s.numerics.n_paths = static_cast<int>(n_paths);
    s.numerics.n_steps = n_steps;
    const auto bundle = sample_bundle(s, Seed{seed});
    const auto cube = NoiseCube::from(bundle);
    const auto w = driftless_states(cube, 1.0, 0);

    const double rate = c.rate;
    const Driver driver = [rate](int, double, double) { return DriverTerm{0.0, rate}; };
    const auto sol = backward_solve(cube, w, 0, 1.0, c.terminal, driver, BackwardOptions{2, 0.0, Exec::parallel});

    AnalyticResult r;
    r.name = c.name;
    double sum = 0.0;
    for (double v : sol.start_values) sum += v;
    r.y0 = sum / n_paths;
    r.y0_exact = c.exact_y(0.0, 0.0);
    const double dt = 1.0 / n_steps;
    for (int i = 0; i < n_steps; ++i) {
        const double t = i * dt;
        const double half = 2.0 * std::sqrt(t);
        for (int j = -4; j <= 4; ++j) {
            const double x = half * j / 4.0;
            r.max_z_error = std::max(r.max_z_error, std::abs(sol.z[i](x) - c.exact_z(t, x)));
        }
        if (i == 0) continue;  // all states equal at t = 0
        const double e0 = c.exact_y(t, 0.0), ep = c.exact_y(t, 1.0), em = c.exact_y(t, -1.0);
        const std::array<double, 3> exact{e0, 0.5 * (ep - em), 0.5 * (ep + em) - e0};
        auto raw = sol.value[i].raw_coefficients();
        raw.resize(3, 0.0);
        double num = 0.0, den = 0.0;
        for (int k = 0; k < 3; ++k) {
            num = std::max(num, std::abs(raw[k] - exact[k]));
            den = std::max(den, std::abs(exact[k]));
        }
        r.max_coef_rel_error = std::max(r.max_coef_rel_error, num / den);
    }
    return r;
}

namespace {

std::string fmt(double v) { return format_double(v); }

ValidationRow row(std::string name, double measured, double tol, std::string detail = {}) {
    return {std::move(name), measured, tol, measured < tol, std::move(detail)};
}

}  // namespace

std::vector<ValidationRow> distribution_tests(std::size_t n, std::uint64_t seed) {
    std::vector<ValidationRow> rows;
    for (double k : {2.0, 5.0}) {
        const auto tau = sample_exogenous(k, n, Seed{seed});
        for (double t : {0.25, 0.5, 1.0}) {
            const double emp = static_cast<double>(std::count_if(tau.begin(), tau.end(),
                                                                 [t](double x) { return x > t; })) / n;
            const double exact = std::exp(-k * t * t / 2.0);
            rows.push_back(row("survival k=" + fmt(k) + " t=" + fmt(t), std::abs(emp - exact), 0.01,
                               "empirical " + fmt(emp) + " vs " + fmt(exact)));
        }
    }
    {
        const double k = 2.0;
        const auto tau = sample_exogenous(k, n, Seed{seed});
        double s1 = 0.0, s2 = 0.0;
        for (double x : tau) { s1 += x; s2 += x * x; }
        const double mean = s1 / n;
        const double se = std::sqrt((s2 / n - mean * mean) / n);
        const double exact = std::sqrt(M_PI / (2.0 * k));
        rows.push_back(row("exogenous mean k=2", std::abs(mean - exact), 3.0 * se,
                           "mean " + fmt(mean) + " vs " + fmt(exact)));
    }
    {
        const auto tau = sample_exogenous(0.0, std::min<std::size_t>(n, 1000), Seed{seed});
        const bool all_inf = std::all_of(tau.begin(), tau.end(), [](double x) { return std::isinf(x); });
        rows.push_back(row("k=0 never bursts", all_inf ? 0.0 : 1.0, 0.5));
    }
    {
        Scenario s;
        s.numerics.n_paths = static_cast<int>(n);
        s.numerics.n_steps = 10;
        const auto b = sample_bundle(s, Seed{seed});
        double m = 0.0;
        for (double x : b.iota) m += x;
        m /= n;
        rows.push_back(row("initial inventory mean", std::abs(m - s.init.mean),
                           3.0 * s.init.std / std::sqrt(static_cast<double>(n)), "mean " + fmt(m)));
        double v = 0.0, mu = 0.0;
        for (std::size_t p = 0; p < n; ++p) mu += b.dw(p, 0);
        mu /= n;
        for (std::size_t p = 0; p < n; ++p) v += (b.dw(p, 0) - mu) * (b.dw(p, 0) - mu);
        v /= (n - 1);
        rows.push_back(row("increment variance", std::abs(v - b.dt),
                           3.0 * b.dt * std::sqrt(2.0 / n), "variance " + fmt(v) + " vs dt " + fmt(b.dt)));
    }
    return rows;
}

std::vector<ValidationRow> run_validation_suite(const ValidationOptions& opt) {
    std::vector<ValidationRow> rows;

    {
        Scenario s = preset("NoBubble");
        s.model.phi = 0.0;
        s.model.delta = 0.0;
        s.numerics.n_steps = 100;
        const auto sol = riccati_oracle(s);
        double err = 0.0;
        for (std::size_t i = 0; i < sol.t.size(); ++i) {
            const double exact = riccati_p_closed_form(sol.t[i], s);
            err = std::max(err, std::abs(sol.p[i] - exact) / std::max(1.0, std::abs(exact)));
        }
        double qmax = 0.0;
        for (double q : sol.q) qmax = std::max(qmax, std::abs(q));
        rows.push_back(row("riccati p closed form (phi=delta=0), relative", err, 1e-8));
        rows.push_back(row("riccati q vanishes (delta=0)", qmax, 1e-12));
    }

    for (const auto& c : analytic_bsde_cases()) {
        const auto r = run_analytic_case(c, opt.analytic_paths, opt.analytic_steps, opt.seed);
        const double dt = 1.0 / opt.analytic_steps;
        if (c.rate > 0.0) {
            rows.push_back(row(c.name + ": Y0", std::abs(r.y0 - r.y0_exact), c.rate * c.rate * dt,
                               "Y0 " + fmt(r.y0) + " vs " + fmt(r.y0_exact)));
        } else {
            rows.push_back(row(c.name + ": E[Y0]", std::abs(r.y0 - r.y0_exact), 0.02,
                               "Y0 " + fmt(r.y0) + " vs " + fmt(r.y0_exact)));
            rows.push_back(row(c.name + ": Z", r.max_z_error, 0.05));
            rows.push_back(row(c.name + ": Y coefficients", r.max_coef_rel_error, 0.05));
        }
    }

    for (auto& r : distribution_tests(opt.sampler_paths, opt.seed)) rows.push_back(std::move(r));

    {
        Scenario s = preset("NoBubble");
        s.numerics.n_paths = opt.equilibrium_paths;
        s.numerics.n_steps = opt.equilibrium_steps;
        s.numerics.seed = opt.seed;
        const auto oracle = riccati_oracle(s);
        const auto eq = picard_solve(s);
        double dmu = 0.0, dtheta = 0.0;
        for (int i = 0; i <= s.numerics.n_steps; ++i) {
            dmu = std::max(dmu, std::abs(eq.flows.mu_bar[i] - oracle.mu_bar[i]));
            if (i < s.numerics.n_steps)
                dtheta = std::max(dtheta, std::abs(eq.flows.theta_bar[i] - oracle.theta_bar[i]));
        }
        const std::string regime = oracle.clamp_regime ? " (oracle flags clamp regime)" : "";
        rows.push_back(row("no-bubble mean inventory vs riccati", dmu, 0.15, "sup |mu - mu_ode|" + regime));
        rows.push_back(row("no-bubble mean rate vs riccati", dtheta, 0.3, "sup |theta - theta_ode|" + regime));
        rows.push_back(row("no-bubble objective vs riccati", std::abs(eq.objective.mean - oracle.objective),
                           3.0 * eq.objective.se,
                           "J " + fmt(eq.objective.mean) + " +- " + fmt(eq.objective.se) + " vs " +
                               fmt(oracle.objective)));
        rows.push_back(row("no-bubble fixed point converged", eq.report.converged ? 0.0 : 1.0, 0.5,
                           std::to_string(eq.report.iterations) + " iterations"));
    }
    return rows;
}

}  // namespace bubble
