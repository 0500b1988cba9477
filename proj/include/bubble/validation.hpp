#pragma once

// Independent oracles: the no-bubble linear-quadratic game via Riccati ODEs, closed-form BSDEs,
// and sampler distribution checks.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "bubble/scenario.hpp"
#include "bubble/stochastics.hpp"

namespace bubble {

// Quadratic ansatz v(t,x) = p x^2 + q x + r for the no-bubble game:
//   p' = p^2/kappa - phi,          p(T) = c
//   q' = p q/kappa + delta theta,  q(T) = 0
//   r' = q^2/(4 kappa) - sigma^2 p, r(T) = 0
//   theta = -(2 p mu + q)/(2 kappa), mu' = theta, mu(0) = E[iota].
struct RiccatiSolution {
    std::vector<double> t, p, q, r;
    std::vector<double> theta_bar, mu_bar;
    double objective = 0.0;  // E[v(0, iota)]
    bool clamp_regime = false;

    double value(std::size_t i, double x) const { return p[i] * x * x + q[i] * x + r[i]; }
    double control(std::size_t i, double x, double kappa) const {
        return -(2.0 * p[i] * x + q[i]) / (2.0 * kappa);
    }
};

// Curves on the scenario's time grid. Throws std::invalid_argument unless B0 == 0.
RiccatiSolution riccati_oracle(const Scenario& s);

// p(t) = 1 / (1/c + (T - t)/kappa), valid when phi = 0.
double riccati_p_closed_form(double t, const Scenario& s);

struct AnalyticCase {
    std::string name;
    std::function<double(double w_T)> terminal;
    // Driver value and linear rate in Y (see bsde.hpp's DriverTerm), here depending on t only.
    double rate = 0.0;
    std::function<double(double t, double w)> exact_y;
    std::function<double(double t, double w)> exact_z;
};

std::vector<AnalyticCase> analytic_bsde_cases(double k = 1.0);

struct AnalyticResult {
    std::string name;
    double y0 = 0.0;        // E[Y_0] from the solver
    double y0_exact = 0.0;
    double max_z_error = 0.0;       // over steps and |w| <= 2 sqrt(t)
    double max_coef_rel_error = 0.0;  // fitted Y_t polynomial vs exact, worst step
};

AnalyticResult run_analytic_case(const AnalyticCase& c, std::size_t n_paths, int n_steps,
                                 std::uint64_t seed);

struct ValidationRow {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string detail;
};

std::vector<ValidationRow> distribution_tests(std::size_t n, std::uint64_t seed);

struct ValidationOptions {
    std::size_t analytic_paths = 100000;
    int analytic_steps = 100;
    std::size_t sampler_paths = 100000;
    int equilibrium_paths = 20000;
    int equilibrium_steps = 100;
    std::uint64_t seed = 42;
};

// Oracle self-check, analytic BSDEs, samplers, and the no-bubble equilibrium against Riccati.
std::vector<ValidationRow> run_validation_suite(const ValidationOptions& opt);

}  // namespace bubble
