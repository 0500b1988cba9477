#pragma once

// Least-squares Monte Carlo conditional expectations on a polynomial basis in the state.

#include <span>
#include <vector>

#include "bubble/kernels.hpp"

namespace bubble {

// Polynomial in the standardised coordinate u = (x - center) / scale.
struct PolyFit {
    double center = 0.0;
    double scale = 1.0;
    std::vector<double> coef;

    double operator()(double x) const;
    double derivative(double x) const;
    int degree() const { return static_cast<int>(coef.size()) - 1; }

    // In-place additions expressed in x units.
    void add_constant(double c);
    void add_linear(double slope);
    // Coefficients of the same polynomial in raw powers of x, constant first.
    std::vector<double> raw_coefficients() const;
};

struct RegressionStats {
    int fits = 0;
    int fallbacks = 0;  // fits that dropped to a lower degree
};

// Projection of values onto span{1, x, ..., x^degree}, degree lowered on rank deficiency.
PolyFit condexp(std::span<const double> values, std::span<const double> states, int degree,
                RegressionStats* stats = nullptr, Exec exec = Exec::parallel);

struct StepFit {
    PolyFit y;  // E[Y_{i+1} | X_i]
    PolyFit z;  // E[Y_{i+1} dW_i | X_i] / dt
};

// One backward step: joint regression of y_next on {phi(x), phi(x) dW, phi(x) (dW^2 - dt)}.
// The dW block coefficient is the martingale-increment estimate of Z.
StepFit martingale_regression(std::span<const double> y_next, std::span<const double> states,
                              std::span<const double> dw, double dt, int degree,
                              RegressionStats* stats = nullptr, Exec exec = Exec::parallel);

}  // namespace bubble
