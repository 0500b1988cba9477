#include "bubble/kernels.hpp"

#include <cstdlib>
#include <string>

namespace bubble {

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_thread_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int apply_thread_env() {
    if (const char* env = std::getenv("BUBBLE_THREADS")) {
        try {
            set_thread_count(std::stoi(env));
        } catch (...) {
        }
    }
    return thread_count();
}

namespace {

void accumulate_rows(std::span<const double> design, std::size_t cols,
                     std::span<const double> target, std::size_t lo, std::size_t hi,
                     Eigen::MatrixXd& gram, Eigen::VectorXd& rhs) {
    for (std::size_t p = lo; p < hi; ++p) {
        const double* row = design.data() + p * cols;
        const double y = target[p];
        for (std::size_t a = 0; a < cols; ++a) {
            const double fa = row[a];
            rhs[a] += fa * y;
            for (std::size_t b = a; b < cols; ++b) gram(a, b) += fa * row[b];
        }
    }
}

void symmetrize(Eigen::MatrixXd& gram) {
    for (Eigen::Index a = 0; a < gram.rows(); ++a)
        for (Eigen::Index b = 0; b < a; ++b) gram(a, b) = gram(b, a);
}

}  // namespace

NormalEquations accumulate_normal_equations(std::span<const double> design, std::size_t cols,
                                            std::span<const double> target, Exec exec) {
    const std::size_t n = target.size();
    const std::size_t n_blocks = (n + kReduceBlock - 1) / kReduceBlock;
    const auto m = static_cast<Eigen::Index>(cols);
    std::vector<Eigen::MatrixXd> grams(n_blocks, Eigen::MatrixXd::Zero(m, m));
    std::vector<Eigen::VectorXd> rhss(n_blocks, Eigen::VectorXd::Zero(m));
    for_each_path(n_blocks, exec, [&](std::size_t b) {
        const std::size_t lo = b * kReduceBlock;
        accumulate_rows(design, cols, target, lo, std::min(n, lo + kReduceBlock), grams[b], rhss[b]);
    });
    NormalEquations out{Eigen::MatrixXd::Zero(m, m), Eigen::VectorXd::Zero(m)};
    for (std::size_t b = 0; b < n_blocks; ++b) {
        out.gram += grams[b];
        out.rhs += rhss[b];
    }
    symmetrize(out.gram);
    return out;
}

NormalEquations accumulate_normal_equations_reference(std::span<const double> design,
                                                      std::size_t cols,
                                                      std::span<const double> target) {
    const auto m = static_cast<Eigen::Index>(cols);
    NormalEquations out{Eigen::MatrixXd::Zero(m, m), Eigen::VectorXd::Zero(m)};
    accumulate_rows(design, cols, target, 0, target.size(), out.gram, out.rhs);
    symmetrize(out.gram);
    return out;
}

}  // namespace bubble
