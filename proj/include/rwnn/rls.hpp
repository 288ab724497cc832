#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace rwnn {

/// Running second moments for multi-output least squares:
/// gram = sum_j x_j x_j^T (p x p), cross = sum_j y_j x_j^T (m x p).
struct MomentAccumulator {
    Eigen::MatrixXd gram;
    Eigen::MatrixXd cross;
    std::size_t count = 0;

    MomentAccumulator() = default;
    MomentAccumulator(std::size_t features, std::size_t outputs);

    [[nodiscard]] std::size_t features() const noexcept { return static_cast<std::size_t>(gram.rows()); }
    [[nodiscard]] std::size_t outputs() const noexcept { return static_cast<std::size_t>(cross.rows()); }

    /// Adds the partial sums of another accumulator; callers merge partials in
    /// a fixed order to keep results reproducible.
    void merge(const MomentAccumulator& other);
};

/// X is batch x p, Y is batch x m; one sample per row.
void accumulate(MomentAccumulator& acc, const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::MatrixXd>& y);

struct RidgeSolution {
    Eigen::MatrixXd beta;         // m x p
    double lambda = 0.0;          // effective, including any jitter
    double residual_norm = 0.0;   // ||beta (G + lambda I) - C||_F / ||C||_F
    double gram_condition = 0.0;  // condition estimate of G + lambda I
    int jitter_steps = 0;
};

class SingularSystemError : public std::runtime_error {
public:
    SingularSystemError(const std::string& what, double gram_condition)
        : std::runtime_error(what), gram_condition_(gram_condition) {}
    [[nodiscard]] double gram_condition() const noexcept { return gram_condition_; }

private:
    double gram_condition_;
};

/// Scale-aware default ridge strength 1e-8 * trace(G) / p.
double default_ridge(const MomentAccumulator& acc);

/// Solves beta (G + lambda I) = C via Cholesky. If the factorization fails,
/// jitter 1e-10 * trace(G)/p is added and grown x10 at most four times.
/// `lambda` unset means default_ridge(acc).
RidgeSolution ridge_solve(const MomentAccumulator& acc, std::optional<double> lambda = std::nullopt);

}  // namespace rwnn
