#pragma once

#include "rwnn/reservoir.hpp"
#include "rwnn/rls.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace rwnn {

/// Exact regression moments for ReLU features of a scalar state.
///
/// With one input dimension, every feature used by the solvers has the form
///   X_k(sample) = 1{unit k active at x} * <coef_k, z(sample)>
/// for a short per-sample covariate vector z. Sorting samples by x turns each
/// unit's active set into a contiguous range, so
///   Gram_kl = coef_k^T (sum of z z^T over the overlap of both ranges) coef_l
/// is read off prefix sums in O(q^2) per entry instead of O(n).
class IntervalMoments {
public:
    /// `state` is the scalar state per sample; `covariates` is n x q; `targets` is n x m.
    IntervalMoments(std::span<const double> state, const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                    const Eigen::Ref<const Eigen::MatrixXd>& targets);

    /// Adds K features driven by `res`; row k of `coef` (K x q) gives coef_k.
    void add_block(const Reservoir& res, const Eigen::Ref<const Eigen::MatrixXd>& coef);

    [[nodiscard]] MomentAccumulator moments() const;

    [[nodiscard]] std::size_t samples() const noexcept { return order_.size(); }

private:
    using Range = std::pair<std::size_t, std::size_t>;

    void covariate_sum(std::size_t lo, std::size_t hi, Eigen::MatrixXd& out) const;

    std::vector<std::size_t> order_;
    std::vector<double> sorted_state_;
    std::size_t q_ = 0;
    std::size_t m_ = 0;
    // Prefix sums in extended precision; row r sums samples [0, r) in sorted order.
    std::vector<long double> zz_prefix_;  // (n+1) x q*q
    std::vector<long double> yz_prefix_;  // (n+1) x m*q
    std::vector<Range> ranges_;
    std::vector<Eigen::VectorXd> coefs_;
};

}  // namespace rwnn
