#include "rwnn/interval_moments.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace rwnn {

IntervalMoments::IntervalMoments(std::span<const double> state, const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                                 const Eigen::Ref<const Eigen::MatrixXd>& targets) {
    const std::size_t n = state.size();
    if (static_cast<std::size_t>(covariates.rows()) != n || static_cast<std::size_t>(targets.rows()) != n)
        throw std::invalid_argument("interval moments: sample counts disagree");
    q_ = static_cast<std::size_t>(covariates.cols());
    m_ = static_cast<std::size_t>(targets.cols());

    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t l, std::size_t r) { return state[l] < state[r]; });
    sorted_state_.resize(n);
    for (std::size_t r = 0; r < n; ++r) sorted_state_[r] = state[order_[r]];

    const std::size_t zz = q_ * q_;
    const std::size_t yz = m_ * q_;
    zz_prefix_.assign((n + 1) * zz, 0.0L);
    yz_prefix_.assign((n + 1) * yz, 0.0L);
    for (std::size_t r = 0; r < n; ++r) {
        const auto j = static_cast<Eigen::Index>(order_[r]);
        const long double* zp = zz_prefix_.data() + r * zz;
        long double* zn = zz_prefix_.data() + (r + 1) * zz;
        for (std::size_t a = 0; a < q_; ++a)
            for (std::size_t b = 0; b < q_; ++b)
                zn[a * q_ + b] = zp[a * q_ + b] + static_cast<long double>(covariates(j, static_cast<Eigen::Index>(a))) *
                                                      covariates(j, static_cast<Eigen::Index>(b));
        const long double* yp = yz_prefix_.data() + r * yz;
        long double* yn = yz_prefix_.data() + (r + 1) * yz;
        for (std::size_t o = 0; o < m_; ++o)
            for (std::size_t a = 0; a < q_; ++a)
                yn[o * q_ + a] = yp[o * q_ + a] + static_cast<long double>(targets(j, static_cast<Eigen::Index>(o))) *
                                                      covariates(j, static_cast<Eigen::Index>(a));
    }
}

void IntervalMoments::add_block(const Reservoir& res, const Eigen::Ref<const Eigen::MatrixXd>& coef) {
    if (res.input_dim() != 1) throw std::invalid_argument("interval moments: reservoir must have scalar input");
    if (static_cast<std::size_t>(coef.cols()) != q_ || coef.rows() != res.bias.size())
        throw std::invalid_argument("interval moments: coefficient block has the wrong shape");
    const std::size_t n = sorted_state_.size();
    for (Eigen::Index k = 0; k < res.bias.size(); ++k) {
        const double w = res.weights(k, 0);
        auto is_active = [&](double x) { return active(preactivation(res, k, &x)); };
        Range range;
        if (w > 0.0) {
            // Activity is monotone in x for a fixed unit, including under rounding.
            auto it = std::partition_point(sorted_state_.begin(), sorted_state_.end(),
                                           [&](double x) { return !is_active(x); });
            range = {static_cast<std::size_t>(it - sorted_state_.begin()), n};
        } else if (w < 0.0) {
            auto it = std::partition_point(sorted_state_.begin(), sorted_state_.end(),
                                           [&](double x) { return is_active(x); });
            range = {0, static_cast<std::size_t>(it - sorted_state_.begin())};
        } else {
            range = active(res.bias[k]) ? Range{0, n} : Range{0, 0};
        }
        ranges_.push_back(range);
        coefs_.emplace_back(coef.row(k).transpose());
    }
}

void IntervalMoments::covariate_sum(std::size_t lo, std::size_t hi, Eigen::MatrixXd& out) const {
    const std::size_t zz = q_ * q_;
    const long double* a = zz_prefix_.data() + lo * zz;
    const long double* b = zz_prefix_.data() + hi * zz;
    for (std::size_t r = 0; r < q_; ++r)
        for (std::size_t c = 0; c < q_; ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<double>(b[r * q_ + c] - a[r * q_ + c]);
}

MomentAccumulator IntervalMoments::moments() const {
    const std::size_t p = ranges_.size();
    MomentAccumulator acc(p, m_);
    acc.count = sorted_state_.size();
    Eigen::MatrixXd block(static_cast<Eigen::Index>(q_), static_cast<Eigen::Index>(q_));
    Eigen::VectorXd projected(static_cast<Eigen::Index>(q_));
    for (std::size_t k = 0; k < p; ++k) {
        for (std::size_t l = 0; l <= k; ++l) {
            const std::size_t lo = std::max(ranges_[k].first, ranges_[l].first);
            const std::size_t hi = std::min(ranges_[k].second, ranges_[l].second);
            double v = 0.0;
            if (lo < hi) {
                covariate_sum(lo, hi, block);
                v = coefs_[k].dot(block * coefs_[l]);
            }
            acc.gram(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = v;
            acc.gram(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = v;
        }
        const auto [lo, hi] = ranges_[k];
        if (lo >= hi) continue;
        const std::size_t yz = m_ * q_;
        const long double* a = yz_prefix_.data() + lo * yz;
        const long double* b = yz_prefix_.data() + hi * yz;
        for (std::size_t o = 0; o < m_; ++o) {
            for (std::size_t c = 0; c < q_; ++c)
                projected[static_cast<Eigen::Index>(c)] = static_cast<double>(b[o * q_ + c] - a[o * q_ + c]);
            acc.cross(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(k)) = coefs_[k].dot(projected);
        }
    }
    return acc;
}

}  // namespace rwnn
