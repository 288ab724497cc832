#pragma once

#include "rwnn/core.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace rwnn {

/// Correlated multi-asset Black-Scholes under the pricing measure.
struct BlackScholesModel {
    Eigen::VectorXd spot;    // S0, one per asset
    double rate = 0.0;       // r
    Eigen::VectorXd sigma;   // per-asset volatility
    Eigen::MatrixXd corr;    // d x d

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(spot.size()); }
    void validate() const;

    static BlackScholesModel independent(Eigen::VectorXd spot, double rate, Eigen::VectorXd sigma);
};

/// Rough Bergomi: V_t = xi0(t) * Wick-exp(eta * What_t), What_t = sqrt(2H) int_0^t (t-u)^{H-1/2} dW^1_u,
/// log-price driven by rho1 dW^1 + sqrt(1-rho1^2) dW^2.
struct RoughBergomiModel {
    double hurst = 0.3;
    double eta = 1.9;
    double rho1 = -0.7;
    double rate = 0.01;
    double spot = 1.0;
    std::function<double(double)> xi0;

    [[nodiscard]] double rho2() const;
    void validate() const;

    static RoughBergomiModel flat(double hurst, double eta, double rho1, double rate, double spot, double xi);
};

enum class HistoryWeights {
    /// Weight^2 * delta equals the kernel's squared L2 mass on the cell, so
    /// Var(What_{t_i}) = t_i^{2H} holds exactly on any grid.
    variance_matched,
    /// Cell average of the kernel (optimal-abscissa Riemann weights of the
    /// classical hybrid scheme); preserves Cov(What, W^1) on each cell.
    optimal_abscissa,
};

/// Precomputed hybrid-scheme (kappa = 1) coefficients for the sqrt(2H)-normalized
/// power kernel on a fixed grid.
///
/// What_{t_i} = I_{i-1} + sum_{j <= i-2} weight(i, j) * dW_j, where
/// I_{i-1} = sqrt(2H) int_{t_{i-1}}^{t_i} (t_i - s)^{H-1/2} dW_s is drawn jointly
/// with dW_{i-1} from its exact 2x2 covariance.
struct VolterraKernelPlan {
    double hurst = 0.5;
    TimeGrid grid;
    HistoryWeights scheme = HistoryWeights::variance_matched;
    /// Lower Cholesky factor (l11, l21, l22) of Cov(dW_i, I_i) per step.
    std::vector<std::array<double, 3>> recent_factor;
    /// Exact Cov(dW_i, I_i) entries (var dW, cov, var I) per step.
    std::vector<std::array<double, 3>> recent_cov;
    /// Row i holds weights for dW_0..dW_{i-2}; packed triangular.
    std::vector<double> history;
    /// Var(What_{t_i}) implied by the plan.
    std::vector<double> implied_variance;

    [[nodiscard]] double weight(std::size_t i, std::size_t j) const { return history[row_offset(i) + j]; }
    static std::size_t row_offset(std::size_t i) { return i < 2 ? 0 : (i - 2) * (i - 1) / 2; }
};

VolterraKernelPlan build_volterra_plan(double hurst, const TimeGrid& grid,
                                       HistoryWeights scheme = HistoryWeights::variance_matched);

/// Log-Euler paths; states are log-prices, increments are the correlated dW.
PathBatch simulate_bs_paths(const BlackScholesModel& model, const TimeGrid& grid, std::size_t n, SeedSpec seeds);

/// One Black-Scholes path: states (N+1)*d log-prices, increments N*d.
void simulate_bs_path(const BlackScholesModel& model, const Eigen::MatrixXd& corr_factor, const TimeGrid& grid,
                      SeedSpec seeds, std::size_t path, std::span<double> states, std::span<double> increments);

/// Log-price, variance and What paths; increments hold (dW^1, dW^2) per step.
PathBatch simulate_rbergomi_paths(const RoughBergomiModel& model, const VolterraKernelPlan& plan,
                                  const TimeGrid& grid, std::size_t n, SeedSpec seeds);

/// One rough Bergomi path. Spans have N+1 entries except increments (2N).
void simulate_rbergomi_path(const RoughBergomiModel& model, const VolterraKernelPlan& plan, SeedSpec seeds,
                            std::size_t path, std::span<double> log_price, std::span<double> variance,
                            std::span<double> volterra, std::span<double> increments);

/// Cov(What_s, What_t) = 2H int_0^{min(s,t)} (s-u)^{H-1/2} (t-u)^{H-1/2} du by tanh-sinh quadrature.
double volterra_covariance(double hurst, double s, double t);

/// Exact-law samples of (What_{t_0}, ..., What_{t_N}), n x (N+1), via Cholesky of
/// the quadrature covariance. Test-scale oracle.
Eigen::MatrixXd cholesky_volterra_oracle(double hurst, const TimeGrid& grid, std::size_t n, SeedSpec seeds);

/// Columnar CSV: path,time_index,time,state_0..state_{d-1}[,variance].
void write_paths_csv(std::ostream& out, const PathBatch& paths, const TimeGrid& grid);

}  // namespace rwnn
