#pragma once

#include "rwnn/markovian_solver.hpp"

namespace rwnn {

/// Readouts of one backward step: Theta for the value network, Xi for the
/// psi network.
struct StepReadouts {
    Readout theta;  // 1 x K
    Readout xi;     // 1 x K
};

struct NonMarkovianSolve {
    TimeGrid grid;
    double rho1 = 0.0;
    std::vector<Reservoir> value_reservoirs;  // Phi^Theta per step
    std::vector<Reservoir> psi_reservoirs;    // Phi^Xi per step
    std::vector<StepReadouts> readouts;
    std::vector<StepDiagnostics> diagnostics;
    double price = 0.0;
};

/// Regression rows for step i over samples [begin, end):
///   X1 = Phi^Xi(x) (dW1 - b delta)
///   X2 = (1 - a delta) Phi^Theta(x) + DPhi^Theta(x) sqrt(V) (dB - (b rho1 + c rho2) delta)
///   Y  = next + f_tilde delta,   dB = rho1 dW1 + rho2 dW2.
struct JointRegression {
    Eigen::MatrixXd psi_features;    // rows x K  (X1)
    Eigen::MatrixXd value_features;  // rows x K  (X2)
    Eigen::VectorXd targets;
};
JointRegression build_features_nonmarkovian(const Reservoir& value_res, const Reservoir& psi_res,
                                            const AffineDriver& driver, double rho1, const PathBatch& paths,
                                            const TimeGrid& grid, std::size_t step,
                                            const Eigen::Ref<const Eigen::VectorXd>& next_values, std::size_t begin = 0,
                                            std::size_t end = std::numeric_limits<std::size_t>::max());

/// Solves beta = [Xi, Theta] jointly per step over stacked features [X1, X2].
NonMarkovianSolve solve_nonmarkovian(const PathBatch& paths, const TimeGrid& grid, double rho1,
                                     const AffineDriver& driver, const Payoff& payoff,
                                     std::vector<Reservoir> value_reservoirs, std::vector<Reservoir> psi_reservoirs,
                                     const SolverConfig& config);

/// Simulate rough Bergomi paths on `grid`, sample two reservoirs per step, solve.
NonMarkovianSolve backward_solve_nonmarkovian(const RoughBergomiModel& model, const AffineDriver& driver,
                                              const Payoff& payoff, const TimeGrid& grid, std::size_t n,
                                              const SolverConfig& config, SeedSpec seeds);

struct ZFields {
    double z1 = 0.0;
    double z2 = 0.0;
};

/// z1 = Xi Phi^Xi(x) + rho1 sqrt(v) Theta DPhi^Theta(x), z2 = rho2 sqrt(v) Theta DPhi^Theta(x).
ZFields z_fields(const NonMarkovianSolve& solve, std::size_t step, double x, double v);

}  // namespace rwnn
