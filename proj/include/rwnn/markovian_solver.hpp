#pragma once

#include "rwnn/core.hpp"
#include "rwnn/driver.hpp"
#include "rwnn/reservoir.hpp"
#include "rwnn/rls.hpp"
#include "rwnn/sde_models.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rwnn {

/// How per-step regression moments are formed.
enum class MomentRoute {
    automatic,  // interval route for scalar states, dense otherwise
    dense,      // explicit feature rows, chunked rank updates
    interval,   // sorted prefix sums; scalar states only
};

struct SolverConfig {
    std::size_t nodes = 100;
    double range = 1.0;
    double connectivity = 0.5;
    std::optional<double> ridge;  // unset: 1e-8 * trace(G) / p per step
    bool absorption = false;
    /// Pipelines fold per-step input standardization into sampled reservoirs.
    bool standardize = false;
    MomentRoute route = MomentRoute::automatic;
    std::size_t chunk = 2048;
};

struct StepDiagnostics {
    std::size_t step = 0;
    double lambda = 0.0;
    double gram_condition = 0.0;
    double residual_norm = 0.0;
    std::size_t negative_targets = 0;  // targets clamped by absorption at this step
};

/// A ridge failure annotated with the backward step it happened at.
class StepSolveError : public SingularSystemError {
public:
    StepSolveError(std::size_t step, const SingularSystemError& cause)
        : SingularSystemError("step " + std::to_string(step) + ": " + cause.what(), cause.gram_condition()), step_(step) {}
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Applies the state diffusion Sigma(t, x) to a noise-space vector v.
using Diffusion = std::function<void(double t, std::span<const double> x, std::span<const double> v, std::span<double> out)>;

/// Sigma = diag(sigma) in log-coordinates, matching increments stored with correlation.
Diffusion black_scholes_log_diffusion(const BlackScholesModel& model);

struct MarkovianSolve {
    TimeGrid grid;
    std::vector<Reservoir> reservoirs;  // one per step 0..N-1
    std::vector<Readout> readouts;
    std::vector<StepDiagnostics> diagnostics;
    Eigen::VectorXd price;  // value at t_0 and the (deterministic) initial state
};

/// Row j = payoff(states[j, N, :]).
Eigen::MatrixXd terminal_targets(const Payoff& payoff, const PathBatch& paths);

/// Regression rows for step i over samples [begin, end):
/// Y = next + f_tilde * delta,
/// X = (1 - a delta) Phi(x) + DPhi(x) Sigma (b delta + dW).
struct StepRegression {
    Eigen::MatrixXd features;  // rows x K
    Eigen::MatrixXd targets;   // rows x m
};
StepRegression build_features_markovian(const Reservoir& res, const AffineDriver& driver, const Diffusion& diffusion,
                                        const PathBatch& paths, const TimeGrid& grid, std::size_t step,
                                        const Eigen::Ref<const Eigen::MatrixXd>& next_values, std::size_t begin = 0,
                                        std::size_t end = std::numeric_limits<std::size_t>::max());

/// Theta Phi(x) at every path's state at `step`; n x m.
Eigen::MatrixXd evaluate_network(const Reservoir& res, const Readout& readout, const PathBatch& paths,
                                 std::size_t step, std::size_t chunk = 2048);

/// Backward regression over given paths and reservoirs (one per step).
MarkovianSolve solve_markovian(const PathBatch& paths, const TimeGrid& grid, const Diffusion& diffusion,
                               const AffineDriver& driver, const Payoff& payoff, std::vector<Reservoir> reservoirs,
                               const SolverConfig& config);

/// Samples one fresh reservoir per step from `seeds`.
std::vector<Reservoir> sample_step_reservoirs(const SolverConfig& config, std::size_t input_dim, std::size_t steps,
                                              SeedSpec seeds, std::uint32_t network = 0);

/// Replaces reservoir i by rescale_inputs(reservoir i, mean_i, std_i), with
/// the per-dimension sample mean and std of the states at step i. Degenerate
/// steps (std 0, e.g. the deterministic start) borrow the next step's scale.
void standardize_inputs(std::vector<Reservoir>& reservoirs, const PathBatch& paths);

/// Full pipeline: simulate Black-Scholes paths, sample reservoirs, solve.
/// Path and reservoir draws come from separate namespaces of `seeds`.
MarkovianSolve backward_solve_markovian(const BlackScholesModel& model, const AffineDriver& driver,
                                        const Payoff& payoff, const TimeGrid& grid, std::size_t n,
                                        const SolverConfig& config, SeedSpec seeds);

}  // namespace rwnn
