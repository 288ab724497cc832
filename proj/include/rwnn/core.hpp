#pragma once

#include "rwnn/random.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rwnn {

/// Partition 0 = t_0 < ... < t_N = T with step widths delta_i = t_{i+1} - t_i.
struct TimeGrid {
    std::vector<double> times;
    std::vector<double> deltas;

    [[nodiscard]] std::size_t steps() const noexcept { return deltas.size(); }
    [[nodiscard]] double horizon() const noexcept { return times.back(); }
};

TimeGrid make_uniform_grid(double horizon, std::size_t steps);
/// Validates and builds a grid from explicit times (must start at 0).
TimeGrid make_grid(std::vector<double> times);

/// Raised when a correlation or covariance matrix cannot be factorized.
class DecompositionError : public std::runtime_error {
public:
    DecompositionError(const std::string& what, std::size_t leading_minor)
        : std::runtime_error(what), leading_minor_(leading_minor) {}
    /// 1-based order of the first leading minor that failed.
    [[nodiscard]] std::size_t leading_minor() const noexcept { return leading_minor_; }

private:
    std::size_t leading_minor_;
};

/// Lower Cholesky factor of a symmetric PSD matrix. Diagonal jitter starts at
/// `jitter_start` and grows x10 up to `jitter_max` before giving up.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& m, double jitter_start = 1e-12,
                                     double jitter_max = 1e-8);

/// Checks symmetry and unit diagonal, then factorizes.
Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& corr);

/// Simulated paths and the Brownian increments that produced them.
///
/// Layout is path-major: states[(j*(N+1) + i)*dim + k], increments[(j*N + i)*noise_dim + k].
/// `variance` and `volterra` are filled by stochastic-volatility models only.
struct PathBatch {
    std::size_t paths = 0;
    std::size_t steps = 0;
    std::size_t dim = 0;
    std::size_t noise_dim = 0;
    std::vector<double> states;
    std::vector<double> increments;
    std::vector<double> variance;
    std::vector<double> volterra;

    PathBatch() = default;
    PathBatch(std::size_t n, std::size_t n_steps, std::size_t state_dim, std::size_t noise, bool with_variance);

    [[nodiscard]] bool has_variance() const noexcept { return !variance.empty(); }

    [[nodiscard]] std::span<const double> state(std::size_t path, std::size_t time) const {
        return {states.data() + (path * (steps + 1) + time) * dim, dim};
    }
    [[nodiscard]] std::span<double> state(std::size_t path, std::size_t time) {
        return {states.data() + (path * (steps + 1) + time) * dim, dim};
    }
    [[nodiscard]] std::span<const double> increment(std::size_t path, std::size_t step) const {
        return {increments.data() + (path * steps + step) * noise_dim, noise_dim};
    }
    [[nodiscard]] std::span<double> increment(std::size_t path, std::size_t step) {
        return {increments.data() + (path * steps + step) * noise_dim, noise_dim};
    }
    [[nodiscard]] double var(std::size_t path, std::size_t time) const {
        return variance[path * (steps + 1) + time];
    }
};

/// Increments ~ N(0, delta_i * corr), one stream per (path, step).
/// Returned layout matches PathBatch::increments.
std::vector<double> sample_correlated_increments(const TimeGrid& grid, std::size_t n,
                                                 const Eigen::MatrixXd& corr, SeedSpec seeds);

/// Same draws as sample_correlated_increments for a single (path, step),
/// given the lower factor of corr.
void draw_correlated_increment(SeedSpec seeds, const Eigen::MatrixXd& factor, double delta, std::size_t path,
                               std::size_t step, std::span<double> out);

/// Worker threads for chunked loops. 0 selects hardware concurrency.
void set_thread_count(unsigned threads);
unsigned thread_count();

/// Runs body(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
/// Chunk boundaries do not depend on the thread count, so per-chunk partial
/// results combined in chunk order are reproducible.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

inline std::size_t chunk_count(std::size_t n, std::size_t chunk) { return (n + chunk - 1) / chunk; }

}  // namespace rwnn
