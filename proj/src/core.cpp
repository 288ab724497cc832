#include "rwnn/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace rwnn {

TimeGrid make_uniform_grid(double horizon, std::size_t steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("time grid: horizon must be positive");
    if (steps == 0) throw std::invalid_argument("time grid: need at least one step");
    TimeGrid grid;
    grid.times.resize(steps + 1);
    grid.deltas.assign(steps, horizon / static_cast<double>(steps));
    for (std::size_t i = 0; i <= steps; ++i) grid.times[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
    grid.times.back() = horizon;
    return grid;
}

TimeGrid make_grid(std::vector<double> times) {
    if (times.size() < 2) throw std::invalid_argument("time grid: need at least one step");
    if (times.front() != 0.0) throw std::invalid_argument("time grid: must start at 0");
    TimeGrid grid;
    grid.deltas.resize(times.size() - 1);
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        grid.deltas[i] = times[i + 1] - times[i];
        if (!(grid.deltas[i] > 0.0)) throw std::invalid_argument("time grid: times must be strictly increasing");
    }
    grid.times = std::move(times);
    return grid;
}

Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& m, double jitter_start, double jitter_max) {
    const auto p = m.rows();
    if (m.cols() != p) throw std::invalid_argument("cholesky: matrix must be square");

    // Leading minor that broke the unjittered factorization, for the error message.
    auto first_bad_minor = [&](const Eigen::MatrixXd& a) -> std::size_t {
        Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index j = 0; j < p; ++j) {
            double d = a(j, j) - l.row(j).head(j).squaredNorm();
            if (!(d > 0.0)) return static_cast<std::size_t>(j + 1);
            l(j, j) = std::sqrt(d);
            for (Eigen::Index i = j + 1; i < p; ++i)
                l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
        }
        return 0;
    };

    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success && first_bad_minor(m) == 0) return llt.matrixL();

    for (double jitter = jitter_start; jitter <= jitter_max * (1.0 + 1e-9); jitter *= 10.0) {
        Eigen::MatrixXd shifted = m;
        shifted.diagonal().array() += jitter;
        if (first_bad_minor(shifted) == 0) {
            Eigen::LLT<Eigen::MatrixXd> jittered(shifted);
            if (jittered.info() == Eigen::Success) return jittered.matrixL();
        }
    }
    const std::size_t minor = first_bad_minor(m);
    std::ostringstream msg;
    msg << "cholesky: matrix is not positive semidefinite (leading minor " << minor << " of " << p << " fails)";
    throw DecompositionError(msg.str(), minor);
}

Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& corr) {
    if (corr.rows() == 0 || corr.rows() != corr.cols()) throw std::invalid_argument("correlation: matrix must be square");
    for (Eigen::Index i = 0; i < corr.rows(); ++i) {
        if (std::abs(corr(i, i) - 1.0) > 1e-12) throw std::invalid_argument("correlation: diagonal must be 1");
        for (Eigen::Index j = 0; j < i; ++j)
            if (std::abs(corr(i, j) - corr(j, i)) > 1e-12) throw std::invalid_argument("correlation: matrix must be symmetric");
    }
    return cholesky_with_jitter(corr);
}

PathBatch::PathBatch(std::size_t n, std::size_t n_steps, std::size_t state_dim, std::size_t noise, bool with_variance)
    : paths(n), steps(n_steps), dim(state_dim), noise_dim(noise) {
    states.assign(n * (n_steps + 1) * state_dim, 0.0);
    increments.assign(n * n_steps * noise, 0.0);
    if (with_variance) {
        variance.assign(n * (n_steps + 1), 0.0);
        volterra.assign(n * (n_steps + 1), 0.0);
    }
}

void draw_correlated_increment(SeedSpec seeds, const Eigen::MatrixXd& factor, double delta, std::size_t path,
                               std::size_t step, std::span<double> out) {
    const auto dw = static_cast<std::size_t>(factor.rows());
    RandomStream stream(seeds, Purpose::increments, path, static_cast<std::uint32_t>(step));
    double z[64];
    std::vector<double> heap;
    double* zp = z;
    if (dw > 64) {
        heap.resize(dw);
        zp = heap.data();
    }
    for (std::size_t k = 0; k < dw; ++k) zp[k] = stream.normal();
    const double scale = std::sqrt(delta);
    for (std::size_t r = 0; r < dw; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c <= r; ++c) acc += factor(r, c) * zp[c];
        out[r] = scale * acc;
    }
}

std::vector<double> sample_correlated_increments(const TimeGrid& grid, std::size_t n, const Eigen::MatrixXd& corr,
                                                 SeedSpec seeds) {
    const Eigen::MatrixXd factor = correlation_factor(corr);
    const std::size_t dw = static_cast<std::size_t>(corr.rows());
    const std::size_t steps = grid.steps();
    std::vector<double> out(n * steps * dw);
    parallel_chunks(n, 4096, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j)
            for (std::size_t i = 0; i < steps; ++i)
                draw_correlated_increment(seeds, factor, grid.deltas[i], j, i,
                                          std::span<double>(out.data() + (j * steps + i) * dw, dw));
    });
    return out;
}

namespace {
std::atomic<unsigned> g_threads{0};
}

void set_thread_count(unsigned threads) { g_threads.store(threads); }

unsigned thread_count() {
    unsigned t = g_threads.load();
    if (t == 0) t = std::max(1u, std::thread::hardware_concurrency());
    return t;
}

void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    chunk = std::max<std::size_t>(chunk, 1);
    const std::size_t chunks = chunk_count(n, chunk);
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), chunks));
    auto run = [&](std::size_t c) { body(c, c * chunk, std::min(n, (c + 1) * chunk)); };
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t c = next++; c < chunks; c = next++) {
                try {
                    run(c);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace rwnn
