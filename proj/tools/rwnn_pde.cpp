#include "rwnn/core.hpp"
#include "rwnn/experiments.hpp"
#include "rwnn/markovian_solver.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

namespace {

int fail(const std::string& kind, const std::string& message, nlohmann::json extra = nlohmann::json::object()) {
    nlohmann::json err{{"schema", 1}, {"error", {{"kind", kind}, {"message", message}}}};
    for (auto& [k, v] : extra.items()) err["error"][k] = v;
    std::cout << err.dump() << '\n';
    return 1;
}

std::vector<std::size_t> parse_nodes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        const long long v = std::stoll(item, &pos);
        if (pos != item.size() || v <= 0) throw std::invalid_argument("bad node count: " + item);
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw std::invalid_argument("empty node list");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random-weight neural network backward solver for option pricing PDEs"};
    app.set_version_flag("--version", "rwnn-pde 1.0");

    std::string experiment;
    std::string nodes;
    std::string absorption;
    std::string format = "json";
    std::string out_path;
    unsigned threads = 0;
    rwnn::ExperimentConfig config;
    std::size_t repeats = 0;
    std::size_t reference_paths = 0;
    double ridge = -1.0;
    double connectivity = -1.0;
    std::string dump_weights, dump_paths;
    std::vector<std::size_t> dims;

    app.add_option("experiment", experiment, "bs-calls | bs-basket | rb-call | bs-convergence | rb-convergence | bs-scaling")
        ->required();
    app.add_option("--nodes", nodes, "Hidden nodes K, or a comma list for sweeps");
    app.add_option("--paths", config.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
    app.add_option("--steps", config.steps, "Time steps N")->check(CLI::PositiveNumber);
    app.add_option("--seed", config.seed, "Master seed");
    app.add_option("--ridge", ridge, "Ridge lambda (default: 1e-8 trace(G)/p)")->check(CLI::NonNegativeNumber);
    app.add_option("--connectivity", connectivity, "Fraction of nonzero reservoir weights")->check(CLI::Range(0.0, 1.0));
    app.add_option("--range", config.range, "Reservoir weights ~ U(-R, R)")->check(CLI::PositiveNumber);
    app.add_flag("--standardize", config.standardize, "Standardize reservoir inputs per step");
    app.add_option("--absorption", absorption, "on|off (sweeps and scaling)")->check(CLI::IsMember({"on", "off"}));
    app.add_option("--repeats", repeats, "Independent repeats")->check(CLI::PositiveNumber);
    app.add_option("--reference-paths", reference_paths, "Reference Monte Carlo paths")->check(CLI::PositiveNumber);
    app.add_option("--reference-steps", config.reference_steps, "Reference time steps")->check(CLI::PositiveNumber);
    app.add_option("--dims", dims, "Dimensions for bs-scaling")->delimiter(',');
    app.add_option("--out", out_path, "Output file (default stdout)");
    app.add_option("--format", format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--dump-weights", dump_weights, "Write reservoirs and readouts of the first run as JSON");
    app.add_option("--dump-paths", dump_paths, "Write the first run's paths as CSV");
    app.add_option("--threads", threads, "Worker threads (default: hardware concurrency)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what());
    }

    try {
        config.experiment = rwnn::parse_experiment(experiment);
        if (!nodes.empty()) config.nodes = parse_nodes(nodes);
        if (ridge >= 0.0) config.ridge = ridge;
        if (connectivity >= 0.0) config.connectivity = connectivity;
        if (!absorption.empty()) config.absorption = absorption == "on";
        if (repeats > 0) config.repeats = repeats;
        if (reference_paths > 0) config.reference_paths = reference_paths;
        if (!dims.empty()) config.dims = dims;
        if (!dump_weights.empty()) config.dump_weights = dump_weights;
        if (!dump_paths.empty()) config.dump_paths = dump_paths;
        rwnn::set_thread_count(threads > 0 ? threads : std::max(1u, std::thread::hardware_concurrency()));

        const rwnn::ExperimentResult result = rwnn::run_experiment(config);
        auto emit = [&](std::ostream& o) {
            if (format == "csv")
                rwnn::write_csv(o, result);
            else
                rwnn::write_json(o, result);
        };
        if (out_path.empty()) {
            emit(std::cout);
        } else {
            std::ofstream file(out_path);
            if (!file) return fail("io", "cannot open " + out_path);
            emit(file);
            if (!file) return fail("io", "failed writing " + out_path);
        }
    } catch (const rwnn::StepSolveError& e) {
        return fail("solver", e.what(), {{"step", e.step()}, {"gram_condition", e.gram_condition()}});
    } catch (const rwnn::SingularSystemError& e) {
        return fail("solver", e.what(), {{"gram_condition", e.gram_condition()}});
    } catch (const std::invalid_argument& e) {
        return fail("invalid-argument", e.what());
    } catch (const std::exception& e) {
        return fail("runtime", e.what());
    }
    return 0;
}
