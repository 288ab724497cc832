#include "doctest.h"

#include "rwnn/benchmarks.hpp"
#include "rwnn/experiments.hpp"

#include <cmath>
#include <sstream>

using namespace rwnn;

TEST_CASE("log-log slope recovers synthetic power laws") {
    std::vector<std::pair<double, double>> inv, flat, half;
    for (double k : {10.0, 100.0, 1000.0}) {
        inv.emplace_back(k, 3.0 / k);
        flat.emplace_back(k, 0.2);
        half.emplace_back(k, 5.0 / std::sqrt(k));
    }
    CHECK(fit_loglog_slope(inv) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(fit_loglog_slope(flat)) <= 1e-12);
    CHECK(fit_loglog_slope(half) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK_THROWS_AS(fit_loglog_slope({{10.0, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_loglog_slope({{10.0, 1.0}, {100.0, 0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_loglog_slope({{10.0, 1.0}, {10.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("quantile interpolates linearly") {
    CHECK(quantile({3.0, 1.0, 2.0, 4.0, 5.0}, 0.5) == 3.0);
    CHECK(quantile({1.0, 2.0}, 0.25) == doctest::Approx(1.25));
    CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.0) == 1.0);
    CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 1.0) == 4.0);
    CHECK(quantile({0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0}, 0.1) == doctest::Approx(10.0));
}

TEST_CASE("scaling sigma rule") {
    const auto s = scaling_sigmas(10);
    CHECK(s[0] == doctest::Approx(0.05));
    CHECK(s[4] == doctest::Approx(0.25));
    CHECK(s[7] == doctest::Approx(0.40));
    CHECK(s[8] == doctest::Approx(0.05));
}

TEST_CASE("experiment names round trip") {
    for (auto id : {ExperimentId::bs_convergence, ExperimentId::bs_calls, ExperimentId::bs_basket, ExperimentId::rb_call,
                    ExperimentId::rb_convergence, ExperimentId::bs_scaling})
        CHECK(parse_experiment(experiment_name(id)) == id);
    CHECK_THROWS_AS(parse_experiment("heston"), std::invalid_argument);
}

namespace {

ExperimentConfig small(ExperimentId id) {
    ExperimentConfig c;
    c.experiment = id;
    c.steps = 5;
    c.paths = 2000;
    c.nodes = {20};
    c.reference_paths = 4000;
    c.reference_steps = 10;
    return c;
}

}  // namespace

TEST_CASE("table output: schema, relative error sign and mse") {
    const auto r = run_experiment(small(ExperimentId::bs_calls));
    const auto& d = r.document;
    CHECK(d.at("schema") == 1);
    CHECK(d.at("experiment") == "bs-calls");
    for (const char* key : {"settings", "seed", "prices", "references", "rel_errors", "mse", "wall_times"})
        CHECK(d.contains(key));
    const auto ref = d["references"]["price"].get<std::vector<double>>();
    const auto est = d["prices"]["pde_wo_abs"].get<std::vector<double>>();
    const auto rel = d["rel_errors"]["pde_wo_abs"].get<std::vector<double>>();
    REQUIRE(ref.size() == 5);
    double mse = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(ref[i] == doctest::Approx(bs_closed_form(1.0, 1.0, 0.01, 0.05 * static_cast<double>(i + 1), 1.0)));
        CHECK(rel[i] == doctest::Approx((ref[i] - est[i]) / ref[i]).epsilon(1e-12));
        mse += (ref[i] - est[i]) * (ref[i] - est[i]) / 5.0;
    }
    CHECK(d["mse"]["pde_wo_abs"].get<double>() == doctest::Approx(mse).epsilon(1e-12));
    CHECK(r.csv_rows.size() == 5);
    std::ostringstream csv;
    write_csv(csv, r);
    CHECK(csv.str().rfind("repeat,sigma,reference,pde_w_abs,pde_wo_abs,mc,mc_std_error\n", 0) == 0);
}

TEST_CASE("scaling row at d = 5 equals the call table without absorption") {
    ExperimentConfig c = small(ExperimentId::bs_scaling);
    c.dims = {5, 7};
    const auto scaling = scaling_table(c);
    const auto calls = run_experiment(small(ExperimentId::bs_calls));
    CHECK(scaling.document["mse"]["total"][0].get<double>() == calls.document["mse"]["pde_wo_abs"].get<double>());
    CHECK(scaling.csv_rows.size() == 2);
}

TEST_CASE("results do not depend on the thread count") {
    for (auto id : {ExperimentId::bs_basket, ExperimentId::rb_call}) {
        set_thread_count(1);
        const auto one = strip_wall_times(run_experiment(small(id)).document);
        set_thread_count(3);
        const auto three = strip_wall_times(run_experiment(small(id)).document);
        set_thread_count(0);
        CHECK(one == three);
        CHECK_FALSE(one.dump().find("wall_time") != std::string::npos);
    }
}

TEST_CASE("sweep output records per-node statistics") {
    ExperimentConfig c = small(ExperimentId::bs_convergence);
    c.nodes = {5, 20};
    c.repeats = 3;
    const auto r = run_experiment(c);
    const auto& d = r.document;
    CHECK(d["mse"]["records"].size() == 2);
    const auto& rec = d["mse"]["records"][1];
    CHECK(rec["mse"].size() == 3);
    CHECK(rec["q10"].get<double>() <= rec["mean_mse"].get<double>() * 3.0);
    CHECK(d["slope"].is_number());
    CHECK(d["settings"]["absorption"] == true);
    CHECK(d["settings"]["connectivity"] == 1.0);
}

TEST_CASE("invalid configurations are rejected") {
    ExperimentConfig c = small(ExperimentId::bs_calls);
    c.paths = 1;
    CHECK_THROWS_AS(run_experiment(c), std::invalid_argument);
    c = small(ExperimentId::bs_calls);
    c.nodes = {10, 20};
    CHECK_THROWS_AS(run_experiment(c), std::invalid_argument);
    c = small(ExperimentId::bs_calls);
    c.connectivity = 0.0;
    CHECK_THROWS_AS(run_experiment(c), std::invalid_argument);
}
