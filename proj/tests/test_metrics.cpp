#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "evolt/errors.hpp"
#include "evolt/metrics.hpp"
#include "evolt/rng.hpp"

using namespace evolt;

TEST_SUITE("metrics") {

TEST_CASE("identity prediction") {
    const std::vector<double> actual = {3.7, 3.8, 3.9, 4.0};
    const auto r = metrics::evaluate(actual, actual);
    CHECK(r.max_error_mv == 0.0);
    CHECK(r.mae_mv == 0.0);
    CHECK(r.rmse_mv == 0.0);
    CHECK(r.r2_pct == 100.0);
}

TEST_CASE("constant 10 mV offset") {
    const std::vector<double> actual = {3.7, 3.8, 3.9, 4.0};
    std::vector<double> pred = actual;
    for (auto& v : pred) v += 0.010;
    const auto r = metrics::evaluate(pred, actual);
    CHECK(r.mae_mv == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(r.rmse_mv == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(r.max_error_mv == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(r.r2_pct < 100.0);
}

TEST_CASE("permutation invariance") {
    std::mt19937_64 gen(23);
    std::vector<double> actual(64), pred(64);
    for (std::size_t i = 0; i < actual.size(); ++i) {
        actual[i] = rng::uniform(gen, 3.0, 4.2);
        pred[i] = actual[i] + rng::uniform(gen, -0.05, 0.05);
    }
    const auto r0 = metrics::evaluate(pred, actual);

    std::vector<std::size_t> idx(actual.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng::shuffle(idx, gen);
    std::vector<double> actual_p(64), pred_p(64);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        actual_p[i] = actual[idx[i]];
        pred_p[i] = pred[idx[i]];
    }
    const auto r1 = metrics::evaluate(pred_p, actual_p);
    CHECK(r1.mae_mv == doctest::Approx(r0.mae_mv).epsilon(1e-12));
    CHECK(r1.rmse_mv == doctest::Approx(r0.rmse_mv).epsilon(1e-12));
    CHECK(r1.max_error_mv == r0.max_error_mv);
    CHECK(r1.r2_pct == doctest::Approx(r0.r2_pct).epsilon(1e-12));
}

TEST_CASE("rmse >= mae and max >= rmse on random vectors") {
    std::mt19937_64 gen(29);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng::uniform(gen, 0.0, 60.0));
        std::vector<double> actual(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            actual[i] = rng::uniform(gen, 3.0, 4.2);
            pred[i] = actual[i] + rng::uniform(gen, -0.2, 0.2);
        }
        double lo = actual[0], hi = actual[0];
        for (double v : actual) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo <= 0.0) continue;
        const auto r = metrics::evaluate(pred, actual);
        CHECK(r.rmse_mv >= r.mae_mv - 1e-12);
        CHECK(r.max_error_mv >= r.rmse_mv - 1e-12);
    }
}

TEST_CASE("r2 is 100 only for exact predictions") {
    const std::vector<double> actual = {3.7, 3.8, 3.9};
    std::vector<double> pred = actual;
    CHECK(metrics::evaluate(pred, actual).r2_pct == 100.0);
    pred[1] += 1e-3;
    CHECK(metrics::evaluate(pred, actual).r2_pct < 100.0);
}

TEST_CASE("error paths") {
    CHECK_THROWS_AS(metrics::evaluate(std::vector<double>{}, std::vector<double>{}),
                    InvalidInput);
    CHECK_THROWS_AS(
        metrics::evaluate(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
        InvalidInput);
    // zero-variance actual
    CHECK_THROWS_AS(metrics::evaluate(std::vector<double>{3.7, 3.8},
                                      std::vector<double>{3.9, 3.9}),
                    InvalidInput);
}

TEST_CASE("csv row shape") {
    metrics::EvalReport rep;
    rep.model_tag = "PINN-L2-N64";
    rep.hidden_layers = 2;
    rep.neurons = 64;
    rep.max_error_mv = 110.0;
    rep.mae_mv = 9.652;
    rep.rmse_mv = 20.1;
    rep.r2_pct = 99.2;
    rep.param_count = 4865;
    const auto row = rep.csv_row();
    CHECK(row.substr(0, 17) == "PINN-L2-N64,2,64,");
    CHECK(row.back() == ',');  // timing not measured -> empty last field
    CHECK(std::count(row.begin(), row.end(), ',') == 8);

    rep.mean_inference_us = 1.234;
    const auto timed = rep.csv_row();
    CHECK(timed.substr(timed.size() - 5) == "1.234");
}

TEST_CASE("time_inference basics and ordering") {
    const auto small = nn::init_model(nn::MlpSpec{9, 1, 32, 1}, 1);
    const auto big = nn::init_model(nn::MlpSpec{5, 4, 128, 1}, 1);

    std::mt19937_64 gen(31);
    const std::size_t n = 64;
    std::vector<double> rows9(n * 9), rows5(n * 5);
    for (auto& v : rows9) v = rng::gaussian(gen);
    for (auto& v : rows5) v = rng::gaussian(gen);

    CHECK_THROWS_AS(metrics::time_inference(small, rows9.data(), n, 0), InvalidInput);

    const auto t_small = metrics::time_inference(small, rows9.data(), n, 300);
    const auto t_big = metrics::time_inference(big, rows5.data(), n, 300);
    CHECK(t_small.repetitions == 300);
    CHECK(t_small.mean_us > 0.0);
    // 353 vs 50433 parameters: ordering must hold with a wide margin
    CHECK(t_small.mean_us < t_big.mean_us);
}

TEST_CASE("time_inference scales roughly linearly in rows") {
    const auto model = nn::init_model(nn::MlpSpec{9, 2, 64, 1}, 1);
    std::mt19937_64 gen(37);
    const std::size_t n = 128;
    std::vector<double> rows(2 * n * 9);
    for (auto& v : rows) v = rng::gaussian(gen);

    auto total_us = [&](std::size_t count) {
        double best = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 3; ++rep) {
            const auto t = metrics::time_inference(model, rows.data(), count, 50);
            best = std::min(best, t.mean_us * static_cast<double>(count));
        }
        return best;
    };

    const double t1 = total_us(n);
    const double t2 = total_us(2 * n);
    CHECK(t2 / t1 > 1.0);
    CHECK(t2 / t1 < 4.0);
}

}  // TEST_SUITE
