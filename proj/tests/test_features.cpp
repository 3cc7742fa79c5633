#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "evolt/errors.hpp"
#include "evolt/features.hpp"
#include "evolt/rng.hpp"

using namespace evolt;

namespace {

features::Sample sample(double dt = 1.0, double i = 10.0, double soc = 0.8, double temp = 25.0,
                        int cycle = 50) {
    features::Sample s;
    s.t_s = 100.0;
    s.dt_s = dt;
    s.current_a = i;
    s.voltage_v = 3.7;
    s.temp_c = temp;
    s.soc = soc;
    s.cycle = cycle;
    return s;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("fnn row is the frozen projection [dt, i, soc, temp, cycle]") {
    const auto row = features::build_fnn_row(sample());
    CHECK(row.mode == features::Mode::fnn);
    CHECK(row.values == std::vector<double>{1.0, 10.0, 0.8, 25.0, 50.0});

    const auto rest = features::build_fnn_row(sample(1.0, 0.0));
    CHECK(rest.values[1] == 0.0);

    // distinct values pin each position
    const auto probe = features::build_fnn_row(sample(11.0, 22.0, 0.33, 44.0, 55));
    CHECK(probe.values == std::vector<double>{11.0, 22.0, 0.33, 44.0, 55.0});
}

TEST_CASE("pinn row extends the fnn row with [ocv, v_rc1, v_rc2, v_phy]") {
    const auto s = sample();

    SUBCASE("rest step from zero state") {
        ecm::EcmState state{{0.0, 0.0}, 0.8};
        const auto row = features::build_pinn_row(s, 3.95, state, 3.95);
        REQUIRE(row.values.size() == features::kPinnDim);
        CHECK(row.values[5] == 3.95);
        CHECK(row.values[6] == 0.0);
        CHECK(row.values[7] == 0.0);
        CHECK(row.values[8] == 3.95);
    }

    SUBCASE("prefix equals the fnn row") {
        ecm::EcmState state{{0.01, 0.02}, 0.8};
        const auto pinn = features::build_pinn_row(s, 3.9, state, 3.6);
        const auto fnn = features::build_fnn_row(s);
        for (std::size_t i = 0; i < features::kFnnDim; ++i)
            CHECK(pinn.values[i] == fnn.values[i]);
    }

    SUBCASE("hand-composed step from the ecm module examples") {
        ecm::EcmState state{{0.0095162581964040427, 0.005}, 0.8};
        const auto row = features::build_pinn_row(s, 4.0, state, 3.7854837418035960);
        CHECK(row.values[0] == 1.0);
        CHECK(row.values[1] == 10.0);
        CHECK(row.values[2] == 0.8);
        CHECK(row.values[3] == 25.0);
        CHECK(row.values[4] == 50.0);
        CHECK(row.values[5] == 4.0);
        CHECK(row.values[6] == doctest::Approx(0.00951626).epsilon(1e-6));
        CHECK(row.values[7] == 0.005);
        CHECK(row.values[8] == doctest::Approx(3.78548374).epsilon(1e-8));
    }
}

TEST_CASE("sample validation") {
    auto bad = sample();
    bad.dt_s = 0.0;
    CHECK_THROWS_AS(features::build_fnn_row(bad), InvalidInput);
    bad = sample();
    bad.cycle = 0;
    CHECK_THROWS_AS(features::build_fnn_row(bad), InvalidInput);
    bad = sample();
    bad.voltage_v = std::nan("");
    CHECK_THROWS_AS(features::build_fnn_row(bad), InvalidInput);
}

TEST_CASE("fit_normalizer: two-row hand example") {
    // feature column {0, 2}: mean 1, population std 1
    std::vector<features::FeatureRow> rows = {
        {features::Mode::fnn, {0.0, 1.0, 0.0, 20.0, 1.0}},
        {features::Mode::fnn, {2.0, 3.0, 1.0, 30.0, 2.0}},
    };
    std::vector<double> targets = {3.5, 3.9};
    const auto norm = features::fit_normalizer(rows, targets);
    CHECK(norm.offset[0] == doctest::Approx(1.0));
    CHECK(norm.scale[0] == doctest::Approx(1.0));
    CHECK(norm.target_offset == doctest::Approx(3.7));
    CHECK(norm.target_scale == doctest::Approx(0.2));
}

TEST_CASE("normalizer fitted on its own data gives mean 0, std 1") {
    std::mt19937_64 gen(3);
    std::vector<features::FeatureRow> rows;
    std::vector<double> targets;
    for (int i = 0; i < 200; ++i) {
        rows.push_back({features::Mode::fnn,
                        {rng::uniform(gen, 0.5, 2.0), rng::uniform(gen, -5.0, 15.0),
                         rng::uniform(gen, 0.0, 1.0), rng::uniform(gen, 20.0, 35.0),
                         std::floor(rng::uniform(gen, 1.0, 1000.0))}});
        targets.push_back(rng::uniform(gen, 3.0, 4.2));
    }
    const auto norm = features::fit_normalizer(rows, targets);

    for (std::size_t c = 0; c < features::kFnnDim; ++c) {
        double mean = 0.0, sq = 0.0;
        for (const auto& r : rows) {
            const auto z = norm.normalize_row(r);
            mean += z[c];
        }
        mean /= static_cast<double>(rows.size());
        for (const auto& r : rows) {
            const auto z = norm.normalize_row(r);
            sq += (z[c] - mean) * (z[c] - mean);
        }
        const double stdev = std::sqrt(sq / static_cast<double>(rows.size()));
        CHECK(std::fabs(mean) < 1e-12);
        CHECK(std::fabs(stdev - 1.0) < 1e-12);
    }
}

TEST_CASE("normalizer is a function of the training rows alone") {
    std::vector<features::FeatureRow> rows = {
        {features::Mode::fnn, {0.0, 1.0, 0.0, 20.0, 1.0}},
        {features::Mode::fnn, {2.0, 3.0, 1.0, 30.0, 2.0}},
    };
    std::vector<double> targets = {3.5, 3.9};
    const auto a = features::fit_normalizer(rows, targets);
    const auto b = features::fit_normalizer(rows, targets);
    CHECK(a.offset == b.offset);
    CHECK(a.scale == b.scale);
    CHECK(a.target_offset == b.target_offset);
    CHECK(a.target_scale == b.target_scale);
}

TEST_CASE("constant feature column is rejected by name") {
    std::vector<features::FeatureRow> rows = {
        {features::Mode::fnn, {1.0, 1.0, 0.5, 20.0, 1.0}},
        {features::Mode::fnn, {1.0, 3.0, 0.7, 30.0, 2.0}},
    };
    std::vector<double> targets = {3.5, 3.9};
    try {
        features::fit_normalizer(rows, targets);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("dt_s") != std::string::npos);
    }

    CHECK_THROWS_AS(features::fit_normalizer(std::span<const features::FeatureRow>(rows.data(), 1),
                                             std::span<const double>(targets.data(), 1)),
                    InvalidInput);
}

TEST_CASE("constant target allowed only without target stats") {
    std::vector<features::FeatureRow> rows = {
        {features::Mode::fnn, {1.0, 1.0, 0.5, 20.0, 1.0}},
        {features::Mode::fnn, {2.0, 3.0, 0.7, 30.0, 2.0}},
    };
    std::vector<double> targets = {0.0, 0.0};
    CHECK_THROWS_AS(features::fit_normalizer(rows, targets), DataError);
    const auto norm = features::fit_normalizer(rows, targets, features::Scheme::zscore, false);
    CHECK_FALSE(norm.has_target_stats);
    CHECK(norm.target_scale == 1.0);
}

TEST_CASE("round trips") {
    std::mt19937_64 gen(9);
    std::vector<features::FeatureRow> rows;
    std::vector<double> targets;
    for (int i = 0; i < 64; ++i) {
        rows.push_back({features::Mode::fnn,
                        {rng::uniform(gen, 0.5, 2.0), rng::uniform(gen, -5.0, 15.0),
                         rng::uniform(gen, 0.0, 1.0), rng::uniform(gen, 20.0, 35.0),
                         std::floor(rng::uniform(gen, 1.0, 1000.0))}});
        targets.push_back(rng::uniform(gen, 3.0, 4.2));
    }

    for (auto scheme : {features::Scheme::zscore, features::Scheme::minmax}) {
        const auto norm = features::fit_normalizer(rows, targets, scheme);
        for (double v : targets) {
            const double rt = norm.denormalize_target(norm.normalize_target(v));
            CHECK(std::fabs(rt - v) <= 1e-12 * std::max(1.0, std::fabs(v)));
        }
        // normalizing the offset vector gives zero
        features::FeatureRow mean_row{features::Mode::fnn, norm.offset};
        for (double z : norm.normalize_row(mean_row)) CHECK(std::fabs(z) < 1e-12);
    }
}

TEST_CASE("minmax maps the column extremes to 0 and 1") {
    std::vector<features::FeatureRow> rows = {
        {features::Mode::fnn, {1.0, -4.0, 0.1, 20.0, 1.0}},
        {features::Mode::fnn, {2.0, 6.0, 0.9, 30.0, 9.0}},
        {features::Mode::fnn, {1.5, 1.0, 0.5, 25.0, 5.0}},
    };
    std::vector<double> targets = {3.5, 3.9, 3.7};
    const auto norm = features::fit_normalizer(rows, targets, features::Scheme::minmax);
    const auto lo = norm.normalize_row(rows[0]);
    const auto hi = norm.normalize_row(rows[1]);
    for (std::size_t c = 0; c < features::kFnnDim; ++c) {
        CHECK(lo[c] == doctest::Approx(0.0));
        CHECK(hi[c] == doctest::Approx(1.0));
    }
}

}  // TEST_SUITE
