#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>

#include "evolt/nn.hpp"

namespace evolt::metrics {

// Error metrics in millivolts, coefficient of determination in percent.
struct EvalCore {
    double max_error_mv = 0.0;
    double mae_mv = 0.0;
    double rmse_mv = 0.0;
    double r2_pct = 0.0;
};

// Throws InvalidInput on empty/mismatched inputs or a zero-variance actual.
EvalCore evaluate(std::span<const double> pred_v, std::span<const double> actual_v);

struct EvalReport {
    std::string model_tag;
    std::size_t hidden_layers = 0;
    std::size_t neurons = 0;
    double max_error_mv = 0.0;
    double mae_mv = 0.0;
    double rmse_mv = 0.0;
    double r2_pct = 0.0;
    std::size_t param_count = 0;
    // NaN when timing was not measured; the CSV field is then left empty so
    // results stay regenerable from (config, seed) alone.
    double mean_inference_us = std::numeric_limits<double>::quiet_NaN();

    static std::string csv_header();
    std::string csv_row() const;
};

struct TimingResult {
    double mean_us = 0.0;    // per sample
    double stddev_us = 0.0;  // across repetitions
    std::size_t repetitions = 0;
    std::size_t rows = 0;
};

// Wall-clock mean per-sample forward latency over `repetitions` full passes,
// after one warmup pass. rows is n x input_dim row-major. Single-threaded.
TimingResult time_inference(const nn::MlpModel& model, const double* rows, std::size_t n,
                            std::size_t repetitions);

}  // namespace evolt::metrics
