#include "evolt/metrics.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "evolt/errors.hpp"

namespace evolt::metrics {

EvalCore evaluate(std::span<const double> pred_v, std::span<const double> actual_v) {
    if (pred_v.empty()) throw InvalidInput("evaluate: empty input");
    if (pred_v.size() != actual_v.size()) throw InvalidInput("evaluate: length mismatch");
    const double n = static_cast<double>(pred_v.size());

    double mean_actual = 0.0;
    for (double v : actual_v) mean_actual += v;
    mean_actual /= n;

    double abs_sum = 0.0, sq_sum = 0.0, max_abs = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < pred_v.size(); ++i) {
        const double e = pred_v[i] - actual_v[i];
        abs_sum += std::fabs(e);
        sq_sum += e * e;
        max_abs = std::max(max_abs, std::fabs(e));
        const double d = actual_v[i] - mean_actual;
        sst += d * d;
    }
    if (!(sst > 0.0))
        throw InvalidInput("evaluate: actual values have zero variance, R^2 undefined");

    EvalCore out;
    out.mae_mv = 1000.0 * abs_sum / n;
    out.rmse_mv = 1000.0 * std::sqrt(sq_sum / n);
    out.max_error_mv = 1000.0 * max_abs;
    out.r2_pct = 100.0 * (1.0 - sq_sum / sst);
    return out;
}

std::string EvalReport::csv_header() {
    return "model,hidden_layers,neurons,max_error_mv,mae_mv,rmse_mv,r2_pct,param_count,"
           "mean_inference_us";
}

std::string EvalReport::csv_row() const {
    char buf[320];
    if (std::isnan(mean_inference_us)) {
        std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.6f,%.6f,%.6f,%.6f,%zu,", model_tag.c_str(),
                      hidden_layers, neurons, max_error_mv, mae_mv, rmse_mv, r2_pct, param_count);
    } else {
        std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.6f,%.6f,%.6f,%.6f,%zu,%.3f",
                      model_tag.c_str(), hidden_layers, neurons, max_error_mv, mae_mv, rmse_mv,
                      r2_pct, param_count, mean_inference_us);
    }
    return buf;
}

TimingResult time_inference(const nn::MlpModel& model, const double* rows, std::size_t n,
                            std::size_t repetitions) {
    if (repetitions == 0) throw InvalidInput("time_inference: repetitions must be >= 1");
    if (n == 0) throw InvalidInput("time_inference: no rows");

    const std::size_t dim = model.spec.input_dim;
    nn::Workspace ws;
    double sink = 0.0;

    // warmup
    for (std::size_t r = 0; r < n; ++r)
        sink += nn::forward(model, std::span<const double>(rows + r * dim, dim), ws);

    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t r = 0; r < n; ++r)
            sink += nn::forward(model, std::span<const double>(rows + r * dim, dim), ws);
        const auto t1 = std::chrono::steady_clock::now();
        const double us =
            std::chrono::duration<double, std::micro>(t1 - t0).count() / static_cast<double>(n);
        sum += us;
        sum_sq += us * us;
    }
    asm volatile("" : : "g"(sink) : "memory");

    TimingResult out;
    out.repetitions = repetitions;
    out.rows = n;
    out.mean_us = sum / static_cast<double>(repetitions);
    const double var = sum_sq / static_cast<double>(repetitions) - out.mean_us * out.mean_us;
    out.stddev_us = var > 0.0 ? std::sqrt(var) : 0.0;
    return out;
}

}  // namespace evolt::metrics
