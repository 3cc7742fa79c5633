#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "evolt/ecm.hpp"

namespace evolt::features {

// One time-step record of measured cell quantities.
struct Sample {
    double t_s = 0.0;       // absolute time
    double dt_s = 0.0;      // step time, > 0
    double current_a = 0.0; // discharge positive
    double voltage_v = 0.0; // measured terminal voltage
    double temp_c = 0.0;
    double soc = 0.0;       // fraction
    int cycle = 1;          // >= 1

    void validate() const;  // throws InvalidInput
};

enum class Mode { fnn, pinn };

constexpr std::size_t kFnnDim = 5;
constexpr std::size_t kPinnDim = 9;

constexpr std::size_t input_dim(Mode m) { return m == Mode::fnn ? kFnnDim : kPinnDim; }

const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);  // "FNN" | "PINN", throws ConfigError

// Feature order is a frozen contract:
//   FNN : [dt, current, soc, temp, cycle]
//   PINN: [dt, current, soc, temp, cycle, ocv, v_rc1, v_rc2, v_phy]
const char* feature_name(Mode m, std::size_t idx);

struct FeatureRow {
    Mode mode = Mode::fnn;
    std::vector<double> values;
};

FeatureRow build_fnn_row(const Sample& s);

// ECM quantities must come from the same timestep as s.
FeatureRow build_pinn_row(const Sample& s, double ocv_v, const ecm::EcmState& state,
                          double v_phy);

enum class Scheme { zscore, minmax };

// Per-feature affine normalization fitted on training data only.
// zscore: offset = mean, scale = population std. minmax: offset = min,
// scale = max - min. Normalized value is (x - offset) / scale.
struct Normalizer {
    Scheme scheme = Scheme::zscore;
    std::vector<double> offset;
    std::vector<double> scale;
    double target_offset = 0.0;
    double target_scale = 1.0;
    bool has_target_stats = false;

    std::size_t dim() const { return offset.size(); }

    void normalize_row(std::span<const double> in, std::span<double> out) const;
    std::vector<double> normalize_row(const FeatureRow& row) const;
    double normalize_target(double v) const;
    double denormalize_target(double y) const;
};

// Fits per-feature statistics over the training rows; constant feature columns
// are rejected with the column named. Target statistics are fitted when
// with_target_stats is set (the residual path trains on raw volts and skips
// them, so an identically-zero residual target stays legal).
Normalizer fit_normalizer(std::span<const FeatureRow> rows, std::span<const double> targets,
                          Scheme scheme = Scheme::zscore, bool with_target_stats = true);

}  // namespace evolt::features
