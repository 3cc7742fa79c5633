#include "evolt/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evolt/errors.hpp"

namespace evolt::features {

void Sample::validate() const {
    if (!std::isfinite(t_s) || !std::isfinite(dt_s) || !std::isfinite(current_a) ||
        !std::isfinite(voltage_v) || !std::isfinite(temp_c) || !std::isfinite(soc))
        throw InvalidInput("sample has a non-finite field");
    if (!(dt_s > 0.0)) throw InvalidInput("sample dt_s must be > 0");
    if (cycle < 1) throw InvalidInput("sample cycle must be >= 1");
}

const char* mode_name(Mode m) { return m == Mode::fnn ? "FNN" : "PINN"; }

Mode parse_mode(const std::string& s) {
    if (s == "FNN") return Mode::fnn;
    if (s == "PINN") return Mode::pinn;
    throw ConfigError("unknown model mode '" + s + "' (expected FNN or PINN)");
}

const char* feature_name(Mode m, std::size_t idx) {
    static const char* const names[kPinnDim] = {
        "dt_s", "current_a", "soc", "temp_c", "cycle",
        "ocv_v", "v_rc1", "v_rc2", "v_phy",
    };
    if (idx >= input_dim(m)) throw InvalidInput("feature index out of range");
    return names[idx];
}

FeatureRow build_fnn_row(const Sample& s) {
    s.validate();
    return FeatureRow{Mode::fnn,
                      {s.dt_s, s.current_a, s.soc, s.temp_c, static_cast<double>(s.cycle)}};
}

FeatureRow build_pinn_row(const Sample& s, double ocv_v, const ecm::EcmState& state,
                          double v_phy) {
    s.validate();
    if (!std::isfinite(ocv_v) || !std::isfinite(state.v_rc[0]) ||
        !std::isfinite(state.v_rc[1]) || !std::isfinite(v_phy))
        throw InvalidInput("pinn row: non-finite ecm quantity");
    return FeatureRow{Mode::pinn,
                      {s.dt_s, s.current_a, s.soc, s.temp_c, static_cast<double>(s.cycle),
                       ocv_v, state.v_rc[0], state.v_rc[1], v_phy}};
}

void Normalizer::normalize_row(std::span<const double> in, std::span<double> out) const {
    if (in.size() != dim() || out.size() != dim())
        throw InvalidInput("normalize_row: dimension mismatch");
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = (in[i] - offset[i]) / scale[i];
}

std::vector<double> Normalizer::normalize_row(const FeatureRow& row) const {
    std::vector<double> out(row.values.size());
    normalize_row(std::span<const double>(row.values), std::span<double>(out));
    return out;
}

double Normalizer::normalize_target(double v) const {
    return (v - target_offset) / target_scale;
}

double Normalizer::denormalize_target(double y) const {
    return y * target_scale + target_offset;
}

namespace {

struct ColumnStats {
    double offset = 0.0;
    double scale = 0.0;  // population std or range; 0 means constant
};

ColumnStats column_stats(Scheme scheme, std::span<const double> col) {
    const double n = static_cast<double>(col.size());
    if (scheme == Scheme::zscore) {
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= n;
        double ssq = 0.0;
        for (double v : col) {
            const double d = v - mean;
            ssq += d * d;
        }
        return {mean, std::sqrt(ssq / n)};
    }
    double lo = col[0], hi = col[0];
    for (double v : col) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {lo, hi - lo};
}

}  // namespace

Normalizer fit_normalizer(std::span<const FeatureRow> rows, std::span<const double> targets,
                          Scheme scheme, bool with_target_stats) {
    if (rows.size() < 2) throw InvalidInput("fit_normalizer: need at least 2 rows");
    if (targets.size() != rows.size())
        throw InvalidInput("fit_normalizer: rows/targets length mismatch");
    const Mode mode = rows.front().mode;
    const std::size_t d = input_dim(mode);
    for (const auto& r : rows) {
        if (r.mode != mode || r.values.size() != d)
            throw InvalidInput("fit_normalizer: inconsistent row shapes");
    }

    Normalizer out;
    out.scheme = scheme;
    out.offset.resize(d);
    out.scale.resize(d);

    std::vector<double> col(rows.size());
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t r = 0; r < rows.size(); ++r) col[r] = rows[r].values[c];
        const auto st = column_stats(scheme, col);
        if (!(st.scale > 0.0))
            throw DataError(std::string("constant feature column '") + feature_name(mode, c) +
                            "' (index " + std::to_string(c) + ")");
        out.offset[c] = st.offset;
        out.scale[c] = st.scale;
    }

    if (with_target_stats) {
        const auto st = column_stats(scheme, targets);
        if (!(st.scale > 0.0)) throw DataError("constant target column");
        out.target_offset = st.offset;
        out.target_scale = st.scale;
        out.has_target_stats = true;
    }
    return out;
}

}  // namespace evolt::features
