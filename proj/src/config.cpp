#include <fstream>

#include "evolt/errors.hpp"
#include "evolt/experiment.hpp"
#include "evolt/json_io.hpp"

namespace evolt::experiment {

namespace {

using jsonio::json;

data::ColumnSpec column_spec(const json& j, const std::string& path) {
    if (j.is_string()) return {j.get<std::string>(), 1.0};
    if (j.is_object()) {
        jsonio::check_keys(j, {"name", "scale"}, path);
        return {jsonio::get_str(j, "name", path), jsonio::get_num_or(j, "scale", path, 1.0)};
    }
    throw ConfigError(path + ": expected a column name or {name, scale}");
}

data::ColumnMap columns_from_json(const json& j, const std::string& path) {
    jsonio::check_keys(j, {"time", "current", "voltage", "temp", "soc", "cycle", "dt"}, path);
    data::ColumnMap map;
    map.time = column_spec(jsonio::require(j, "time", path), path + ".time");
    map.current = column_spec(jsonio::require(j, "current", path), path + ".current");
    map.voltage = column_spec(jsonio::require(j, "voltage", path), path + ".voltage");
    map.temp = column_spec(jsonio::require(j, "temp", path), path + ".temp");
    if (j.contains("soc")) map.soc = column_spec(j.at("soc"), path + ".soc");
    if (j.contains("cycle")) map.cycle = column_spec(j.at("cycle"), path + ".cycle");
    if (j.contains("dt")) map.dt = column_spec(j.at("dt"), path + ".dt");
    return map;
}

std::vector<data::CellCycles> cells_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array");
    std::vector<data::CellCycles> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string epath = path + "[" + std::to_string(i) + "]";
        jsonio::check_keys(j[i], {"cell", "cycles"}, epath);
        data::CellCycles entry;
        entry.cell = jsonio::get_str(j[i], "cell", epath);
        const json& cycles = jsonio::require(j[i], "cycles", epath);
        if (!cycles.is_array() || cycles.empty())
            throw ConfigError(epath + ".cycles: expected a non-empty array of integers");
        for (const auto& c : cycles) {
            if (!c.is_number_integer())
                throw ConfigError(epath + ".cycles: entries must be integers");
            entry.cycles.push_back(c.get<int>());
        }
        out.push_back(std::move(entry));
    }
    return out;
}

data::Phase phase_from_json(const json& j, const std::string& path) {
    jsonio::check_keys(j, {"current_a", "duration_s"}, path);
    return {jsonio::get_num(j, "current_a", path), jsonio::get_num(j, "duration_s", path)};
}

data::MissionProfile profile_from_json(const json& j, const std::string& path) {
    jsonio::check_keys(j,
                       {"takeoff", "cruise", "landing", "rest_s", "power_reduction", "dt_s",
                        "dt_jitter", "ambient_temp_c", "temp_rise_c_per_a"},
                       path);
    data::MissionProfile p;
    p.takeoff = phase_from_json(jsonio::require(j, "takeoff", path), path + ".takeoff");
    p.cruise = phase_from_json(jsonio::require(j, "cruise", path), path + ".cruise");
    p.landing = phase_from_json(jsonio::require(j, "landing", path), path + ".landing");
    p.rest_s = jsonio::get_num(j, "rest_s", path);
    p.power_reduction = jsonio::get_num_or(j, "power_reduction", path, 0.0);
    p.dt_s = jsonio::get_num_or(j, "dt_s", path, 1.0);
    p.dt_jitter = jsonio::get_num_or(j, "dt_jitter", path, 0.01);
    p.ambient_temp_c = jsonio::get_num_or(j, "ambient_temp_c", path, 25.0);
    p.temp_rise_c_per_a = jsonio::get_num_or(j, "temp_rise_c_per_a", path, 0.1);
    p.validate();
    return p;
}

SyntheticSpec synthetic_from_json(const json& j, const std::string& path) {
    jsonio::check_keys(j,
                       {"profile", "truth", "k", "noise_std_v", "n_missions", "test_missions",
                        "initial_soc", "seed"},
                       path);
    SyntheticSpec s;
    s.profile = profile_from_json(jsonio::require(j, "profile", path), path + ".profile");
    if (j.contains("truth"))
        s.truth = jsonio::ecm_from_json(j.at("truth"), path + ".truth");
    s.k = jsonio::get_num_or(j, "k", path, 0.0);
    s.noise_std_v = jsonio::get_num_or(j, "noise_std_v", path, 0.0);
    s.n_missions = static_cast<std::size_t>(jsonio::get_int_or(j, "n_missions", path, 8));
    s.test_missions = static_cast<std::size_t>(jsonio::get_int_or(j, "test_missions", path, 2));
    s.initial_soc = jsonio::get_num_or(j, "initial_soc", path, 1.0);
    s.seed = jsonio::get_u64_or(j, "seed", path, 1);
    if (s.n_missions < 2) throw ConfigError(path + ".n_missions must be >= 2");
    if (s.test_missions < 1 || s.test_missions >= s.n_missions)
        throw ConfigError(path + ".test_missions must leave at least one training mission");
    return s;
}

DataSpec data_from_json(const json& j, const std::string& path) {
    jsonio::check_keys(j,
                       {"dir", "columns", "current_sign", "split", "soc", "initial_soc",
                        "initial_dt_s", "nearest_cycle_fallback"},
                       path);
    DataSpec d;
    d.dir = jsonio::get_str(j, "dir", path);
    d.columns = columns_from_json(jsonio::require(j, "columns", path), path + ".columns");
    const double sign = jsonio::get_num_or(j, "current_sign", path, 1.0);
    if (sign != 1.0 && sign != -1.0)
        throw ConfigError(path + ".current_sign must be 1 or -1");
    d.columns.current_sign = sign;

    const json& split = jsonio::require(j, "split", path);
    jsonio::check_keys(split, {"train", "test"}, path + ".split");
    d.split.train = cells_from_json(jsonio::require(split, "train", path + ".split"),
                                    path + ".split.train");
    d.split.test =
        cells_from_json(jsonio::require(split, "test", path + ".split"), path + ".split.test");
    d.split.validate();

    const std::string soc = jsonio::get_str_or(j, "soc", path, "coulomb");
    if (soc == "coulomb")
        d.soc_source = data::SocSource::coulomb;
    else if (soc == "column")
        d.soc_source = data::SocSource::column;
    else
        throw ConfigError(path + ".soc must be 'coulomb' or 'column'");
    if (d.soc_source == data::SocSource::column && !d.columns.soc)
        throw ConfigError(path + ": soc source is 'column' but columns.soc is not mapped");

    d.initial_soc = jsonio::get_num_or(j, "initial_soc", path, 1.0);
    d.initial_dt_s = jsonio::get_num_or(j, "initial_dt_s", path, 0.0);
    d.nearest_cycle_fallback = jsonio::get_bool_or(j, "nearest_cycle_fallback", path, false);
    return d;
}

std::vector<GridCell> grid_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array");
    std::vector<GridCell> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string epath = path + "[" + std::to_string(i) + "]";
        jsonio::check_keys(j[i], {"mode", "hidden_layers", "neurons"}, epath);
        GridCell cell;
        cell.mode = features::parse_mode(jsonio::get_str(j[i], "mode", epath));
        const auto layers = jsonio::get_int(j[i], "hidden_layers", epath);
        const auto neurons = jsonio::get_int(j[i], "neurons", epath);
        if (layers < 0) throw ConfigError(epath + ".hidden_layers must be >= 0");
        if (neurons < 1) throw ConfigError(epath + ".neurons must be >= 1");
        cell.hidden_layers = static_cast<std::size_t>(layers);
        cell.neurons = static_cast<std::size_t>(neurons);
        out.push_back(cell);
    }
    return out;
}

nn::TrainConfig train_from_json(const json& j, const std::string& path,
                                features::Scheme& scheme) {
    jsonio::check_keys(j,
                       {"learning_rate", "epochs", "batch_size", "optimizer", "shuffle",
                        "early_stop_patience", "early_stop_rel_improvement", "holdout_fraction",
                        "normalization"},
                       path);
    nn::TrainConfig t;
    t.learning_rate = jsonio::get_num_or(j, "learning_rate", path, 1e-3);
    const auto epochs = jsonio::get_int_or(j, "epochs", path, 2000);
    if (epochs < 0) throw ConfigError(path + ".epochs must be >= 0");
    t.epochs = static_cast<std::size_t>(epochs);
    const auto batch = jsonio::get_int_or(j, "batch_size", path, 256);
    if (batch < 1) throw ConfigError(path + ".batch_size must be >= 1");
    t.batch_size = static_cast<std::size_t>(batch);
    const std::string opt = jsonio::get_str_or(j, "optimizer", path, "adam");
    if (opt == "adam")
        t.optimizer = nn::TrainConfig::Optimizer::adam;
    else if (opt == "sgd")
        t.optimizer = nn::TrainConfig::Optimizer::sgd;
    else
        throw ConfigError(path + ".optimizer must be 'adam' or 'sgd'");
    t.shuffle = jsonio::get_bool_or(j, "shuffle", path, true);
    const auto patience = jsonio::get_int_or(j, "early_stop_patience", path, 100);
    if (patience < 0) throw ConfigError(path + ".early_stop_patience must be >= 0");
    t.early_stop_patience = static_cast<std::size_t>(patience);
    t.early_stop_rel_improvement =
        jsonio::get_num_or(j, "early_stop_rel_improvement", path, 1e-4);
    t.holdout_fraction = jsonio::get_num_or(j, "holdout_fraction", path, 0.0);

    const std::string norm = jsonio::get_str_or(j, "normalization", path, "zscore");
    if (norm == "zscore")
        scheme = features::Scheme::zscore;
    else if (norm == "minmax")
        scheme = features::Scheme::minmax;
    else
        throw ConfigError(path + ".normalization must be 'zscore' or 'minmax'");
    t.validate();
    return t;
}

FitEcmSpec fit_ecm_from_json(const json& j, const std::string& path) {
    jsonio::check_keys(j, {"capacity_ah", "ocv_knots", "pulses", "relaxations"}, path);
    FitEcmSpec f;
    f.capacity_ah = jsonio::get_num(j, "capacity_ah", path);
    f.ocv = jsonio::ocv_from_json(jsonio::require(j, "ocv_knots", path), path + ".ocv_knots");
    const json& pulses = jsonio::require(j, "pulses", path);
    if (!pulses.is_array() || pulses.empty())
        throw ConfigError(path + ".pulses: expected a non-empty array of paths");
    for (const auto& p : pulses) {
        if (!p.is_string()) throw ConfigError(path + ".pulses: entries must be strings");
        f.pulses.emplace_back(p.get<std::string>());
    }
    const json& rests = jsonio::require(j, "relaxations", path);
    if (!rests.is_array() || rests.empty())
        throw ConfigError(path + ".relaxations: expected a non-empty array");
    for (std::size_t i = 0; i < rests.size(); ++i) {
        const std::string epath = path + ".relaxations[" + std::to_string(i) + "]";
        jsonio::check_keys(rests[i], {"path", "hold_current_a"}, epath);
        f.relaxations.push_back(
            {jsonio::get_str(rests[i], "path", epath), jsonio::get_num(rests[i], "hold_current_a", epath)});
    }
    return f;
}

}  // namespace

std::vector<GridCell> default_grid() {
    std::vector<GridCell> grid;
    for (features::Mode mode : {features::Mode::fnn, features::Mode::pinn}) {
        grid.push_back({mode, 1, 32});
        grid.push_back({mode, 2, 64});
        grid.push_back({mode, 2, 128});
        grid.push_back({mode, 4, 128});
    }
    return grid;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }

    jsonio::check_keys(
        doc, {"seed", "output_dir", "ecm", "synthetic", "data", "grid", "train", "timing",
              "fit_ecm", "jobs"},
        "");

    ExperimentConfig cfg;
    cfg.seed = jsonio::get_u64_or(doc, "seed", "", 42);
    cfg.output_dir = jsonio::get_str_or(doc, "output_dir", "", "out");
    cfg.ecm_params = jsonio::ecm_from_json(jsonio::require(doc, "ecm", ""), "ecm");

    const bool has_synth = doc.contains("synthetic");
    const bool has_data = doc.contains("data");
    if (has_synth == has_data)
        throw ConfigError("config must contain exactly one of 'synthetic' or 'data'");
    if (has_synth)
        cfg.source = synthetic_from_json(doc.at("synthetic"), "synthetic");
    else
        cfg.source = data_from_json(doc.at("data"), "data");

    cfg.grid = doc.contains("grid") ? grid_from_json(doc.at("grid"), "grid") : default_grid();

    if (doc.contains("train"))
        cfg.train = train_from_json(doc.at("train"), "train", cfg.normalization);
    else
        cfg.train = nn::TrainConfig{};

    if (doc.contains("timing")) {
        jsonio::check_keys(doc.at("timing"), {"repetitions"}, "timing");
        const auto reps = jsonio::get_int_or(doc.at("timing"), "repetitions", "timing", 0);
        if (reps < 0) throw ConfigError("timing.repetitions must be >= 0");
        cfg.timing_repetitions = static_cast<std::size_t>(reps);
    }

    const auto jobs = jsonio::get_int_or(doc, "jobs", "", 1);
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    cfg.jobs = static_cast<std::size_t>(jobs);

    if (doc.contains("fit_ecm"))
        cfg.fit_ecm = fit_ecm_from_json(doc.at("fit_ecm"), "fit_ecm");

    return cfg;
}

}  // namespace evolt::experiment
