#include "evolt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "evolt/errors.hpp"
#include "evolt/json_io.hpp"
#include "evolt/rng.hpp"

namespace evolt::experiment {

std::string GridCell::tag() const {
    return std::string(features::mode_name(mode)) + "-L" + std::to_string(hidden_layers) +
           "-N" + std::to_string(neurons);
}

std::uint64_t cell_seed(std::uint64_t global_seed, const GridCell& cell) {
    return rng::splitmix64(global_seed ^ rng::fnv1a64(cell.tag()));
}

bool tag_matches(const std::string& tag, const std::string& glob) {
    std::size_t t = 0, g = 0;
    std::size_t star_g = std::string::npos, star_t = 0;
    while (t < tag.size()) {
        if (g < glob.size() && (glob[g] == '?' || glob[g] == tag[t])) {
            ++t;
            ++g;
        } else if (g < glob.size() && glob[g] == '*') {
            star_g = g++;
            star_t = t;
        } else if (star_g != std::string::npos) {
            g = star_g + 1;
            t = ++star_t;
        } else {
            return false;
        }
    }
    while (g < glob.size() && glob[g] == '*') ++g;
    return g == glob.size();
}

namespace {

struct RawSplit {
    std::vector<features::FeatureRow> rows;
    std::vector<double> target;  // FNN: volts, PINN: residual volts
    std::vector<double> v_phy;
    std::vector<double> v_actual;
    std::vector<double> t_s;
};

RawSplit build_raw(features::Mode mode, const std::vector<data::Trajectory>& trajs,
                   const ecm::EcmParams* params, double default_initial_soc) {
    if (mode == features::Mode::pinn && params == nullptr)
        throw InvalidInput("PINN feature assembly requires ecm parameters");
    RawSplit out;
    for (const auto& traj : trajs) {
        if (traj.samples.empty()) continue;

        std::vector<ecm::SimStep> sim;
        if (mode == features::Mode::pinn) {
            ecm::EcmState init = traj.init_state;
            if (!std::isfinite(init.soc)) {
                init.v_rc = {0.0, 0.0};
                init.soc = std::isfinite(traj.samples.front().soc)
                               ? traj.samples.front().soc
                               : default_initial_soc;
            }
            std::vector<ecm::ProfileStep> steps;
            steps.reserve(traj.samples.size());
            for (const auto& s : traj.samples) steps.push_back({s.dt_s, s.current_a});
            sim = ecm::simulate(*params, init, steps).steps;
        }

        for (std::size_t i = 0; i < traj.samples.size(); ++i) {
            const auto& s = traj.samples[i];
            if (mode == features::Mode::pinn) {
                out.rows.push_back(
                    features::build_pinn_row(s, sim[i].ocv_v, sim[i].state, sim[i].v_phy));
                out.target.push_back(s.voltage_v - sim[i].v_phy);
                out.v_phy.push_back(sim[i].v_phy);
            } else {
                out.rows.push_back(features::build_fnn_row(s));
                out.target.push_back(s.voltage_v);
            }
            out.v_actual.push_back(s.voltage_v);
            out.t_s.push_back(s.t_s);
        }
    }
    return out;
}

Assembled normalize_split(features::Mode mode, RawSplit&& raw,
                          const features::Normalizer& norm) {
    Assembled set;
    set.mode = mode;
    set.cols = features::input_dim(mode);
    set.rows = raw.rows.size();
    set.x.resize(set.rows * set.cols);
    for (std::size_t r = 0; r < set.rows; ++r) {
        norm.normalize_row(std::span<const double>(raw.rows[r].values),
                           std::span<double>(set.x.data() + r * set.cols, set.cols));
    }
    set.target.resize(set.rows);
    for (std::size_t r = 0; r < set.rows; ++r) {
        set.target[r] = mode == features::Mode::fnn ? norm.normalize_target(raw.target[r])
                                                    : raw.target[r];
    }
    set.v_phy = std::move(raw.v_phy);
    set.v_actual = std::move(raw.v_actual);
    set.t_s = std::move(raw.t_s);
    return set;
}

}  // namespace

AssembledPair assemble_datasets(features::Mode mode,
                                const std::vector<data::Trajectory>& train,
                                const std::vector<data::Trajectory>& test,
                                const ecm::EcmParams& params, features::Scheme scheme,
                                double default_initial_soc) {
    RawSplit raw_train = build_raw(mode, train, &params, default_initial_soc);
    RawSplit raw_test = build_raw(mode, test, &params, default_initial_soc);
    if (raw_train.rows.size() < 2) throw DataError("training split has fewer than 2 samples");
    if (raw_test.rows.empty()) throw DataError("test split is empty");

    AssembledPair pair;
    pair.norm = features::fit_normalizer(raw_train.rows, raw_train.target, scheme,
                                         /*with_target_stats=*/mode == features::Mode::fnn);
    pair.train = normalize_split(mode, std::move(raw_train), pair.norm);
    pair.test = normalize_split(mode, std::move(raw_test), pair.norm);
    return pair;
}

Assembled assemble_split(features::Mode mode, const std::vector<data::Trajectory>& trajs,
                         const ecm::EcmParams* params, const features::Normalizer& norm,
                         double default_initial_soc) {
    RawSplit raw = build_raw(mode, trajs, params, default_initial_soc);
    if (raw.rows.empty()) throw DataError("split is empty");
    if (norm.dim() != features::input_dim(mode))
        throw InvalidInput("normalizer width does not match the feature mode");
    return normalize_split(mode, std::move(raw), norm);
}

std::vector<double> predict(const nn::MlpModel& model, const Assembled& set,
                            const features::Normalizer& norm) {
    if (model.spec.input_dim != set.cols)
        throw InvalidInput("predict: model/feature width mismatch");
    nn::Workspace ws;
    std::vector<double> out(set.rows);
    for (std::size_t r = 0; r < set.rows; ++r) {
        const double y =
            nn::forward(model, std::span<const double>(set.x.data() + r * set.cols, set.cols), ws);
        out[r] = set.mode == features::Mode::fnn ? norm.denormalize_target(y)
                                                 : set.v_phy[r] + y;
    }
    return out;
}

LoadedData load_trajectories(const ExperimentConfig& cfg) {
    LoadedData out;
    if (std::holds_alternative<SyntheticSpec>(cfg.source)) {
        const auto& spec = std::get<SyntheticSpec>(cfg.source);
        const ecm::EcmParams& truth = spec.truth ? *spec.truth : cfg.ecm_params;
        auto synth = data::synthesize(spec.profile, truth, data::quadratic_nonlinearity(spec.k),
                                      spec.noise_std_v, spec.n_missions, spec.seed,
                                      spec.initial_soc);
        const std::size_t n_train = spec.n_missions - spec.test_missions;
        for (std::size_t m = 0; m < synth.trajectories.size(); ++m) {
            if (m < n_train)
                out.train.push_back(std::move(synth.trajectories[m]));
            else
                out.test.push_back(std::move(synth.trajectories[m]));
        }
    } else {
        const auto& spec = std::get<DataSpec>(cfg.source);
        data::IngestOptions opts;
        opts.soc_source = spec.soc_source;
        opts.capacity_ah = cfg.ecm_params.capacity_ah;
        opts.initial_soc = spec.initial_soc;
        opts.initial_dt_s = spec.initial_dt_s;
        opts.nearest_cycle_fallback = spec.nearest_cycle_fallback;
        auto ingested = data::ingest(spec.dir, spec.columns, spec.split, opts);
        out.train = std::move(ingested.train);
        out.test = std::move(ingested.test);
        out.dropped_rows = ingested.dropped_rows;
    }
    return out;
}

namespace {

void write_trace(const std::filesystem::path& path, const Assembled& test,
                 std::span<const double> pred) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trace: " + path.string());
    const bool pinn = test.mode == features::Mode::pinn;
    out << (pinn ? "t_s,v_actual,v_pred,error_v,v_phy\n" : "t_s,v_actual,v_pred,error_v\n");
    char buf[256];
    for (std::size_t r = 0; r < test.rows; ++r) {
        if (pinn) {
            std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g\n", test.t_s[r],
                          test.v_actual[r], pred[r], pred[r] - test.v_actual[r], test.v_phy[r]);
        } else {
            std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g\n", test.t_s[r],
                          test.v_actual[r], pred[r], pred[r] - test.v_actual[r]);
        }
        out << buf;
    }
}

CellOutcome run_cell(const ExperimentConfig& cfg, const GridCell& cell,
                     const AssembledPair& pair) {
    CellOutcome outcome;
    outcome.cell = cell;
    const std::uint64_t seed = cell_seed(cfg.seed, cell);

    nn::MlpSpec spec;
    spec.input_dim = features::input_dim(cell.mode);
    spec.hidden_layers = cell.hidden_layers;
    spec.neurons = cell.neurons;

    nn::MlpModel model =
        nn::init_model(spec, seed, /*zero_output_layer=*/cell.mode == features::Mode::pinn);

    nn::TrainConfig tc = cfg.train;
    tc.seed = seed;
    auto trained = nn::train(model, pair.train.x.data(), pair.train.target.data(),
                             pair.train.rows, tc);
    outcome.epochs_run = trained.loss_history.size();

    const auto preds = predict(trained.model, pair.test, pair.norm);
    const auto core = metrics::evaluate(preds, pair.test.v_actual);

    metrics::EvalReport report;
    report.model_tag = cell.tag();
    report.hidden_layers = cell.hidden_layers;
    report.neurons = cell.neurons;
    report.max_error_mv = core.max_error_mv;
    report.mae_mv = core.mae_mv;
    report.rmse_mv = core.rmse_mv;
    report.r2_pct = core.r2_pct;
    report.param_count = nn::param_count(spec);
    if (cfg.timing_repetitions > 0) {
        const auto timing = metrics::time_inference(trained.model, pair.test.x.data(),
                                                    pair.test.rows, cfg.timing_repetitions);
        report.mean_inference_us = timing.mean_us;
    }
    outcome.report = report;

    nn::ModelFile mf;
    mf.mode = cell.mode;
    mf.model = std::move(trained.model);
    mf.normalizer = pair.norm;
    if (cell.mode == features::Mode::pinn) mf.ecm_params = cfg.ecm_params;
    nn::save_model(mf, cfg.output_dir / (cell.tag() + ".weights.json"));

    write_trace(cfg.output_dir / (cell.tag() + ".trace.csv"), pair.test, preds);
    outcome.ok = true;
    return outcome;
}

}  // namespace

RunResult run(const ExperimentConfig& cfg) {
    if (cfg.grid.empty()) throw ConfigError("experiment grid is empty");
    cfg.ecm_params.validate();
    cfg.train.validate();
    std::filesystem::create_directories(cfg.output_dir);

    const LoadedData loaded = load_trajectories(cfg);

    bool need_fnn = false, need_pinn = false;
    for (const auto& cell : cfg.grid) {
        (cell.mode == features::Mode::fnn ? need_fnn : need_pinn) = true;
    }
    const double init_soc = std::holds_alternative<DataSpec>(cfg.source)
                                ? std::get<DataSpec>(cfg.source).initial_soc
                                : std::get<SyntheticSpec>(cfg.source).initial_soc;

    std::optional<AssembledPair> fnn_pair, pinn_pair;
    if (need_fnn)
        fnn_pair = assemble_datasets(features::Mode::fnn, loaded.train, loaded.test,
                                     cfg.ecm_params, cfg.normalization, init_soc);
    if (need_pinn)
        pinn_pair = assemble_datasets(features::Mode::pinn, loaded.train, loaded.test,
                                      cfg.ecm_params, cfg.normalization, init_soc);

    RunResult result;
    result.outcomes.resize(cfg.grid.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cfg.grid.size()) return;
            const GridCell& cell = cfg.grid[i];
            const AssembledPair& pair =
                cell.mode == features::Mode::fnn ? *fnn_pair : *pinn_pair;
            try {
                result.outcomes[i] = run_cell(cfg, cell, pair);
            } catch (const std::exception& e) {
                result.outcomes[i].cell = cell;
                result.outcomes[i].ok = false;
                result.outcomes[i].error = e.what();
            }
        }
    };

    const std::size_t n_threads = std::max<std::size_t>(1, std::min(cfg.jobs, cfg.grid.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // results.csv mirrors the reporting table: FNN block first, then PINN,
    // each ordered by depth then width.
    std::vector<const CellOutcome*> ordered;
    for (const auto& o : result.outcomes)
        if (o.ok) ordered.push_back(&o);
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
        const auto key = [](const CellOutcome& o) {
            return std::tuple(o.cell.mode == features::Mode::pinn ? 1 : 0,
                              o.cell.hidden_layers, o.cell.neurons);
        };
        return key(*a) < key(*b);
    });

    result.results_csv = cfg.output_dir / "results.csv";
    {
        std::ofstream out(result.results_csv);
        if (!out) throw DataError("cannot write " + result.results_csv.string());
        out << metrics::EvalReport::csv_header() << "\n";
        for (const auto* o : ordered) out << o->report.csv_row() << "\n";
    }

    const auto failures_path = cfg.output_dir / "failures.txt";
    std::vector<const CellOutcome*> failed;
    for (const auto& o : result.outcomes)
        if (!o.ok) failed.push_back(&o);
    if (!failed.empty()) {
        std::ofstream out(failures_path);
        for (const auto* o : failed) out << o->cell.tag() << ": " << o->error << "\n";
        result.exit_code = 3;
    } else {
        std::filesystem::remove(failures_path);
        result.exit_code = 0;
    }
    return result;
}

}  // namespace evolt::experiment
