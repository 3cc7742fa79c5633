#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "evolt/data.hpp"
#include "evolt/errors.hpp"
#include "evolt/experiment.hpp"
#include "evolt/json_io.hpp"
#include "evolt/metrics.hpp"
#include "evolt/nn.hpp"
#include "evolt/rng.hpp"

namespace {

using namespace evolt;

int cmd_run(const std::string& config_path, const std::string& out_dir, std::size_t jobs,
            bool have_seed, std::uint64_t seed, const std::string& filter) {
    auto cfg = experiment::load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (jobs > 0) cfg.jobs = jobs;
    if (have_seed) cfg.seed = seed;
    if (!filter.empty()) {
        std::vector<experiment::GridCell> kept;
        for (const auto& cell : cfg.grid)
            if (experiment::tag_matches(cell.tag(), filter)) kept.push_back(cell);
        if (kept.empty())
            throw ConfigError("--filter '" + filter + "' matched no grid cells");
        cfg.grid = std::move(kept);
    }

    const auto result = experiment::run(cfg);
    for (const auto& o : result.outcomes) {
        if (o.ok) {
            std::printf("%-14s rmse %8.3f mV  mae %8.3f mV  max %8.3f mV  r2 %6.2f %%  (%zu epochs)\n",
                        o.cell.tag().c_str(), o.report.rmse_mv, o.report.mae_mv,
                        o.report.max_error_mv, o.report.r2_pct, o.epochs_run);
        } else {
            std::fprintf(stderr, "%-14s FAILED: %s\n", o.cell.tag().c_str(), o.error.c_str());
        }
    }
    std::printf("results: %s\n", result.results_csv.string().c_str());
    return result.exit_code;
}

ecm::PulseTrace load_pulse(const std::filesystem::path& path) {
    ecm::PulseTrace trace;
    for (const auto& traj : data::read_canonical_csv(path)) {
        for (const auto& s : traj.samples) trace.samples.push_back({s.t_s, s.current_a, s.voltage_v});
    }
    return trace;
}

ecm::RelaxationTrace load_relaxation(const experiment::RelaxationFile& file) {
    ecm::RelaxationTrace trace;
    trace.hold_current_a = file.hold_current_a;
    for (const auto& traj : data::read_canonical_csv(file.path)) {
        for (const auto& s : traj.samples) trace.samples.emplace_back(s.t_s, s.voltage_v);
    }
    if (!trace.samples.empty()) {
        const double t0 = trace.samples.front().first;
        for (auto& [t, v] : trace.samples) t -= t0;
    }
    return trace;
}

int cmd_fit_ecm(const std::string& config_path, const std::string& out_dir) {
    auto cfg = experiment::load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!cfg.fit_ecm) throw ConfigError("config has no fit_ecm section");

    std::vector<ecm::PulseTrace> pulses;
    for (const auto& p : cfg.fit_ecm->pulses) pulses.push_back(load_pulse(p));
    std::vector<ecm::RelaxationTrace> rests;
    for (const auto& r : cfg.fit_ecm->relaxations) rests.push_back(load_relaxation(r));

    const auto fit = ecm::fit_params(rests, pulses, cfg.fit_ecm->capacity_ah, cfg.fit_ecm->ocv);

    jsonio::json doc = jsonio::to_json(fit.params);
    doc["residual_norm"] = fit.residual_norm;
    std::cout << doc.dump(2) << "\n";

    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream out(cfg.output_dir / "fitted_ecm.json");
    out << doc.dump(2) << "\n";
    return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
    auto cfg = experiment::load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!std::holds_alternative<experiment::SyntheticSpec>(cfg.source))
        throw ConfigError("config has no synthetic section");
    const auto& spec = std::get<experiment::SyntheticSpec>(cfg.source);
    const ecm::EcmParams& truth = spec.truth ? *spec.truth : cfg.ecm_params;

    const auto synth =
        data::synthesize(spec.profile, truth, data::quadratic_nonlinearity(spec.k),
                         spec.noise_std_v, spec.n_missions, spec.seed, spec.initial_soc);

    std::filesystem::create_directories(cfg.output_dir);
    const auto csv = cfg.output_dir / "synthetic.csv";
    data::write_canonical_csv(csv, synth.trajectories);

    const auto truth_csv = cfg.output_dir / "synthetic_truth.csv";
    std::ofstream out(truth_csv);
    out << "t_s,soc,v_rc1,v_rc2,ocv_v,v_phy\n";
    char buf[256];
    for (std::size_t m = 0; m < synth.truth.size(); ++m) {
        for (std::size_t i = 0; i < synth.truth[m].size(); ++i) {
            const auto& st = synth.truth[m][i];
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          synth.trajectories[m].samples[i].t_s, st.state.soc, st.state.v_rc[0],
                          st.state.v_rc[1], st.ocv_v, st.v_phy);
            out << buf;
        }
    }
    std::printf("wrote %s (%zu missions) and %s\n", csv.string().c_str(), synth.trajectories.size(),
                truth_csv.string().c_str());
    return 0;
}

int cmd_eval(const std::string& weights_path, const std::string& data_path) {
    const auto mf = nn::load_model(weights_path);
    const auto trajs = data::read_canonical_csv(data_path);

    const ecm::EcmParams* params = mf.ecm_params ? &*mf.ecm_params : nullptr;
    const auto set = experiment::assemble_split(mf.mode, trajs, params, mf.normalizer, 1.0);
    const auto preds = experiment::predict(mf.model, set, mf.normalizer);
    const auto core = metrics::evaluate(preds, set.v_actual);

    metrics::EvalReport report;
    report.model_tag = features::mode_name(mf.mode);
    report.hidden_layers = mf.model.spec.hidden_layers;
    report.neurons = mf.model.spec.neurons;
    report.max_error_mv = core.max_error_mv;
    report.mae_mv = core.mae_mv;
    report.rmse_mv = core.rmse_mv;
    report.r2_pct = core.r2_pct;
    report.param_count = nn::param_count(mf.model.spec);
    std::cout << metrics::EvalReport::csv_header() << "\n" << report.csv_row() << "\n";
    return 0;
}

int cmd_bench(const std::string& weights_path, std::size_t rows, std::size_t reps) {
    const auto mf = nn::load_model(weights_path);
    const std::size_t dim = mf.model.spec.input_dim;

    std::mt19937_64 gen(rng::splitmix64(0xb525u));
    std::vector<double> x(rows * dim);
    for (auto& v : x) v = rng::gaussian(gen);

    const auto timing = metrics::time_inference(mf.model, x.data(), rows, reps);
    std::printf("%s: %.4f us/sample (stddev %.4f, %zu rows x %zu reps, %zu params)\n",
                features::mode_name(mf.mode), timing.mean_us, timing.stddev_us, timing.rows,
                timing.repetitions, nn::param_count(mf.model.spec));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Battery terminal-voltage surrogates: 2RC physics model, FNN and residual PINN"};
    app.require_subcommand(1);

    std::string config_path, out_dir, filter;
    std::uint64_t seed = 0;
    bool have_seed = false;
    std::size_t jobs = 0;

    auto* run_cmd = app.add_subcommand("run", "Train and evaluate the architecture grid");
    run_cmd->add_option("config,--config", config_path, "experiment config (JSON)")->required();
    run_cmd->add_option("--out", out_dir, "output directory (overrides config)");
    run_cmd->add_option("--jobs", jobs, "parallel grid cells");
    run_cmd->add_option("--seed", seed, "global seed (overrides config)")
        ->each([&](const std::string&) { have_seed = true; });
    run_cmd->add_option("--filter", filter, "glob over model tags, e.g. 'PINN-*'");

    auto* fit_cmd = app.add_subcommand("fit-ecm", "Identify 2RC parameters from pulse/relaxation traces");
    fit_cmd->add_option("config,--config", config_path, "experiment config (JSON)")->required();
    fit_cmd->add_option("--out", out_dir, "output directory (overrides config)");

    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic mission dataset + ground truth");
    synth_cmd->add_option("config,--config", config_path, "experiment config (JSON)")->required();
    synth_cmd->add_option("--out", out_dir, "output directory (overrides config)");

    std::string weights_path, data_path;
    auto* eval_cmd = app.add_subcommand("eval", "Score saved weights against a canonical CSV");
    eval_cmd->add_option("weights", weights_path, "weight file (JSON)")->required();
    eval_cmd->add_option("data", data_path, "canonical-schema CSV")->required();

    std::size_t bench_rows = 256, bench_reps = 1000;
    auto* bench_cmd = app.add_subcommand("bench", "Measure per-sample inference latency");
    bench_cmd->add_option("weights", weights_path, "weight file (JSON)")->required();
    bench_cmd->add_option("--rows", bench_rows, "rows per repetition");
    bench_cmd->add_option("--reps", bench_reps, "repetitions");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed())
            return cmd_run(config_path, out_dir, jobs, have_seed, seed, filter);
        if (fit_cmd->parsed()) return cmd_fit_ecm(config_path, out_dir);
        if (synth_cmd->parsed()) return cmd_synth(config_path, out_dir);
        if (eval_cmd->parsed()) return cmd_eval(weights_path, data_path);
        if (bench_cmd->parsed()) return cmd_bench(weights_path, bench_rows, bench_reps);
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
