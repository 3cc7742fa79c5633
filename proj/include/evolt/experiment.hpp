#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "evolt/data.hpp"
#include "evolt/ecm.hpp"
#include "evolt/features.hpp"
#include "evolt/metrics.hpp"
#include "evolt/nn.hpp"

namespace evolt::experiment {

struct GridCell {
    features::Mode mode = features::Mode::fnn;
    std::size_t hidden_layers = 1;
    std::size_t neurons = 32;

    std::string tag() const;  // e.g. "PINN-L2-N64"
};

struct SyntheticSpec {
    data::MissionProfile profile;
    std::optional<ecm::EcmParams> truth;  // defaults to the experiment ecm
    double k = 0.0;                       // quadratic nonlinearity coefficient
    double noise_std_v = 0.0;
    std::size_t n_missions = 8;
    std::size_t test_missions = 2;  // trailing missions held out as the test set
    double initial_soc = 1.0;
    std::uint64_t seed = 1;
};

struct DataSpec {
    std::filesystem::path dir;
    data::ColumnMap columns;
    data::SplitSpec split;
    data::SocSource soc_source = data::SocSource::coulomb;
    double initial_soc = 1.0;
    double initial_dt_s = 0.0;
    bool nearest_cycle_fallback = false;
};

struct RelaxationFile {
    std::filesystem::path path;
    double hold_current_a = 0.0;
};

struct FitEcmSpec {
    double capacity_ah = 0.0;
    ecm::OcvCurve ocv;
    std::vector<std::filesystem::path> pulses;       // canonical-schema CSVs
    std::vector<RelaxationFile> relaxations;
};

struct ExperimentConfig {
    std::variant<SyntheticSpec, DataSpec> source;
    ecm::EcmParams ecm_params;
    std::vector<GridCell> grid;
    nn::TrainConfig train;
    features::Scheme normalization = features::Scheme::zscore;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 42;
    std::size_t timing_repetitions = 0;  // 0 keeps results.csv deterministic
    std::size_t jobs = 1;
    std::optional<FitEcmSpec> fit_ecm;
};

// The Table-1 style default: both modes over the four reported architectures.
std::vector<GridCell> default_grid();

// Strict schema; unknown keys anywhere are rejected.
ExperimentConfig load_config(const std::filesystem::path& path);

// Decorrelated but reproducible per-cell seed.
std::uint64_t cell_seed(std::uint64_t global_seed, const GridCell& cell);

// Case-sensitive glob with * and ? over model tags.
bool tag_matches(const std::string& tag, const std::string& glob);

// Normalized feature matrix plus everything needed to score and trace a split.
struct Assembled {
    features::Mode mode = features::Mode::fnn;
    std::size_t rows = 0, cols = 0;
    std::vector<double> x;         // rows x cols, normalized
    std::vector<double> target;    // FNN: normalized volts; PINN: residual volts
    std::vector<double> v_phy;     // PINN only
    std::vector<double> v_actual;  // volts
    std::vector<double> t_s;
};

struct AssembledPair {
    Assembled train;
    Assembled test;
    features::Normalizer norm;  // fitted on the training split only
};

AssembledPair assemble_datasets(features::Mode mode,
                                const std::vector<data::Trajectory>& train,
                                const std::vector<data::Trajectory>& test,
                                const ecm::EcmParams& params, features::Scheme scheme,
                                double default_initial_soc);

// One split against an existing normalizer (used by `eval` on saved weights).
// params may be null for the FNN path; the PINN path requires it.
Assembled assemble_split(features::Mode mode, const std::vector<data::Trajectory>& trajs,
                         const ecm::EcmParams* params, const features::Normalizer& norm,
                         double default_initial_soc);

// Volts for every row of the assembled split.
std::vector<double> predict(const nn::MlpModel& model, const Assembled& set,
                            const features::Normalizer& norm);

struct LoadedData {
    std::vector<data::Trajectory> train;
    std::vector<data::Trajectory> test;
    std::size_t dropped_rows = 0;
};

LoadedData load_trajectories(const ExperimentConfig& cfg);

struct CellOutcome {
    GridCell cell;
    bool ok = false;
    std::string error;
    metrics::EvalReport report;
    std::size_t epochs_run = 0;
};

struct RunResult {
    std::vector<CellOutcome> outcomes;
    std::filesystem::path results_csv;
    int exit_code = 0;  // 0 ok, 3 when any cell failed
};

// Trains and evaluates every grid cell, writes <tag>.weights.json and
// <tag>.trace.csv per cell plus an aggregated results.csv sorted FNN block
// first, then PINN. Cell failures are recorded in failures.txt and do not
// abort the remaining cells.
RunResult run(const ExperimentConfig& cfg);

}  // namespace evolt::experiment
