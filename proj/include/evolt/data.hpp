#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evolt/ecm.hpp"
#include "evolt/features.hpp"

namespace evolt::data {

// Source column plus a multiplicative unit conversion (e.g. 0.001 for mA -> A).
struct ColumnSpec {
    std::string name;
    double scale = 1.0;
};

// Adapter from a cycling CSV layout to the canonical sample schema. dt is
// derived from consecutive timestamps when not mapped; soc and cycle are
// optional (cycle defaults to 1, soc can be coulomb-counted instead).
struct ColumnMap {
    ColumnSpec time;
    ColumnSpec current;
    ColumnSpec voltage;
    ColumnSpec temp;
    std::optional<ColumnSpec> soc;
    std::optional<ColumnSpec> cycle;
    std::optional<ColumnSpec> dt;
    double current_sign = 1.0;  // +1 when the source is discharge-positive
};

struct CellCycles {
    std::string cell;
    std::vector<int> cycles;
};

struct SplitSpec {
    std::vector<CellCycles> train;
    std::vector<CellCycles> test;

    void validate() const;  // train/test cell sets must be disjoint
};

// One (cell, cycle) in time order. init_state carries the exact ECM state at
// the start of the trajectory when the generator knows it; ingested data
// leaves soc NaN and the pipeline falls back to the first sample's soc.
struct Trajectory {
    std::string cell;
    int cycle = 1;
    std::vector<features::Sample> samples;
    ecm::EcmState init_state{{0.0, 0.0}, std::numeric_limits<double>::quiet_NaN()};
};

enum class SocSource { column, coulomb };

struct IngestOptions {
    SocSource soc_source = SocSource::column;
    double capacity_ah = 0.0;    // required for coulomb counting
    double initial_soc = 1.0;    // per-cycle starting soc for coulomb counting
    double initial_dt_s = 0.0;   // first-sample dt; 0 means use the cycle median
    bool nearest_cycle_fallback = false;
};

struct IngestResult {
    std::vector<Trajectory> train;
    std::vector<Trajectory> test;
    std::size_t dropped_rows = 0;  // rows removed for non-finite/unparseable values
};

// Loads <cell>.csv per split entry from dir. Time must strictly increase
// within a cycle; rows with non-finite mapped values are dropped and counted.
IngestResult ingest(const std::filesystem::path& dir, const ColumnMap& map,
                    const SplitSpec& split, const IngestOptions& opts = {});

struct Phase {
    double current_a = 0.0;
    double duration_s = 0.0;
};

// Takeoff / cruise / landing pulses followed by a rest, repeated per mission.
// power_reduction scales the phase currents by (1 - power_reduction). The dt
// jitter, ambient temperature coupling and per-mission cycle numbers keep
// every feature column non-constant so z-scoring stays well defined.
struct MissionProfile {
    Phase takeoff;
    Phase cruise;
    Phase landing;
    double rest_s = 0.0;
    double power_reduction = 0.0;
    double dt_s = 1.0;
    double dt_jitter = 0.01;      // relative, uniform in [-jitter, +jitter]
    double ambient_temp_c = 25.0;
    double temp_rise_c_per_a = 0.1;

    void validate() const;  // throws ConfigError
};

using Nonlinearity = std::function<double(double)>;

// k * i * |i|: charge-antisymmetric deviation that grows with C-rate, standing
// in for the behavior a plain 2RC misses at high current.
Nonlinearity quadratic_nonlinearity(double k);

struct SynthResult {
    std::vector<Trajectory> trajectories;           // one per mission, cycle = index + 1
    std::vector<std::vector<ecm::SimStep>> truth;   // ground-truth trace per mission
    std::size_t clamp_events = 0;
};

// voltage = simulate(truth) + nonlinearity(current) + gaussian(0, noise_std_v).
// soc carries across missions; polarization resets at each mission start.
// Bit-identical for a fixed seed.
SynthResult synthesize(const MissionProfile& profile, const ecm::EcmParams& truth,
                       const Nonlinearity& nonlinearity, double noise_std_v,
                       std::size_t n_missions, std::uint64_t seed,
                       double initial_soc = 1.0);

// Canonical fixture schema: time_s,current_a,voltage_v,temp_c,soc,cycle with
// full round-trip float formatting.
void write_canonical_csv(const std::filesystem::path& path,
                         std::span<const Trajectory> trajectories);
std::vector<Trajectory> read_canonical_csv(const std::filesystem::path& path);

}  // namespace evolt::data
