#include "evolt/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "evolt/errors.hpp"
#include "evolt/rng.hpp"

namespace evolt::data {

void SplitSpec::validate() const {
    if (train.empty()) throw ConfigError("split has no training cells");
    if (test.empty()) throw ConfigError("split has no test cells");
    std::set<std::string> train_cells;
    for (const auto& e : train) {
        if (e.cycles.empty()) throw ConfigError("split entry '" + e.cell + "' lists no cycles");
        train_cells.insert(e.cell);
    }
    for (const auto& e : test) {
        if (e.cycles.empty()) throw ConfigError("split entry '" + e.cell + "' lists no cycles");
        if (train_cells.count(e.cell))
            throw ConfigError("train and test cell sets overlap: " + e.cell);
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

struct RawRow {
    double t = 0.0, i = 0.0, v = 0.0, temp = 0.0;
    double soc = std::numeric_limits<double>::quiet_NaN();
    double dt = std::numeric_limits<double>::quiet_NaN();
    long long cycle = 1;
    std::size_t line = 0;
};

std::size_t resolve_column(const std::vector<std::string>& header, const std::string& name,
                           const std::filesystem::path& path) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw DataError("column '" + name + "' not found in " + path.string());
}

std::vector<RawRow> parse_file(const std::filesystem::path& path, const ColumnMap& map,
                               std::size_t& dropped) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty data file: " + path.string());
    const auto header = split_line(line);

    const std::size_t c_time = resolve_column(header, map.time.name, path);
    const std::size_t c_curr = resolve_column(header, map.current.name, path);
    const std::size_t c_volt = resolve_column(header, map.voltage.name, path);
    const std::size_t c_temp = resolve_column(header, map.temp.name, path);
    const std::size_t c_soc =
        map.soc ? resolve_column(header, map.soc->name, path) : std::size_t(-1);
    const std::size_t c_cycle =
        map.cycle ? resolve_column(header, map.cycle->name, path) : std::size_t(-1);
    const std::size_t c_dt = map.dt ? resolve_column(header, map.dt->name, path) : std::size_t(-1);

    std::vector<RawRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) {
            ++dropped;
            continue;
        }
        RawRow r;
        r.line = line_no;
        double cyc = 1.0;
        bool ok = parse_double(cells[c_time], r.t) && parse_double(cells[c_curr], r.i) &&
                  parse_double(cells[c_volt], r.v) && parse_double(cells[c_temp], r.temp);
        if (ok && c_soc != std::size_t(-1)) ok = parse_double(cells[c_soc], r.soc);
        if (ok && c_cycle != std::size_t(-1)) ok = parse_double(cells[c_cycle], cyc);
        if (ok && c_dt != std::size_t(-1)) ok = parse_double(cells[c_dt], r.dt);
        if (!ok) {
            ++dropped;
            continue;
        }
        r.t *= map.time.scale;
        r.i *= map.current.scale * map.current_sign;
        r.v *= map.voltage.scale;
        r.temp *= map.temp.scale;
        if (c_soc != std::size_t(-1)) r.soc *= map.soc->scale;
        if (c_dt != std::size_t(-1)) r.dt *= map.dt->scale;
        r.cycle = std::llround(cyc);
        rows.push_back(r);
    }
    return rows;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Trajectory build_trajectory(const std::string& cell, long long cycle,
                            std::span<const RawRow> rows, const ColumnMap& map,
                            const IngestOptions& opts, const std::filesystem::path& path) {
    Trajectory traj;
    traj.cell = cell;
    traj.cycle = static_cast<int>(cycle);

    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!(rows[i].t > rows[i - 1].t))
            throw DataError("non-monotonic time in " + path.string() + " cycle " +
                            std::to_string(cycle) + " at row " + std::to_string(rows[i].line));
    }

    std::vector<double> dt(rows.size());
    if (map.dt) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!(rows[i].dt > 0.0))
                throw DataError("non-positive dt in " + path.string() + " at row " +
                                std::to_string(rows[i].line));
            dt[i] = rows[i].dt;
        }
    } else {
        std::vector<double> diffs;
        diffs.reserve(rows.size());
        for (std::size_t i = 1; i < rows.size(); ++i) diffs.push_back(rows[i].t - rows[i - 1].t);
        for (std::size_t i = 1; i < rows.size(); ++i) dt[i] = diffs[i - 1];
        if (opts.initial_dt_s > 0.0) {
            dt[0] = opts.initial_dt_s;
        } else if (!diffs.empty()) {
            dt[0] = median(diffs);
        } else {
            throw DataError("cannot derive dt for single-row cycle " + std::to_string(cycle) +
                            " in " + path.string() + " (set data.initial_dt_s)");
        }
    }

    const bool coulomb = opts.soc_source == SocSource::coulomb;
    double soc = opts.initial_soc;
    traj.samples.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        features::Sample s;
        s.t_s = rows[i].t;
        s.dt_s = dt[i];
        s.current_a = rows[i].i;
        s.voltage_v = rows[i].v;
        s.temp_c = rows[i].temp;
        s.cycle = static_cast<int>(cycle);
        if (coulomb) {
            soc = ecm::update_soc(soc, s.current_a, s.dt_s, opts.capacity_ah);
            s.soc = soc;
        } else {
            s.soc = rows[i].soc;
        }
        try {
            s.validate();
        } catch (const InvalidInput& e) {
            throw DataError(path.string() + " row " + std::to_string(rows[i].line) + ": " +
                            e.what());
        }
        traj.samples.push_back(s);
    }
    return traj;
}

std::vector<Trajectory> ingest_cell(const std::filesystem::path& dir, const CellCycles& entry,
                                    const ColumnMap& map, const IngestOptions& opts,
                                    std::size_t& dropped) {
    const auto path = dir / (entry.cell + ".csv");
    const auto rows = parse_file(path, map, dropped);

    std::map<long long, std::vector<RawRow>> by_cycle;
    for (const auto& r : rows) by_cycle[r.cycle].push_back(r);
    if (by_cycle.empty()) throw DataError("no usable rows in " + path.string());

    std::vector<Trajectory> out;
    for (int want : entry.cycles) {
        auto it = by_cycle.find(want);
        if (it == by_cycle.end()) {
            if (!opts.nearest_cycle_fallback) {
                throw DataError("cycle " + std::to_string(want) + " not present in " +
                                path.string() + " (available " +
                                std::to_string(by_cycle.begin()->first) + ".." +
                                std::to_string(by_cycle.rbegin()->first) +
                                "; set data.nearest_cycle_fallback to substitute)");
            }
            long long best = by_cycle.begin()->first;
            long long best_d = std::llabs(best - want);
            for (const auto& [c, _] : by_cycle) {
                const long long d = std::llabs(c - want);
                if (d < best_d || (d == best_d && c < best)) {
                    best = c;
                    best_d = d;
                }
            }
            it = by_cycle.find(best);
        }
        out.push_back(build_trajectory(entry.cell, it->first, it->second, map, opts, path));
    }
    return out;
}

}  // namespace

IngestResult ingest(const std::filesystem::path& dir, const ColumnMap& map,
                    const SplitSpec& split, const IngestOptions& opts) {
    split.validate();
    if (opts.soc_source == SocSource::column && !map.soc)
        throw ConfigError("soc source is 'column' but no soc column is mapped");
    if (opts.soc_source == SocSource::coulomb && !(opts.capacity_ah > 0.0))
        throw ConfigError("coulomb counting requires a positive capacity_ah");

    IngestResult out;
    for (const auto& entry : split.train) {
        auto trajs = ingest_cell(dir, entry, map, opts, out.dropped_rows);
        for (auto& t : trajs) out.train.push_back(std::move(t));
    }
    for (const auto& entry : split.test) {
        auto trajs = ingest_cell(dir, entry, map, opts, out.dropped_rows);
        for (auto& t : trajs) out.test.push_back(std::move(t));
    }
    return out;
}

void MissionProfile::validate() const {
    for (const Phase* p : {&takeoff, &cruise, &landing}) {
        if (!(p->duration_s > 0.0)) throw ConfigError("mission phase durations must be > 0");
        if (!std::isfinite(p->current_a)) throw ConfigError("mission phase current must be finite");
    }
    if (!(rest_s > 0.0)) throw ConfigError("mission rest duration must be > 0");
    if (!(power_reduction >= 0.0 && power_reduction < 1.0))
        throw ConfigError("power_reduction must be in [0, 1)");
    if (!(dt_s > 0.0)) throw ConfigError("mission dt_s must be > 0");
    if (!(dt_jitter >= 0.0 && dt_jitter < 0.5))
        throw ConfigError("dt_jitter must be in [0, 0.5)");
    if (!std::isfinite(ambient_temp_c) || !(temp_rise_c_per_a >= 0.0))
        throw ConfigError("mission temperature settings invalid");
}

Nonlinearity quadratic_nonlinearity(double k) {
    return [k](double i) { return k * i * std::fabs(i); };
}

SynthResult synthesize(const MissionProfile& profile, const ecm::EcmParams& truth,
                       const Nonlinearity& nonlinearity, double noise_std_v,
                       std::size_t n_missions, std::uint64_t seed, double initial_soc) {
    profile.validate();
    truth.validate();
    if (n_missions == 0) throw InvalidInput("synthesize: n_missions must be >= 1");
    if (!(noise_std_v >= 0.0)) throw InvalidInput("synthesize: noise_std_v must be >= 0");
    if (!(initial_soc >= 0.0 && initial_soc <= 1.0))
        throw InvalidInput("synthesize: initial_soc must be in [0, 1]");

    const double derate = 1.0 - profile.power_reduction;
    const std::array<Phase, 4> phases = {
        Phase{profile.takeoff.current_a * derate, profile.takeoff.duration_s},
        Phase{profile.cruise.current_a * derate, profile.cruise.duration_s},
        Phase{profile.landing.current_a * derate, profile.landing.duration_s},
        Phase{0.0, profile.rest_s},
    };

    std::mt19937_64 gen(rng::splitmix64(seed));
    SynthResult out;
    out.trajectories.reserve(n_missions);
    out.truth.reserve(n_missions);

    double soc = initial_soc;
    double t_global = 0.0;
    for (std::size_t m = 0; m < n_missions; ++m) {
        std::vector<ecm::ProfileStep> steps;
        for (const auto& ph : phases) {
            const auto n = static_cast<std::size_t>(
                std::max<long long>(1, std::llround(ph.duration_s / profile.dt_s)));
            for (std::size_t i = 0; i < n; ++i) {
                const double jitter = profile.dt_jitter * (2.0 * rng::uniform01(gen) - 1.0);
                steps.push_back({profile.dt_s * (1.0 + jitter), ph.current_a});
            }
        }

        Trajectory traj;
        traj.cell = "synthetic";
        traj.cycle = static_cast<int>(m + 1);
        traj.init_state = ecm::EcmState{{0.0, 0.0}, soc};

        auto sim = ecm::simulate(truth, traj.init_state, steps);
        out.clamp_events += sim.clamp_events;

        traj.samples.reserve(steps.size());
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const double current = steps[i].current_a;
            const double extra = nonlinearity ? nonlinearity(current) : 0.0;
            const double noise = noise_std_v * rng::gaussian(gen);
            t_global += steps[i].dt_s;

            features::Sample s;
            s.t_s = t_global;
            s.dt_s = steps[i].dt_s;
            s.current_a = current;
            s.voltage_v = sim.steps[i].v_phy + extra + noise;
            s.temp_c = profile.ambient_temp_c + profile.temp_rise_c_per_a * std::fabs(current);
            s.soc = sim.steps[i].state.soc;
            s.cycle = traj.cycle;
            traj.samples.push_back(s);
        }
        soc = sim.steps.back().state.soc;
        out.truth.push_back(std::move(sim.steps));
        out.trajectories.push_back(std::move(traj));
    }
    return out;
}

void write_canonical_csv(const std::filesystem::path& path,
                         std::span<const Trajectory> trajectories) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write fixture: " + path.string());
    out << "time_s,current_a,voltage_v,temp_c,soc,cycle\n";
    char buf[256];
    for (const auto& traj : trajectories) {
        for (const auto& s : traj.samples) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", s.t_s,
                          s.current_a, s.voltage_v, s.temp_c, s.soc, s.cycle);
            out << buf;
        }
    }
}

std::vector<Trajectory> read_canonical_csv(const std::filesystem::path& path) {
    ColumnMap map;
    map.time = {"time_s", 1.0};
    map.current = {"current_a", 1.0};
    map.voltage = {"voltage_v", 1.0};
    map.temp = {"temp_c", 1.0};
    map.soc = ColumnSpec{"soc", 1.0};
    map.cycle = ColumnSpec{"cycle", 1.0};

    std::size_t dropped = 0;
    const auto rows = parse_file(path, map, dropped);
    if (rows.empty()) throw DataError("no usable rows in " + path.string());

    IngestOptions opts;  // soc from column
    std::vector<Trajectory> out;
    const std::string cell = path.stem().string();

    std::map<long long, std::vector<RawRow>> by_cycle;
    for (const auto& r : rows) by_cycle[r.cycle].push_back(r);
    for (const auto& [cycle, cycle_rows] : by_cycle) {
        out.push_back(build_trajectory(cell, cycle, cycle_rows, map, opts, path));
    }
    return out;
}

}  // namespace evolt::data
