#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <string>
#include <vector>

#include "doctest.h"

#include "evolt/data.hpp"
#include "evolt/errors.hpp"

using namespace evolt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("evolt_data_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

data::ColumnMap basic_map() {
    data::ColumnMap map;
    map.time = {"t", 1.0};
    map.current = {"i", 1.0};
    map.voltage = {"v", 1.0};
    map.temp = {"temp", 1.0};
    map.soc = data::ColumnSpec{"soc", 1.0};
    map.cycle = data::ColumnSpec{"cyc", 1.0};
    return map;
}

data::SplitSpec basic_split() {
    data::SplitSpec split;
    split.train = {{"cellA", {1}}};
    split.test = {{"cellB", {1}}};
    return split;
}

ecm::EcmParams truth_params() {
    ecm::EcmParams p;
    p.r0_ohm = 0.02;
    p.branches = {ecm::RcBranch{0.01, 10.0}, ecm::RcBranch{0.02, 100.0}};
    p.capacity_ah = 36.0;
    p.ocv = ecm::OcvCurve{{{0.0, 3.0}, {0.3, 3.5}, {0.7, 3.8}, {1.0, 4.2}}};
    return p;
}

data::MissionProfile small_profile() {
    data::MissionProfile prof;
    prof.takeoff = {15.0, 20.0};
    prof.cruise = {5.0, 60.0};
    prof.landing = {15.0, 20.0};
    prof.rest_s = 40.0;
    prof.dt_s = 1.0;
    return prof;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("split disjointness is enforced") {
    data::SplitSpec split;
    split.train = {{"VAH05", {1, 50}}, {"VAH10", {1}}};
    split.test = {{"VAH05", {600}}};
    CHECK_THROWS_AS(split.validate(), ConfigError);

    split.test = {{"VAH11", {600}}};
    CHECK_NOTHROW(split.validate());
}

TEST_CASE("ingest: two-row fixture derives dt and honors the configured initial dt") {
    TempDir dir;
    write_file(dir.path / "cellA.csv",
               "t,i,v,temp,soc,cyc\n"
               "0.0,1.0,3.9,25,0.9,1\n"
               "1.0,1.0,3.89,25,0.89,1\n");
    write_file(dir.path / "cellB.csv",
               "t,i,v,temp,soc,cyc\n"
               "0.0,1.0,3.9,25,0.9,1\n"
               "1.0,1.0,3.89,25,0.89,1\n");

    data::IngestOptions opts;
    opts.initial_dt_s = 0.25;
    const auto res = data::ingest(dir.path, basic_map(), basic_split(), opts);
    REQUIRE(res.train.size() == 1);
    REQUIRE(res.train[0].samples.size() == 2);
    CHECK(res.train[0].samples[0].dt_s == 0.25);
    CHECK(res.train[0].samples[1].dt_s == 1.0);
    CHECK(res.dropped_rows == 0);

    // without a configured initial dt the cycle median is used
    const auto res2 = data::ingest(dir.path, basic_map(), basic_split());
    CHECK(res2.train[0].samples[0].dt_s == 1.0);
}

TEST_CASE("ingest: non-finite rows are dropped and counted") {
    TempDir dir;
    write_file(dir.path / "cellA.csv",
               "t,i,v,temp,soc,cyc\n"
               "0.0,1.0,3.9,25,0.9,1\n"
               "1.0,1.0,nan,25,0.89,1\n"
               "2.0,1.0,3.88,25,0.88,1\n");
    write_file(dir.path / "cellB.csv",
               "t,i,v,temp,soc,cyc\n"
               "0.0,1.0,3.9,25,0.9,1\n"
               "1.0,1.0,3.89,25,0.89,1\n");

    const auto res = data::ingest(dir.path, basic_map(), basic_split());
    CHECK(res.train[0].samples.size() == 2);
    CHECK(res.dropped_rows == 1);
}

TEST_CASE("ingest: missing column is a schema error naming it") {
    TempDir dir;
    write_file(dir.path / "cellA.csv", "t,i,temp,soc,cyc\n0,1,25,0.9,1\n");
    write_file(dir.path / "cellB.csv", "t,i,temp,soc,cyc\n0,1,25,0.9,1\n");
    try {
        data::ingest(dir.path, basic_map(), basic_split());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("'v'") != std::string::npos);
    }
}

TEST_CASE("ingest: non-monotonic time is an error carrying the row") {
    TempDir dir;
    write_file(dir.path / "cellA.csv",
               "t,i,v,temp,soc,cyc\n"
               "0.0,1.0,3.9,25,0.9,1\n"
               "2.0,1.0,3.89,25,0.89,1\n"
               "1.5,1.0,3.88,25,0.88,1\n");
    write_file(dir.path / "cellB.csv",
               "t,i,v,temp,soc,cyc\n"
               "0.0,1.0,3.9,25,0.9,1\n"
               "1.0,1.0,3.89,25,0.89,1\n");
    try {
        data::ingest(dir.path, basic_map(), basic_split());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 4") != std::string::npos);
    }
}

TEST_CASE("ingest: unit scales and current sign are applied") {
    TempDir dir;
    write_file(dir.path / "cellA.csv",
               "t_ms,i_ma,v,temp,soc,cyc\n"
               "0,1000,3.9,25,0.9,1\n"
               "1000,2000,3.89,25,0.89,1\n");
    write_file(dir.path / "cellB.csv",
               "t_ms,i_ma,v,temp,soc,cyc\n"
               "0,1000,3.9,25,0.9,1\n"
               "1000,1000,3.89,25,0.89,1\n");

    data::ColumnMap map;
    map.time = {"t_ms", 0.001};
    map.current = {"i_ma", 0.001};
    map.voltage = {"v", 1.0};
    map.temp = {"temp", 1.0};
    map.soc = data::ColumnSpec{"soc", 1.0};
    map.cycle = data::ColumnSpec{"cyc", 1.0};
    map.current_sign = -1.0;  // source logs charge-positive

    const auto res = data::ingest(dir.path, map, basic_split());
    CHECK(res.train[0].samples[0].current_a == -1.0);
    CHECK(res.train[0].samples[1].current_a == -2.0);
    CHECK(res.train[0].samples[1].t_s == doctest::Approx(1.0));
}

TEST_CASE("ingest: cycle selection and nearest fallback") {
    TempDir dir;
    write_file(dir.path / "cellA.csv",
               "t,i,v,temp,soc,cyc\n"
               "0.0,1.0,3.9,25,0.9,1\n"
               "1.0,1.0,3.89,25,0.89,1\n"
               "0.0,1.0,3.8,25,0.8,7\n"
               "1.0,1.0,3.79,25,0.79,7\n");
    write_file(dir.path / "cellB.csv",
               "t,i,v,temp,soc,cyc\n"
               "0.0,1.0,3.9,25,0.9,1\n"
               "1.0,1.0,3.89,25,0.89,1\n");

    data::SplitSpec split;
    split.train = {{"cellA", {5}}};
    split.test = {{"cellB", {1}}};

    CHECK_THROWS_AS(data::ingest(dir.path, basic_map(), split), DataError);

    data::IngestOptions opts;
    opts.nearest_cycle_fallback = true;
    const auto res = data::ingest(dir.path, basic_map(), split, opts);
    REQUIRE(res.train.size() == 1);
    CHECK(res.train[0].cycle == 7);  // nearest available to 5 (|7-5| < |1-5|)
    CHECK(res.train[0].samples[0].voltage_v == 3.8);
}

TEST_CASE("ingest: coulomb counting path") {
    TempDir dir;
    write_file(dir.path / "cellA.csv",
               "t,i,v,temp,cyc\n"
               "0.0,3.0,3.9,25,1\n"
               "3600.0,3.0,3.8,25,1\n");
    write_file(dir.path / "cellB.csv",
               "t,i,v,temp,cyc\n"
               "0.0,3.0,3.9,25,1\n"
               "3600.0,3.0,3.8,25,1\n");

    data::ColumnMap map = basic_map();
    map.soc.reset();

    data::IngestOptions opts;
    opts.soc_source = data::SocSource::coulomb;
    opts.capacity_ah = 6.0;
    opts.initial_soc = 1.0;
    const auto res = data::ingest(dir.path, map, basic_split(), opts);
    // both rows use dt = 3600 (median fills the first): each row burns 0.5 soc
    CHECK(res.train[0].samples[0].soc == doctest::Approx(0.5));
    CHECK(res.train[0].samples[1].soc == doctest::Approx(0.0));

    // requesting column soc without a mapped column is a config error
    data::IngestOptions bad;
    bad.soc_source = data::SocSource::column;
    CHECK_THROWS_AS(data::ingest(dir.path, map, basic_split(), bad), ConfigError);
}

TEST_CASE("synthesize: degenerate generator equals the simulator exactly") {
    const auto truth = truth_params();
    const auto res = data::synthesize(small_profile(), truth, data::quadratic_nonlinearity(0.0),
                                      0.0, 3, 99);
    REQUIRE(res.trajectories.size() == 3);
    REQUIRE(res.truth.size() == 3);

    for (std::size_t m = 0; m < 3; ++m) {
        const auto& traj = res.trajectories[m];
        CHECK(traj.cycle == static_cast<int>(m + 1));
        std::vector<ecm::ProfileStep> steps;
        for (const auto& s : traj.samples) steps.push_back({s.dt_s, s.current_a});
        const auto sim = ecm::simulate(truth, traj.init_state, steps);
        for (std::size_t i = 0; i < steps.size(); ++i) {
            CHECK(traj.samples[i].voltage_v == sim.steps[i].v_phy);
            CHECK(traj.samples[i].soc == sim.steps[i].state.soc);
        }
    }

    // soc carries across missions
    CHECK(res.trajectories[1].init_state.soc ==
          res.trajectories[0].samples.back().soc);
}

TEST_CASE("synthesize: quadratic nonlinearity adds k*i*|i|") {
    const auto truth = truth_params();
    const auto base = data::synthesize(small_profile(), truth, data::quadratic_nonlinearity(0.0),
                                       0.0, 2, 7);
    const auto bent = data::synthesize(small_profile(), truth,
                                       data::quadratic_nonlinearity(0.0002), 0.0, 2, 7);
    for (std::size_t m = 0; m < 2; ++m) {
        for (std::size_t i = 0; i < base.trajectories[m].samples.size(); ++i) {
            const auto& s0 = base.trajectories[m].samples[i];
            const auto& s1 = bent.trajectories[m].samples[i];
            const double expected = 0.0002 * s0.current_a * std::fabs(s0.current_a);
            CHECK(s1.voltage_v - s0.voltage_v == doctest::Approx(expected).epsilon(1e-12));
            if (s0.current_a == 15.0) CHECK(expected == doctest::Approx(0.045));
        }
    }
}

TEST_CASE("synthesize: fixed seed reruns bit-identically") {
    const auto truth = truth_params();
    const auto a = data::synthesize(small_profile(), truth, data::quadratic_nonlinearity(2e-4),
                                    0.005, 2, 1234);
    const auto b = data::synthesize(small_profile(), truth, data::quadratic_nonlinearity(2e-4),
                                    0.005, 2, 1234);
    REQUIRE(a.trajectories.size() == b.trajectories.size());
    for (std::size_t m = 0; m < a.trajectories.size(); ++m) {
        const auto& ta = a.trajectories[m].samples;
        const auto& tb = b.trajectories[m].samples;
        REQUIRE(ta.size() == tb.size());
        for (std::size_t i = 0; i < ta.size(); ++i) {
            CHECK(ta[i].voltage_v == tb[i].voltage_v);
            CHECK(ta[i].dt_s == tb[i].dt_s);
            CHECK(ta[i].t_s == tb[i].t_s);
        }
    }
}

TEST_CASE("canonical csv round trip") {
    TempDir dir;
    const auto truth = truth_params();
    const auto synth = data::synthesize(small_profile(), truth,
                                        data::quadratic_nonlinearity(2e-4), 0.005, 2, 5);
    const auto path = dir.path / "fixture.csv";
    data::write_canonical_csv(path, synth.trajectories);
    const auto back = data::read_canonical_csv(path);

    REQUIRE(back.size() == synth.trajectories.size());
    for (std::size_t m = 0; m < back.size(); ++m) {
        const auto& orig = synth.trajectories[m].samples;
        const auto& rt = back[m].samples;
        REQUIRE(rt.size() == orig.size());
        for (std::size_t i = 0; i < rt.size(); ++i) {
            CHECK(rt[i].t_s == orig[i].t_s);  // %.17g round-trips doubles exactly
            CHECK(rt[i].current_a == orig[i].current_a);
            CHECK(rt[i].voltage_v == orig[i].voltage_v);
            CHECK(rt[i].temp_c == orig[i].temp_c);
            CHECK(rt[i].soc == orig[i].soc);
            CHECK(rt[i].cycle == orig[i].cycle);
        }
    }

    // writing twice produces identical bytes
    const auto path2 = dir.path / "fixture2.csv";
    data::write_canonical_csv(path2, synth.trajectories);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
}

TEST_CASE("mission profile validation") {
    auto prof = small_profile();
    prof.cruise.duration_s = 0.0;
    CHECK_THROWS_AS(prof.validate(), ConfigError);
    prof = small_profile();
    prof.power_reduction = 1.0;
    CHECK_THROWS_AS(prof.validate(), ConfigError);
    prof = small_profile();
    prof.power_reduction = 0.1;
    CHECK_NOTHROW(prof.validate());

    const auto truth = truth_params();
    const auto derated = data::synthesize(prof, truth, data::quadratic_nonlinearity(0.0), 0.0,
                                          1, 3);
    CHECK(derated.trajectories[0].samples[0].current_a == doctest::Approx(13.5));
}

}  // TEST_SUITE
