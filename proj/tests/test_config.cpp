// SPDX-License-Identifier: Apache-2.0
//
// leoris - position error bounds and RIS beamforming for LEO satellite localization
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>

#include <unistd.h>

#include <gtest/gtest.h>

#include "leoris/config.hpp"
#include "leoris/csv.hpp"
#include "leoris/experiment.hpp"
#include "support.hpp"

namespace {

using namespace leoris;
namespace fs = std::filesystem;

fs::path temp_path(const std::string& name)
{
    return fs::temp_directory_path() / ("leoris_test_" + std::to_string(::getpid()) + "_" + name);
}

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::ValidationError;
}

TEST(Config, EmptyBlocksGiveReferenceSetup)
{
    const ExperimentConfig cfg = parse_config_text(R"({"scenario": {}, "signal": {}})");
    EXPECT_EQ(cfg.scenario.satellite_origin_km, Vec3(-100, 100, 550));
    EXPECT_EQ(cfg.scenario.satellite_velocity_kmps, Vec3(5.5, 5.5, 0));
    EXPECT_EQ(cfg.signal.transmissions, 128);
    EXPECT_EQ(cfg.signal.subcarriers, 3300);
    EXPECT_EQ(cfg.signal.carrier_hz, 12.7e9);
    EXPECT_EQ(cfg.signal.bandwidth_hz, 240e6);
    EXPECT_EQ(cfg.signal.period_s, 10e-3);
    EXPECT_EQ(cfg.signal.clock_offset_s, 100e-9);
    EXPECT_EQ(cfg.scenario.ris_origin_m, Vec3(60, 10, 30));
    EXPECT_EQ(cfg.scenario.ris_offset_m, Vec3(0, 20, 0));
    EXPECT_EQ(cfg.beamforming.scheme, Scheme::Proposed);
}

TEST(Config, SatellitePlacementFollowsOffsets)
{
    const ExperimentConfig cfg = parse_config_text(R"({"scenario": {"satellite_count": 3}})");
    const Scenario scn = build_scenario(cfg.scenario, 0.0);
    ASSERT_EQ(scn.satellites.size(), 3u);
    EXPECT_LT((scn.satellites[2].pose.position - Vec3(-160e3, 160e3, 540e3)).norm(), 1e-6);
    EXPECT_EQ(scn.satellites[2].velocity, Vec3(5.5e3, 5.5e3, 0));
    EXPECT_LT((scn.rises[1].pose.position - Vec3(60, 30, 30)).norm(), 1e-12);
}

TEST(Config, BaseStationModeSwapsOnlyTheAnchor)
{
    ExperimentConfig cfg = fixtures::default_config(2, 10, 5);
    cfg.scenario.bs_mode = true;
    const Scenario scn = build_scenario(cfg.scenario, 0.0);
    ASSERT_EQ(scn.satellites.size(), 1u);
    EXPECT_EQ(scn.satellites[0].velocity, Vec3::Zero());
    EXPECT_EQ(scn.satellites[0].pose.position, Vec3(-100, 100, 50));
    EXPECT_EQ(scn.rises.size(), 2u);

    auto a = config_to_json(fixtures::default_config());
    auto b = a;
    b["scenario"]["bs_mode"] = true;
    const auto patch = nlohmann::json::diff(a, b);
    ASSERT_EQ(patch.size(), 1u);
    EXPECT_EQ(patch[0]["path"], "/scenario/bs_mode");
}

TEST(Config, ValidationErrorsNameTheField)
{
    try {
        parse_config_text(R"({"signal": {"bandwidth_hz": -5}})");
        FAIL() << "expected ValidationError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ValidationError);
        EXPECT_NE(std::string(e.what()).find("bandwidth_hz"), std::string::npos);
    }
    EXPECT_EQ(code_of([] { parse_config_text(R"({"scenario": {"satellite_count": 0}})"); }),
              ErrorCode::ValidationError);
    EXPECT_EQ(code_of([] { parse_config_text(R"({"beamforming": {"scheme": "greedy"}})"); }),
              ErrorCode::ValidationError);
    EXPECT_EQ(code_of([] { parse_config_text(R"({"beamforming": {"reference_satellite": 3}})"); }),
              ErrorCode::ValidationError);
}

TEST(Config, ParseErrorsCarryLocation)
{
    try {
        parse_config_text("{\n  \"signal\": {\n    \"subcarriers\": 12,,\n  }\n}");
        FAIL() << "expected ParseError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    try {
        parse_config_text(R"({"signal": {"subcarier": 12}})");
        FAIL() << "expected ParseError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        EXPECT_NE(std::string(e.what()).find("signal.subcarier"), std::string::npos);
    }
    EXPECT_EQ(code_of([] { parse_config_text(R"({"scenario": {"ris_array": [3]}})"); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { parse_config_text(R"({"signal": {"period_s": "fast"}})"); }), ErrorCode::ParseError);
}

TEST(Config, GridAcceptsTextOrObject)
{
    const auto a = parse_config_text(R"({"beamforming": {"grid": "c1=1;mag=0,1;phases=2"}})");
    const auto b = parse_config_text(R"({"beamforming": {"grid": {"c1": [1], "magnitudes": [0, 1], "phases": 2}}})");
    EXPECT_EQ(a.beamforming.grid.c1_values, b.beamforming.grid.c1_values);
    EXPECT_EQ(a.beamforming.grid.magnitudes, b.beamforming.grid.magnitudes);
    EXPECT_EQ(a.beamforming.grid.phase_count, 2);
}

TEST(Config, RoundTripsThroughJson)
{
    ExperimentConfig cfg = fixtures::default_config(4, 7, 3);
    cfg.signal.noise_var_w = 2e-13;
    cfg.beamforming.scheme = Scheme::Directional;
    cfg.beamforming.ris_angle_error_deg[1] = 0.5;
    cfg.sweep.variable = SweepVariable::SatelliteCount;
    cfg.sweep.values = {1, 5};
    cfg.sweep.include_bs = true;
    const ExperimentConfig back = parse_config(config_to_json(cfg));
    EXPECT_EQ(config_to_json(back), config_to_json(cfg));
}

TEST(Config, LoadConfigReportsMissingFile)
{
    EXPECT_EQ(code_of([] { load_config("/nonexistent/leoris.json"); }), ErrorCode::IoError);
    const fs::path p = temp_path("cfg.json");
    std::ofstream(p) << R"({"signal": {"subcarriers": 64}})";
    EXPECT_EQ(load_config(p.string()).signal.subcarriers, 64);
    fs::remove(p);
}

TEST(Csv, HeaderOnlyForEmptyResult)
{
    std::ostringstream out;
    write_csv(SweepResult{}, out);
    EXPECT_EQ(out.str(), std::string(kCsvHeader) + "\n");
}

TEST(Csv, RowRoundTripsBitExactly)
{
    SweepResult r;
    r.provenance = "leoris version=test";
    EvaluationRow row;
    row.sweep_var = "ris_size";
    row.sweep_value = 15;
    row.scheme = "proposed";
    row.n_ris = 4;
    row.peb_m = 36.0773123;
    row.seed = 18446744073709551615ULL;
    r.rows.push_back(row);
    EvaluationRow bad = row;
    bad.peb_m = std::numeric_limits<double>::infinity();
    bad.status = "SingularFim";
    r.rows.push_back(bad);
    const fs::path p = temp_path("rows.csv");
    emit_csv(r, p.string());
    const SweepResult back = read_csv(p.string());
    fs::remove(p);
    ASSERT_EQ(back.rows.size(), 2u);
    EXPECT_EQ(back.provenance, r.provenance);
    EXPECT_EQ(back.rows[0].peb_m, 36.0773123);
    EXPECT_EQ(back.rows[0].seed, row.seed);
    EXPECT_EQ(format_row(back.rows[0]), format_row(row));
    EXPECT_TRUE(std::isinf(back.rows[1].peb_m));
    EXPECT_EQ(back.rows[1].status, "SingularFim");
}

TEST(Csv, NineSignificantDigitsAndErrors)
{
    EXPECT_EQ(format_real(1.0 / 3.0), "0.333333333");
    EXPECT_EQ(format_real(5819.4512345), "5819.45123");
    EXPECT_EQ(code_of([] { emit_csv(SweepResult{}, "/nonexistent/dir/out.csv"); }), ErrorCode::IoError);
}

TEST(Sweep, RisSizeGridRowCountAndSeeds)
{
    ExperimentConfig cfg = fixtures::default_config();
    const auto points = sweep_points(cfg);
    EXPECT_EQ(points.size() * cfg.sweep.schemes.size(), 36u);
    for (std::size_t i = 0; i < points.size(); ++i)
        EXPECT_EQ(points[i].seed, cfg.beamforming.seed ^ i);
    EXPECT_EQ(points[6].cfg.scenario.ris_count, 4);
    EXPECT_EQ(points[7].cfg.scenario.ris_array.nx, 10);
}

TEST(Sweep, ParallelMatchesSerialAndIsReproducible)
{
    ExperimentConfig cfg = fixtures::default_config();
    cfg.signal.transmissions = 16;
    cfg.signal.subcarriers = 200;
    cfg.sweep.values = {3, 5};
    cfg.sweep.ris_counts = {1, 2};
    cfg.beamforming.grid = parse_grid_spec("c1=1;mag=0,0.5;phases=2");
    auto csv = [&](unsigned workers) {
        std::ostringstream out;
        write_csv(run_sweep(cfg, workers), out);
        return out.str();
    };
    const std::string serial = csv(1);
    EXPECT_EQ(serial, csv(3));
    EXPECT_EQ(serial, csv(1));
    EXPECT_EQ(std::count(serial.begin(), serial.end(), '\n'), 2 + 2 * 2 * 3);
    EXPECT_EQ(serial.find('\r'), std::string::npos);
}

TEST(Sweep, FailingPointsAreReportedPerRow)
{
    ExperimentConfig cfg = fixtures::default_config();
    cfg.signal.transmissions = 8;
    cfg.signal.subcarriers = 64;
    cfg.sweep.values = {4};
    cfg.sweep.ris_counts = {1};
    cfg.beamforming.zero_profile = true;
    const SweepResult r = run_sweep(cfg, 1);
    ASSERT_EQ(r.rows.size(), 3u);
    for (const auto& row : r.rows)
        EXPECT_EQ(row.status, "SingularFim");
}

TEST(Evaluate, NoiseScalingAndDeterminism)
{
    ExperimentConfig cfg = fixtures::default_config(2, 5);
    cfg.beamforming.scheme = Scheme::Random;
    const EvaluationRow a = run_evaluate(cfg);
    EXPECT_EQ(run_evaluate(cfg).peb_m, a.peb_m);
    cfg.signal.noise_var_w *= 4.0;
    EXPECT_LT(fixtures::rel_diff(run_evaluate(cfg).peb_m, 2.0 * a.peb_m), 1e-10);
}

TEST(Evaluate, BaseStationBeatsSingleSatellite)
{
    ExperimentConfig leo = fixtures::default_config(2, 10);
    ExperimentConfig bs = leo;
    bs.scenario.bs_mode = true;
    const EvaluationRow a = run_evaluate(leo), b = run_evaluate(bs);
    EXPECT_TRUE(std::isfinite(b.peb_m));
    EXPECT_LT(b.peb_m, a.peb_m);
}

TEST(Evaluate, MutedRisSurfacesSingularFim)
{
    ExperimentConfig cfg = fixtures::default_config(1, 5);
    cfg.beamforming.zero_profile = true;
    EXPECT_EQ(code_of([&] { run_evaluate(cfg); }), ErrorCode::SingularFim);
}

TEST(Evaluate, MoreSatellitesHelp)
{
    ExperimentConfig one = fixtures::default_config(3, 10, 1);
    ExperimentConfig many = fixtures::default_config(3, 10, 17);
    one.beamforming.scheme = many.beamforming.scheme = Scheme::Directional;
    EXPECT_LT(run_evaluate(many).peb_m, run_evaluate(one).peb_m);
}

TEST(Optimize, ReportsProfilesWithUnitPeak)
{
    ExperimentConfig cfg = fixtures::default_config(2, 5);
    cfg.beamforming.grid = parse_grid_spec("c1=0.5,1;mag=0,0.25;phases=4");
    const OptimizeReport r = run_optimize(cfg);
    ASSERT_EQ(r.profiles.size(), 2u);
    for (const auto& w : r.profiles)
        EXPECT_EQ(w.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_GT(r.peb_m, 0.0);
}

} // namespace
