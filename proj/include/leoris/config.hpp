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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "leoris/beamforming.hpp"
#include "leoris/errors.hpp"
#include "leoris/geometry.hpp"

namespace leoris {

enum class Scheme { Random, Directional, Proposed };

inline std::string to_string(Scheme s)
{
    switch (s) {
    case Scheme::Random: return "random";
    case Scheme::Directional: return "directional";
    case Scheme::Proposed: return "proposed";
    }
    return "unknown";
}

inline Scheme parse_scheme(const std::string& name)
{
    if (name == "random")
        return Scheme::Random;
    if (name == "directional")
        return Scheme::Directional;
    if (name == "proposed")
        return Scheme::Proposed;
    throw Error(ErrorCode::ValidationError, "unknown scheme '" + name + "' (random|directional|proposed)");
}

enum class SweepVariable { RisSize, SatelliteCount };

inline std::string to_string(SweepVariable v)
{
    return v == SweepVariable::RisSize ? "ris_size" : "satellite_count";
}

/// Per-sample noise variance in W. Chosen so that random profiles with two
/// 5x5 RISs in the default scenario give a median PEB near 5.8 km over seeds
/// 1..5. PEB scales with sigma, so this single number pins the link budget.
inline constexpr double kDefaultNoiseVar = 9.25e-14;

struct ScenarioSpec {
    Vec3 ue_position_m = Vec3::Zero();
    Vec3 satellite_origin_km{-100.0, 100.0, 550.0};
    Vec3 satellite_offset_km{-30.0, 30.0, -5.0};
    Vec3 satellite_velocity_kmps{5.5, 5.5, 0.0};
    int satellite_count = 1;
    ArrayDims satellite_array{2, 2};
    Vec3 satellite_euler_deg{0.0, 0.0, 180.0};
    Vec3 ris_origin_m{60.0, 10.0, 30.0};
    Vec3 ris_offset_m{0.0, 20.0, 0.0};
    int ris_count = 2;
    ArrayDims ris_array{10, 10};
    Vec3 ris_euler_deg{0.0, -90.0, 0.0};
    bool bs_mode = false;
    Vec3 bs_position_m{-100.0, 100.0, 50.0};
    Vec3 bs_euler_deg{0.0, 90.0, 0.0};
};

struct SignalSpec {
    int transmissions = 128;
    int subcarriers = 3300;
    double carrier_hz = 12.7e9;
    double bandwidth_hz = 240e6;
    double period_s = 10e-3;
    double tx_power_w = 1.0;
    double noise_var_w = kDefaultNoiseVar;
    double clock_offset_s = 100e-9;
};

struct BeamformingSpec {
    Scheme scheme = Scheme::Proposed;
    GridSpec grid;
    std::uint64_t seed = 1;
    std::size_t reference_satellite = 0;
    double ris_angle_error_deg[2] = {0.0, 0.0}; // offset applied to phi_ru (az, el) before the search
    bool zero_profile = false;
};

struct SweepSpec {
    SweepVariable variable = SweepVariable::RisSize;
    std::vector<int> values{5, 10, 15, 20, 25, 30};
    std::vector<Scheme> schemes{Scheme::Random, Scheme::Directional, Scheme::Proposed};
    std::vector<int> ris_counts{2, 4};
    int replicates = 1;
    bool include_bs = false;
};

struct ExperimentConfig {
    ScenarioSpec scenario;
    SignalSpec signal;
    BeamformingSpec beamforming;
    SweepSpec sweep;

    void validate() const;
};

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

inline Mat3 rotation_from_euler_deg(const Vec3& ypr_deg)
{
    return rotation_from_euler(deg2rad(ypr_deg(0)), deg2rad(ypr_deg(1)), deg2rad(ypr_deg(2)));
}

/// Satellites at p_s0 + (k-1) d_s and RISs at p_r0 + (l-1) d_r; in BS mode the
/// constellation is replaced by one static terrestrial anchor.
inline Scenario build_scenario(const ScenarioSpec& spec, double clock_offset_s)
{
    Scenario scn;
    scn.ue_position = spec.ue_position_m;
    scn.clock_offset = clock_offset_s;
    if (spec.bs_mode) {
        Satellite bs;
        bs.pose = {spec.bs_position_m, rotation_from_euler_deg(spec.bs_euler_deg)};
        bs.velocity = Vec3::Zero();
        bs.array = spec.satellite_array;
        scn.satellites.push_back(bs);
    } else {
        const Mat3 orientation = rotation_from_euler_deg(spec.satellite_euler_deg);
        for (int k = 0; k < spec.satellite_count; ++k) {
            Satellite sat;
            sat.pose = {(spec.satellite_origin_km + k * spec.satellite_offset_km) * 1e3, orientation};
            sat.velocity = spec.satellite_velocity_kmps * 1e3;
            sat.array = spec.satellite_array;
            scn.satellites.push_back(sat);
        }
    }
    const Mat3 ris_orientation = rotation_from_euler_deg(spec.ris_euler_deg);
    for (int l = 0; l < spec.ris_count; ++l)
        scn.rises.push_back({{spec.ris_origin_m + l * spec.ris_offset_m, ris_orientation}, spec.ris_array});
    scn.validate();
    return scn;
}

inline void ExperimentConfig::validate() const
{
    auto require = [](bool ok, const std::string& what) {
        if (!ok)
            throw Error(ErrorCode::ValidationError, what);
    };
    const auto& s = scenario;
    require(s.satellite_count >= 1, "scenario.satellite_count must be >= 1");
    require(s.ris_count >= 0, "scenario.ris_count must be >= 0");
    require(s.satellite_array.nx >= 1 && s.satellite_array.ny >= 1, "scenario.satellite_array must be positive");
    require(s.ris_array.nx >= 1 && s.ris_array.ny >= 1, "scenario.ris_array must be positive");
    const auto& g = signal;
    require(g.transmissions >= 1, "signal.transmissions must be >= 1");
    require(g.subcarriers >= 1, "signal.subcarriers must be >= 1");
    require(g.carrier_hz > 0.0, "signal.carrier_hz must be positive");
    require(g.bandwidth_hz > 0.0, "signal.bandwidth_hz must be positive");
    require(g.period_s > 0.0, "signal.period_s must be positive");
    require(g.tx_power_w > 0.0, "signal.tx_power_w must be positive");
    require(g.noise_var_w > 0.0, "signal.noise_var_w must be positive");
    require(std::isfinite(g.clock_offset_s), "signal.clock_offset_s must be finite");
    const auto& b = beamforming;
    require(!b.grid.c1_values.empty() && !b.grid.magnitudes.empty() && b.grid.phase_count >= 1,
            "beamforming.grid must be non-empty");
    for (double c : b.grid.c1_values)
        require(c >= 0.0, "beamforming.grid.c1 values must be non-negative");
    for (double m : b.grid.magnitudes)
        require(m >= 0.0, "beamforming.grid.magnitudes must be non-negative");
    require(s.bs_mode || b.reference_satellite < static_cast<std::size_t>(s.satellite_count),
            "beamforming.reference_satellite out of range");
    require(!sweep.values.empty(), "sweep.values must be non-empty");
    for (int v : sweep.values)
        require(v >= 1, "sweep.values must be positive");
    require(!sweep.schemes.empty(), "sweep.schemes must be non-empty");
    require(!sweep.ris_counts.empty(), "sweep.ris_counts must be non-empty");
    for (int c : sweep.ris_counts)
        require(c >= 0, "sweep.ris_counts must be non-negative");
    require(sweep.replicates >= 1, "sweep.replicates must be >= 1");
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

class Reader {
public:
    Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object())
            throw Error(ErrorCode::ParseError, "'" + path_ + "' must be an object");
    }

    template <typename F>
    void field(const std::string& key, F&& assign)
    {
        seen_.push_back(key);
        const auto it = obj_.find(key);
        if (it == obj_.end() || it->is_null())
            return;
        try {
            assign(*it);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ParseError, "field '" + qualified(key) + "': " + e.what());
        }
    }

    void finish() const
    {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                throw Error(ErrorCode::ParseError, "unknown field '" + qualified(it.key()) + "'");
    }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& obj_;
    std::string path_;
    std::vector<std::string> seen_;
};

inline Vec3 vec3_from(const json& j)
{
    if (!j.is_array() || j.size() != 3)
        throw json::type_error::create(302, "expected an array of 3 numbers", &j);
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline ArrayDims dims_from(const json& j)
{
    if (!j.is_array() || j.size() != 2)
        throw json::type_error::create(302, "expected [nx, ny]", &j);
    return {j.at(0).get<int>(), j.at(1).get<int>()};
}

inline json to_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

} // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& root)
{
    using detail::json;
    ExperimentConfig cfg;
    detail::Reader top(root, "");

    top.field("scenario", [&](const json& j) {
        auto& s = cfg.scenario;
        detail::Reader r(j, "scenario");
        r.field("ue_position_m", [&](const json& v) { s.ue_position_m = detail::vec3_from(v); });
        r.field("satellite_origin_km", [&](const json& v) { s.satellite_origin_km = detail::vec3_from(v); });
        r.field("satellite_offset_km", [&](const json& v) { s.satellite_offset_km = detail::vec3_from(v); });
        r.field("satellite_velocity_kmps", [&](const json& v) { s.satellite_velocity_kmps = detail::vec3_from(v); });
        r.field("satellite_count", [&](const json& v) { s.satellite_count = v.get<int>(); });
        r.field("satellite_array", [&](const json& v) { s.satellite_array = detail::dims_from(v); });
        r.field("satellite_euler_deg", [&](const json& v) { s.satellite_euler_deg = detail::vec3_from(v); });
        r.field("ris_origin_m", [&](const json& v) { s.ris_origin_m = detail::vec3_from(v); });
        r.field("ris_offset_m", [&](const json& v) { s.ris_offset_m = detail::vec3_from(v); });
        r.field("ris_count", [&](const json& v) { s.ris_count = v.get<int>(); });
        r.field("ris_array", [&](const json& v) { s.ris_array = detail::dims_from(v); });
        r.field("ris_euler_deg", [&](const json& v) { s.ris_euler_deg = detail::vec3_from(v); });
        r.field("bs_mode", [&](const json& v) { s.bs_mode = v.get<bool>(); });
        r.field("bs_position_m", [&](const json& v) { s.bs_position_m = detail::vec3_from(v); });
        r.field("bs_euler_deg", [&](const json& v) { s.bs_euler_deg = detail::vec3_from(v); });
        r.finish();
    });

    top.field("signal", [&](const json& j) {
        auto& s = cfg.signal;
        detail::Reader r(j, "signal");
        r.field("transmissions", [&](const json& v) { s.transmissions = v.get<int>(); });
        r.field("subcarriers", [&](const json& v) { s.subcarriers = v.get<int>(); });
        r.field("carrier_hz", [&](const json& v) { s.carrier_hz = v.get<double>(); });
        r.field("bandwidth_hz", [&](const json& v) { s.bandwidth_hz = v.get<double>(); });
        r.field("period_s", [&](const json& v) { s.period_s = v.get<double>(); });
        r.field("tx_power_w", [&](const json& v) { s.tx_power_w = v.get<double>(); });
        r.field("noise_var_w", [&](const json& v) { s.noise_var_w = v.get<double>(); });
        r.field("clock_offset_s", [&](const json& v) { s.clock_offset_s = v.get<double>(); });
        r.finish();
    });

    top.field("beamforming", [&](const json& j) {
        auto& b = cfg.beamforming;
        detail::Reader r(j, "beamforming");
        r.field("scheme", [&](const json& v) { b.scheme = parse_scheme(v.get<std::string>()); });
        r.field("seed", [&](const json& v) { b.seed = v.get<std::uint64_t>(); });
        r.field("reference_satellite", [&](const json& v) { b.reference_satellite = v.get<std::size_t>(); });
        r.field("ris_angle_error_deg", [&](const json& v) {
            if (!v.is_array() || v.size() != 2)
                throw json::type_error::create(302, "expected [az, el]", &v);
            b.ris_angle_error_deg[0] = v.at(0).get<double>();
            b.ris_angle_error_deg[1] = v.at(1).get<double>();
        });
        r.field("zero_profile", [&](const json& v) { b.zero_profile = v.get<bool>(); });
        r.field("grid", [&](const json& v) {
            if (v.is_string()) {
                b.grid = parse_grid_spec(v.get<std::string>());
                return;
            }
            detail::Reader g(v, "beamforming.grid");
            g.field("c1", [&](const json& x) { b.grid.c1_values = x.get<std::vector<double>>(); });
            g.field("magnitudes", [&](const json& x) { b.grid.magnitudes = x.get<std::vector<double>>(); });
            g.field("phases", [&](const json& x) { b.grid.phase_count = x.get<int>(); });
            g.finish();
        });
        r.finish();
    });

    top.field("sweep", [&](const json& j) {
        auto& s = cfg.sweep;
        detail::Reader r(j, "sweep");
        r.field("variable", [&](const json& v) {
            const auto name = v.get<std::string>();
            if (name == "ris_size")
                s.variable = SweepVariable::RisSize;
            else if (name == "satellite_count")
                s.variable = SweepVariable::SatelliteCount;
            else
                throw Error(ErrorCode::ValidationError, "sweep.variable must be ris_size or satellite_count");
        });
        r.field("values", [&](const json& v) { s.values = v.get<std::vector<int>>(); });
        r.field("schemes", [&](const json& v) {
            s.schemes.clear();
            for (const auto& name : v.get<std::vector<std::string>>())
                s.schemes.push_back(parse_scheme(name));
        });
        r.field("ris_counts", [&](const json& v) { s.ris_counts = v.get<std::vector<int>>(); });
        r.field("replicates", [&](const json& v) { s.replicates = v.get<int>(); });
        r.field("include_bs", [&](const json& v) { s.include_bs = v.get<bool>(); });
        r.finish();
    });
    top.finish();

    cfg.validate();
    return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text)
{
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // byte offset -> line/column for the diagnostic
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
    }
    return parse_config(root);
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Canonical JSON form of a config; used for provenance hashing.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg)
{
    using detail::json;
    using detail::to_json;
    const auto& s = cfg.scenario;
    const auto& g = cfg.signal;
    const auto& b = cfg.beamforming;
    json schemes = json::array();
    for (auto sc : cfg.sweep.schemes)
        schemes.push_back(to_string(sc));
    return json{
        {"scenario",
         {{"ue_position_m", to_json(s.ue_position_m)},
          {"satellite_origin_km", to_json(s.satellite_origin_km)},
          {"satellite_offset_km", to_json(s.satellite_offset_km)},
          {"satellite_velocity_kmps", to_json(s.satellite_velocity_kmps)},
          {"satellite_count", s.satellite_count},
          {"satellite_array", {s.satellite_array.nx, s.satellite_array.ny}},
          {"satellite_euler_deg", to_json(s.satellite_euler_deg)},
          {"ris_origin_m", to_json(s.ris_origin_m)},
          {"ris_offset_m", to_json(s.ris_offset_m)},
          {"ris_count", s.ris_count},
          {"ris_array", {s.ris_array.nx, s.ris_array.ny}},
          {"ris_euler_deg", to_json(s.ris_euler_deg)},
          {"bs_mode", s.bs_mode},
          {"bs_position_m", to_json(s.bs_position_m)},
          {"bs_euler_deg", to_json(s.bs_euler_deg)}}},
        {"signal",
         {{"transmissions", g.transmissions},
          {"subcarriers", g.subcarriers},
          {"carrier_hz", g.carrier_hz},
          {"bandwidth_hz", g.bandwidth_hz},
          {"period_s", g.period_s},
          {"tx_power_w", g.tx_power_w},
          {"noise_var_w", g.noise_var_w},
          {"clock_offset_s", g.clock_offset_s}}},
        {"beamforming",
         {{"scheme", to_string(b.scheme)},
          {"seed", b.seed},
          {"reference_satellite", b.reference_satellite},
          {"ris_angle_error_deg", {b.ris_angle_error_deg[0], b.ris_angle_error_deg[1]}},
          {"zero_profile", b.zero_profile},
          {"grid", {{"c1", b.grid.c1_values}, {"magnitudes", b.grid.magnitudes}, {"phases", b.grid.phase_count}}}}},
        {"sweep",
         {{"variable", to_string(cfg.sweep.variable)},
          {"values", cfg.sweep.values},
          {"schemes", schemes},
          {"ris_counts", cfg.sweep.ris_counts},
          {"replicates", cfg.sweep.replicates},
          {"include_bs", cfg.sweep.include_bs}}},
    };
}

} // namespace leoris
