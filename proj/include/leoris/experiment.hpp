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
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "leoris/beamforming.hpp"
#include "leoris/channel.hpp"
#include "leoris/config.hpp"
#include "leoris/errors.hpp"
#include "leoris/fim.hpp"
#include "leoris/geometry.hpp"
#include "leoris/random.hpp"

namespace leoris {

// Sub-stream identifiers for seed derivation.
namespace stream {
inline constexpr std::uint64_t kGains = 1;
inline constexpr std::uint64_t kPrecoders = 100;
inline constexpr std::uint64_t kRandomProfile = 10000;
} // namespace stream

/// Everything needed to evaluate PEBs for one scenario instance and seed.
struct Problem {
    Scenario scenario;
    SignalConfig signal; // precoders of satellite 0; each model carries its own
    std::vector<SatelliteModel> models;
    std::uint64_t seed = 0;
};

inline SignalConfig signal_config_for(const SignalSpec& spec, int sat_elements, std::uint64_t seed,
                                      std::size_t sat_index)
{
    return make_signal_config(spec.transmissions, spec.subcarriers, spec.carrier_hz, spec.bandwidth_hz,
                              spec.period_s, spec.tx_power_w, spec.noise_var_w, sat_elements,
                              derive_seed(seed, stream::kPrecoders + sat_index));
}

inline Problem build_problem(const ExperimentConfig& cfg, std::uint64_t seed)
{
    Problem p;
    p.seed = seed;
    p.scenario = build_scenario(cfg.scenario, cfg.signal.clock_offset_s);
    const int sat_elements = cfg.scenario.satellite_array.nx * cfg.scenario.satellite_array.ny;
    const std::uint64_t gain_seed = derive_seed(seed, stream::kGains);
    for (std::size_t k = 0; k < p.scenario.satellites.size(); ++k) {
        const SignalConfig sig = signal_config_for(cfg.signal, sat_elements, seed, k);
        if (k == 0)
            p.signal = sig;
        p.models.push_back(build_satellite_model(p.scenario, sig, k, gain_seed));
    }
    return p;
}

struct ProfileSet {
    std::vector<CVec> profiles;
    double objective_peb = std::numeric_limits<double>::quiet_NaN(); // proposed scheme only
};

/// RIS profiles for one scheme. Directional and proposed designs steer toward
/// the reference satellite; the proposed search starts from directional
/// profiles and refines one RIS at a time against that satellite's PEB.
inline ProfileSet design_profiles(const Problem& problem, const ExperimentConfig& cfg, Scheme scheme)
{
    const Scenario& scn = problem.scenario;
    const std::size_t ref = cfg.scenario.bs_mode ? 0 : cfg.beamforming.reference_satellite;
    const SatelliteModel& ref_model = problem.models.at(ref);
    const double fc = cfg.signal.carrier_hz;
    ProfileSet out;

    if (cfg.beamforming.zero_profile) {
        for (const auto& ris : scn.rises)
            out.profiles.push_back(CVec::Zero(ris.array.nx * ris.array.ny));
        return out;
    }
    if (scheme == Scheme::Random) {
        for (std::size_t l = 0; l < scn.rises.size(); ++l) {
            const auto& dims = scn.rises[l].array;
            out.profiles.push_back(
                random_profile(dims.nx * dims.ny, derive_seed(problem.seed, stream::kRandomProfile + l)).values());
        }
        return out;
    }

    auto steering_angle = [&](std::size_t l) {
        AnglePair phi = ref_model.params.ris[l].aod_ris;
        phi.az += deg2rad(cfg.beamforming.ris_angle_error_deg[0]);
        phi.el += deg2rad(cfg.beamforming.ris_angle_error_deg[1]);
        return phi;
    };
    for (std::size_t l = 0; l < scn.rises.size(); ++l) {
        const auto& path = ref_model.params.ris[l];
        out.profiles.push_back(directional_profile(path.array, steering_angle(l), path.aoa_ris, fc).values());
    }
    if (scheme == Scheme::Directional)
        return out;

    const SatelliteModel own = single_satellite_view(ref_model, ref);
    const std::span<const SatelliteModel> objective(&own, 1);
    for (std::size_t l = 0; l < scn.rises.size(); ++l) {
        const auto& path = ref_model.params.ris[l];
        const SteeringBasis basis = steering_basis(path.array, steering_angle(l), path.aoa_ris, fc);
        const OptimizeResult r =
            optimize_profile(objective, out.profiles, problem.signal, l, basis, cfg.beamforming.grid);
        out.profiles[l] = r.profile.values();
        out.objective_peb = r.peb;
    }
    return out;
}

struct EvaluationRow {
    std::string sweep_var = "none";
    double sweep_value = 0.0;
    std::string scheme;
    int n_ris = 0;
    double peb_m = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
    std::string status = "ok";
    double wall_time_s = 0.0;
};

inline EvaluationRow evaluate_scheme(const Problem& problem, const ExperimentConfig& cfg, Scheme scheme)
{
    const auto start = std::chrono::steady_clock::now();
    EvaluationRow row;
    row.scheme = to_string(scheme);
    row.n_ris = static_cast<int>(problem.scenario.rises.size());
    row.seed = problem.seed;
    try {
        const ProfileSet set = design_profiles(problem, cfg, scheme);
        const PebResult r = evaluate_peb(problem.models, set.profiles, problem.signal);
        row.peb_m = r.peb;
        if (!r.identifiable)
            row.status = std::string(to_string(ErrorCode::SingularFim));
    } catch (const Error& e) {
        row.status = std::string(to_string(e.code()));
    }
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

/// Single evaluation of the configured scheme. Throws SingularFim when the
/// scenario is not identifiable.
inline EvaluationRow run_evaluate(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Problem problem = build_problem(cfg, cfg.beamforming.seed);
    EvaluationRow row = evaluate_scheme(problem, cfg, cfg.beamforming.scheme);
    if (row.status == to_string(ErrorCode::SingularFim))
        throw Error(ErrorCode::SingularFim, "location FIM is not invertible for this scenario and profile");
    if (row.status != "ok")
        throw Error(ErrorCode::ValidationError, "evaluation failed: " + row.status);
    return row;
}

struct SweepResult {
    std::vector<EvaluationRow> rows;
    std::string provenance; // written as a '#' comment line when non-empty
};

struct SweepPoint {
    ExperimentConfig cfg;
    std::string sweep_var;
    double value = 0.0;
    std::uint64_t seed = 0;
};

/// Enumerates sweep points in output order. Seeds are (seed_base + replicate)
/// XOR point index, where the point index counts (RIS count, value) pairs.
inline std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg)
{
    std::vector<SweepPoint> points;
    const auto& sw = cfg.sweep;
    std::uint64_t index = 0;
    for (int n_ris : sw.ris_counts) {
        for (int value : sw.values) {
            ExperimentConfig point = cfg;
            point.scenario.ris_count = n_ris;
            if (sw.variable == SweepVariable::RisSize)
                point.scenario.ris_array = {value, value};
            else
                point.scenario.satellite_count = value;
            for (int r = 0; r < sw.replicates; ++r) {
                const std::uint64_t seed = (cfg.beamforming.seed + static_cast<std::uint64_t>(r)) ^ index;
                points.push_back({point, to_string(sw.variable), static_cast<double>(value), seed});
                if (sw.include_bs && sw.variable == SweepVariable::SatelliteCount) {
                    ExperimentConfig bs = point;
                    bs.scenario.bs_mode = true;
                    points.push_back({bs, "satellite_count_bs", static_cast<double>(value), seed});
                }
            }
            ++index;
        }
    }
    return points;
}

/// Runs `count` jobs on a worker pool; results are indexed, so completion
/// order never affects output order.
inline void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& job)
{
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count && !failed; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    if (!failed.exchange(true))
                        failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

inline std::string provenance_line(const ExperimentConfig& cfg)
{
    // FNV-1a over the canonical config dump
    const std::string dump = config_to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
#ifdef LEORIS_VERSION
    const char* version = LEORIS_VERSION;
#else
    const char* version = "dev";
#endif
    return std::string("leoris version=") + version + " config_hash=" + hex +
           " seed_base=" + std::to_string(cfg.beamforming.seed);
}

inline SweepResult run_sweep(const ExperimentConfig& cfg, unsigned workers = std::thread::hardware_concurrency())
{
    cfg.validate();
    const auto points = sweep_points(cfg);
    const std::size_t schemes = cfg.sweep.schemes.size();
    SweepResult result;
    result.provenance = provenance_line(cfg);
    result.rows.resize(points.size() * schemes);
    parallel_for(points.size(), workers, [&](std::size_t i) {
        const SweepPoint& pt = points[i];
        std::vector<EvaluationRow> rows;
        try {
            const Problem problem = build_problem(pt.cfg, pt.seed);
            for (Scheme s : cfg.sweep.schemes)
                rows.push_back(evaluate_scheme(problem, pt.cfg, s));
        } catch (const Error& e) {
            rows.clear();
            for (Scheme s : cfg.sweep.schemes) {
                EvaluationRow row;
                row.scheme = to_string(s);
                row.n_ris = pt.cfg.scenario.ris_count;
                row.seed = pt.seed;
                row.status = std::string(to_string(e.code()));
                rows.push_back(row);
            }
        }
        for (std::size_t s = 0; s < schemes; ++s) {
            rows[s].sweep_var = pt.sweep_var;
            rows[s].sweep_value = pt.value;
            result.rows[i * schemes + s] = rows[s];
        }
    });
    return result;
}

struct OptimizeReport {
    std::vector<CVec> profiles;
    double peb_m = 0.0;
};

/// Proposed design for the configured scenario, returned with the resulting PEB.
inline OptimizeReport run_optimize(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Problem problem = build_problem(cfg, cfg.beamforming.seed);
    ExperimentConfig proposed = cfg;
    proposed.beamforming.zero_profile = false;
    const ProfileSet set = design_profiles(problem, proposed, Scheme::Proposed);
    const PebResult r = evaluate_peb(problem.models, set.profiles, problem.signal);
    if (!r.identifiable)
        throw Error(ErrorCode::SingularFim, "location FIM is not invertible for the optimised profiles");
    return {set.profiles, r.peb};
}

} // namespace leoris
