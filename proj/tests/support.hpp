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

// Shared fixtures for the unit, property and acceptance tests.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "leoris/beamforming.hpp"
#include "leoris/channel.hpp"
#include "leoris/config.hpp"
#include "leoris/experiment.hpp"
#include "leoris/fim.hpp"
#include "leoris/geometry.hpp"
#include "leoris/random.hpp"

namespace leoris::fixtures {

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); }

inline Vec3 random_vec(Rng& rng, double lo, double hi)
{
    return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

inline Mat3 random_rotation(Rng& rng)
{
    const double pi = std::numbers::pi;
    return rotation_from_euler(uniform(rng, -pi, pi), uniform(rng, -pi / 2, pi / 2), uniform(rng, -pi, pi));
}

/// Short-range scenario: anchor a few km away, RISs tens of metres from the
/// UE. Phases stay small enough for the finite-difference oracle.
inline Scenario local_scenario(std::uint64_t seed, int n_ris, ArrayDims ris_dims = {3, 3},
                               ArrayDims sat_dims = {2, 2})
{
    Rng rng(seed);
    Scenario scn;
    scn.ue_position = random_vec(rng, -5.0, 5.0);
    scn.clock_offset = uniform(rng, 0.0, 50e-9);
    Satellite sat;
    sat.pose = {scn.ue_position + Vec3(uniform(rng, -2e3, 2e3), uniform(rng, -2e3, 2e3), uniform(rng, 1e3, 3e3)),
                random_rotation(rng)};
    sat.velocity = random_vec(rng, -200.0, 200.0);
    sat.array = sat_dims;
    scn.satellites.push_back(sat);
    for (int l = 0; l < n_ris; ++l) {
        Ris ris;
        ris.pose = {scn.ue_position + Vec3(uniform(rng, 20.0, 60.0), uniform(rng, -40.0, 40.0), uniform(rng, 5.0, 30.0)),
                    random_rotation(rng)};
        ris.array = ris_dims;
        scn.rises.push_back(ris);
    }
    scn.validate();
    return scn;
}

inline SignalConfig small_signal(int m, int n, int sat_elements, std::uint64_t seed, double bandwidth_hz = 100e6)
{
    return make_signal_config(m, n, 12.7e9, bandwidth_hz, 1e-3, 1.0, 1.0, sat_elements, seed);
}

inline std::vector<CVec> random_profiles(const Scenario& scn, std::uint64_t seed)
{
    std::vector<CVec> out;
    for (std::size_t l = 0; l < scn.rises.size(); ++l) {
        const auto& a = scn.rises[l].array;
        out.push_back(random_profile(a.nx * a.ny, derive_seed(seed, l)).values());
    }
    return out;
}

/// Default experiment with the given RIS count/size and satellite count.
inline ExperimentConfig default_config(int n_ris = 2, int ris_side = 10, int satellites = 1)
{
    ExperimentConfig cfg;
    cfg.scenario.ris_count = n_ris;
    cfg.scenario.ris_array = {ris_side, ris_side};
    cfg.scenario.satellite_count = satellites;
    return cfg;
}

inline double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return (a - b).norm() / b.norm();
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace leoris::fixtures
