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

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "leoris/arrays.hpp"
#include "leoris/errors.hpp"
#include "leoris/geometry.hpp"
#include "leoris/random.hpp"

namespace leoris {

/// OFDM pilot configuration. Precoders are N_s x M (one column per
/// transmission), pilots are N x M.
struct SignalConfig {
    int transmissions = 128;        // M
    int subcarriers = 3300;         // N
    double carrier_hz = 12.7e9;     // f_c
    double subcarrier_spacing = 0;  // delta f
    double period_s = 10e-3;        // T
    double tx_power_w = 1.0;        // P
    double noise_var_w = 1.0;       // sigma^2
    CMat precoders;
    CMat pilots;

    double wavelength() const { return wavelength_of(carrier_hz); }

    void validate() const
    {
        if (transmissions < 1 || subcarriers < 1)
            throw Error(ErrorCode::ValidationError, "M and N must be at least 1");
        if (!(carrier_hz > 0.0) || !(subcarrier_spacing > 0.0) || !(period_s > 0.0))
            throw Error(ErrorCode::ValidationError, "carrier, spacing and period must be positive");
        if (!(tx_power_w > 0.0) || !(noise_var_w > 0.0))
            throw Error(ErrorCode::ValidationError, "power and noise variance must be positive");
        if (precoders.cols() != transmissions || precoders.rows() < 1)
            throw Error(ErrorCode::DimensionMismatch, "precoder matrix must be N_s x M");
        if (pilots.rows() != subcarriers || pilots.cols() != transmissions)
            throw Error(ErrorCode::DimensionMismatch, "pilot matrix must be N x M");
        const double target = 1.0 / static_cast<double>(precoders.rows());
        for (Eigen::Index i = 0; i < precoders.size(); ++i)
            if (std::abs(std::norm(precoders(i)) - target) > 1e-12)
                throw Error(ErrorCode::ValidationError, "precoder entries must satisfy |f|^2 = 1/N_s");
        for (Eigen::Index i = 0; i < pilots.size(); ++i)
            if (std::abs(std::abs(pilots(i)) - 1.0) > 1e-12)
                throw Error(ErrorCode::ValidationError, "pilot entries must be unit modulus");
    }
};

/// lambda / (4 pi d) * exp(j phase)
inline cplx fspl_gain(double distance, double wavelength, double phase)
{
    if (!(distance > 0.0))
        throw Error(ErrorCode::ZeroDistance, "free-space gain needs a positive distance");
    return std::polar(wavelength / (4.0 * std::numbers::pi * distance), phase);
}

/// Analog precoders with entries exp(j phi) / sqrt(N_s), one column per transmission.
inline CMat random_precoders(int transmissions, int n_elements, std::uint64_t seed)
{
    if (transmissions < 1 || n_elements < 1)
        throw Error(ErrorCode::InvalidDimension, "precoder dimensions must be positive");
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_elements));
    CMat out(n_elements, transmissions);
    for (int m = 0; m < transmissions; ++m)
        for (int i = 0; i < n_elements; ++i)
            out(i, m) = std::polar(scale, rng.phase());
    return out;
}

/// Signal configuration with bandwidth-derived spacing, seeded random
/// precoders and all-ones pilots.
inline SignalConfig make_signal_config(int transmissions, int subcarriers, double carrier_hz,
                                       double bandwidth_hz, double period_s, double tx_power_w,
                                       double noise_var_w, int sat_elements,
                                       std::uint64_t precoder_seed)
{
    if (!(bandwidth_hz > 0.0))
        throw Error(ErrorCode::ValidationError, "bandwidth must be positive");
    if (transmissions < 1 || subcarriers < 1)
        throw Error(ErrorCode::ValidationError, "M and N must be at least 1");
    SignalConfig cfg;
    cfg.transmissions = transmissions;
    cfg.subcarriers = subcarriers;
    cfg.carrier_hz = carrier_hz;
    cfg.subcarrier_spacing = bandwidth_hz / subcarriers;
    cfg.period_s = period_s;
    cfg.tx_power_w = tx_power_w;
    cfg.noise_var_w = noise_var_w;
    cfg.precoders = random_precoders(transmissions, sat_elements, precoder_seed);
    cfg.pilots = CMat::Ones(subcarriers, transmissions);
    cfg.validate();
    return cfg;
}

struct LosPath {
    double delay = 0.0;  // tau_su, includes the clock offset
    AnglePair aod;       // theta_su, satellite body frame
    double doppler = 0.0; // nu_su
    cplx gain;           // alpha_su
};

struct RisPath {
    double delay = 0.0;  // tau_sru, includes the clock offset
    AnglePair aod_ris;   // phi_ru, RIS body frame
    cplx gain;           // alpha_sru = alpha_sr * alpha_ru
    // known side information
    AnglePair aod_sat;    // theta_sr
    AnglePair aoa_ris;    // phi_sr
    double doppler = 0.0; // nu_sr
    UpaGeometry array;
};

/// Channel-domain parameters of one satellite. Unknowns are ordered
/// [tau_su, theta_az, theta_el, nu_su, Re a_su, Im a_su] followed by
/// [tau_sru, phi_az, phi_el, Re a_sru, Im a_sru] per RIS.
struct PathParams {
    UpaGeometry sat_array;
    LosPath los;
    std::vector<RisPath> ris;

    static constexpr Eigen::Index kLosSize = 6;
    static constexpr Eigen::Index kRisSize = 5;

    Eigen::Index unknown_count() const
    {
        return kLosSize + kRisSize * static_cast<Eigen::Index>(ris.size());
    }

    Eigen::VectorXd unknowns() const
    {
        Eigen::VectorXd g(unknown_count());
        g.head<6>() << los.delay, los.aod.az, los.aod.el, los.doppler, los.gain.real(),
            los.gain.imag();
        for (std::size_t l = 0; l < ris.size(); ++l) {
            const auto& r = ris[l];
            g.segment<5>(kLosSize + kRisSize * static_cast<Eigen::Index>(l)) << r.delay,
                r.aod_ris.az, r.aod_ris.el, r.gain.real(), r.gain.imag();
        }
        return g;
    }

    void set_unknowns(const Eigen::VectorXd& g)
    {
        if (g.size() != unknown_count())
            throw Error(ErrorCode::DimensionMismatch, "unknown vector length mismatch");
        los.delay = g(0);
        los.aod = {g(1), g(2)};
        los.doppler = g(3);
        los.gain = {g(4), g(5)};
        for (std::size_t l = 0; l < ris.size(); ++l) {
            const Eigen::Index o = kLosSize + kRisSize * static_cast<Eigen::Index>(l);
            ris[l].delay = g(o);
            ris[l].aod_ris = {g(o + 1), g(o + 2)};
            ris[l].gain = {g(o + 3), g(o + 4)};
        }
    }
};

inline PathParams scenario_to_path_params(const Scenario& scn, const SignalConfig& cfg,
                                          std::size_t sat_index, std::uint64_t gain_seed)
{
    if (sat_index >= scn.satellites.size())
        throw Error(ErrorCode::IndexOutOfRange, "satellite index out of range");
    const Satellite& sat = scn.satellites[sat_index];
    const double lambda = cfg.wavelength();
    const Vec3& p_s = sat.pose.position;
    const Vec3& p_u = scn.ue_position;

    Rng rng(derive_seed(gain_seed, sat_index));

    PathParams out;
    out.sat_array = upa_coordinates(sat.array.nx, sat.array.ny, lambda);
    out.los.delay = path_delay(p_s, p_u, scn.clock_offset);
    out.los.aod = direction_angles(sat.pose, p_u);
    out.los.doppler = doppler_shift(sat.velocity, p_s, p_u, lambda);
    out.los.gain = fspl_gain((p_s - p_u).norm(), lambda, rng.phase());

    out.ris.reserve(scn.rises.size());
    for (const Ris& ris : scn.rises) {
        const Vec3& p_r = ris.pose.position;
        RisPath path;
        path.delay = path_delay(p_s, p_r, 0.0) + path_delay(p_r, p_u, scn.clock_offset);
        path.aod_ris = direction_angles(ris.pose, p_u);
        const double phase = rng.phase();
        path.gain = fspl_gain((p_s - p_r).norm(), lambda, phase) * fspl_gain((p_r - p_u).norm(), lambda, 0.0);
        path.aod_sat = direction_angles(sat.pose, p_r);
        path.aoa_ris = direction_angles(ris.pose, p_s);
        path.doppler = doppler_shift(sat.velocity, p_s, p_r, lambda);
        path.array = upa_coordinates(ris.array.nx, ris.array.ny, lambda);
        out.ris.push_back(std::move(path));
    }
    return out;
}

namespace detail {

// exp(j 2 pi x) with the integer part of x removed first.
inline cplx cycles_phasor(double x) { return std::polar(1.0, 2.0 * std::numbers::pi * (x - std::round(x))); }

} // namespace detail

/// Noise-free received sample mu_m[n]; m and n are 1-based as in the signal model.
inline cplx noiseless_signal(const PathParams& params, std::span<const CVec> profiles,
                             const SignalConfig& cfg, int m, int n)
{
    if (m < 1 || m > cfg.transmissions || n < 1 || n > cfg.subcarriers)
        throw Error(ErrorCode::IndexOutOfRange, "transmission or subcarrier index out of range");
    if (profiles.size() != params.ris.size())
        throw Error(ErrorCode::DimensionMismatch, "one RIS profile per RIS path required");
    const auto f_m = cfg.precoders.col(m - 1);
    if (f_m.size() != params.sat_array.size())
        throw Error(ErrorCode::DimensionMismatch, "precoder length differs from satellite array size");

    const double mt = m * cfg.period_s;
    const double nf = n * cfg.subcarrier_spacing;

    const CVec a_su = array_response(params.sat_array, params.los.aod, cfg.carrier_hz);
    cplx total = params.los.gain * detail::cycles_phasor(mt * params.los.doppler) *
                 detail::cycles_phasor(-nf * params.los.delay) * a_su.cwiseProduct(f_m).sum();

    for (std::size_t l = 0; l < params.ris.size(); ++l) {
        const RisPath& r = params.ris[l];
        if (profiles[l].size() != r.array.size())
            throw Error(ErrorCode::DimensionMismatch, "RIS profile length differs from RIS size");
        const auto cascade = ris_cascade_vector(r.array, r.aod_ris, r.aoa_ris, cfg.carrier_hz);
        const CVec a_sr = array_response(params.sat_array, r.aod_sat, cfg.carrier_hz);
        const cplx reflect = cascade.b.cwiseProduct(profiles[l]).sum();
        const cplx beam = a_sr.cwiseProduct(f_m).sum();
        total += r.gain * detail::cycles_phasor(mt * r.doppler) * detail::cycles_phasor(-nf * r.delay) *
                 reflect * beam;
    }
    return std::sqrt(cfg.tx_power_w) * total * cfg.pilots(n - 1, m - 1);
}

} // namespace leoris
