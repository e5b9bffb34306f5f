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
#include <array>
#include <cmath>
#include <numbers>
#include <span>

#include <Eigen/Dense>

#include "leoris/channel.hpp"
#include "leoris/errors.hpp"

namespace leoris {

/// Finite-difference steps per unknown kind, sized so the largest phase
/// excursion they cause stays around 1e-3 rad.
inline Eigen::VectorXd oracle_steps(const PathParams& params, const SignalConfig& cfg)
{
    const double two_pi = 2.0 * std::numbers::pi;
    const double delay_step = 1e-3 / (two_pi * cfg.subcarriers * cfg.subcarrier_spacing);
    const double doppler_step = 1e-3 / (two_pi * cfg.transmissions * cfg.period_s);
    const double angle_step = 1e-5;
    auto gain_step = [](cplx g) { return 1e-3 * std::max(std::abs(g), 1e-300); };

    Eigen::VectorXd h(params.unknown_count());
    h.head<6>() << delay_step, angle_step, angle_step, doppler_step, gain_step(params.los.gain),
        gain_step(params.los.gain);
    for (std::size_t l = 0; l < params.ris.size(); ++l) {
        const double g = gain_step(params.ris[l].gain);
        h.segment<5>(PathParams::kLosSize + PathParams::kRisSize * static_cast<Eigen::Index>(l)) << delay_step,
            angle_step, angle_step, g, g;
    }
    return h;
}

/// Reference FIM: materialises every dmu_m[n]/dgamma_i with a five-point
/// central stencil on noiseless_signal and sums Re{dmu dmu^H} literally.
/// Test oracle only; M*N is capped at 1e4.
inline Eigen::MatrixXd naive_fim_oracle(const PathParams& params, std::span<const CVec> profiles,
                                        const SignalConfig& cfg)
{
    if (static_cast<long long>(cfg.transmissions) * cfg.subcarriers > 10000)
        throw Error(ErrorCode::TooLarge, "naive oracle limited to M*N <= 1e4");
    const Eigen::Index dim = params.unknown_count();
    const Eigen::VectorXd gamma = params.unknowns();
    const Eigen::VectorXd steps = oracle_steps(params, cfg);

    // shifted copies: offsets -2h, -h, +h, +2h per unknown
    std::vector<std::array<PathParams, 4>> shifted(static_cast<std::size_t>(dim));
    constexpr std::array<double, 4> offsets{-2.0, -1.0, 1.0, 2.0};
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (std::size_t s = 0; s < 4; ++s) {
            PathParams p = params;
            Eigen::VectorXd g = gamma;
            g(i) += offsets[s] * steps(i);
            p.set_unknowns(g);
            shifted[static_cast<std::size_t>(i)][s] = std::move(p);
        }
    }

    Eigen::MatrixXd fim = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXcd d(dim);
    for (int m = 1; m <= cfg.transmissions; ++m) {
        for (int n = 1; n <= cfg.subcarriers; ++n) {
            for (Eigen::Index i = 0; i < dim; ++i) {
                const auto& sh = shifted[static_cast<std::size_t>(i)];
                const cplx fm2 = noiseless_signal(sh[0], profiles, cfg, m, n);
                const cplx fm1 = noiseless_signal(sh[1], profiles, cfg, m, n);
                const cplx fp1 = noiseless_signal(sh[2], profiles, cfg, m, n);
                const cplx fp2 = noiseless_signal(sh[3], profiles, cfg, m, n);
                d(i) = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * steps(i));
            }
            fim += (d * d.adjoint()).real();
        }
    }
    return (2.0 / cfg.noise_var_w) * fim;
}

} // namespace leoris
