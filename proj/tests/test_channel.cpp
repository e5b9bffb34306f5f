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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "leoris/channel.hpp"
#include "leoris/config.hpp"
#include "support.hpp"

namespace {

using namespace leoris;
constexpr double kPi = std::numbers::pi;

Scenario reference_scenario(int n_ris = 2)
{
    return build_scenario(fixtures::default_config(n_ris).scenario, 100e-9);
}

SignalConfig reference_signal(int m = 8, int n = 16)
{
    return make_signal_config(m, n, 12.7e9, 240e6, 10e-3, 1.0, 1.0, 4, 99);
}

TEST(FsplGain, UnitDistance)
{
    const double lambda = 0.03;
    const cplx g = fspl_gain(lambda / (4 * kPi), lambda, 0.0);
    EXPECT_NEAR(g.real(), 1.0, 1e-15);
    EXPECT_NEAR(g.imag(), 0.0, 1e-15);
}

TEST(FsplGain, PhaseAndMagnitude)
{
    const cplx g = fspl_gain(10.0, 0.03, kPi);
    EXPECT_NEAR(g.real(), -0.03 / (40 * kPi), 1e-18);
    EXPECT_NEAR(std::abs(fspl_gain(567891.0, 299792458.0 / 12.7e9, 0.3)), 3.307822004850009e-09, 1e-22);
    EXPECT_THROW(fspl_gain(0.0, 0.03, 0.0), Error);
}

TEST(RandomPrecoders, ModulusConstraint)
{
    const CMat f = random_precoders(16, 4, 7);
    for (Eigen::Index i = 0; i < f.size(); ++i)
        EXPECT_NEAR(std::norm(f(i)), 0.25, 1e-15);
}

TEST(RandomPrecoders, DeterministicPerSeed)
{
    EXPECT_EQ(random_precoders(8, 4, 3), random_precoders(8, 4, 3));
    EXPECT_NE(random_precoders(8, 4, 3), random_precoders(8, 4, 4));
}

TEST(RandomPrecoders, LongerRunsExtendShorterOnes)
{
    const CMat a = random_precoders(5, 4, 12), b = random_precoders(9, 4, 12);
    EXPECT_EQ(a, b.leftCols(5));
}

TEST(SignalConfig, SpacingFromBandwidthAndValidation)
{
    const SignalConfig cfg = reference_signal(2, 3300);
    EXPECT_DOUBLE_EQ(cfg.subcarrier_spacing, 240e6 / 3300);
    SignalConfig bad = cfg;
    bad.precoders(0, 0) *= 1.1;
    EXPECT_THROW(bad.validate(), Error);
    bad = cfg;
    bad.pilots(1, 1) = 0.5;
    EXPECT_THROW(bad.validate(), Error);
    EXPECT_THROW(make_signal_config(2, 4, 12.7e9, -1.0, 1e-2, 1, 1, 4, 1), Error);
}

TEST(ScenarioToPathParams, ReferenceGeometry)
{
    // NumPy oracle, tests/oracles/geometry_oracle.py
    const Scenario scn = reference_scenario(1);
    const SignalConfig cfg = reference_signal();
    const PathParams p = scenario_to_path_params(scn, cfg, 0, 1);
    EXPECT_NEAR(p.los.delay, 0.0018943799240801029, 1e-18);
    EXPECT_EQ(p.los.doppler, 0.0);
    EXPECT_NEAR(p.los.aod.az, kPi / 4, 1e-12);
    EXPECT_NEAR(p.los.aod.el, 1.3191186599751223, 1e-12);
    ASSERT_EQ(p.ris.size(), 1u);
    const RisPath& r = p.ris[0];
    EXPECT_NEAR(r.delay, 0.0018945386225959219, 1e-18);
    EXPECT_NEAR(r.aod_ris.az, -2.819842099193151, 1e-12);
    EXPECT_NEAR(r.aod_ris.el, 1.0857465398654136, 1e-12);
    EXPECT_NEAR(r.aoa_ris.az, 0.17984549934445335, 1e-12);
    EXPECT_NEAR(r.aoa_ris.el, 0.17712685969139372, 1e-12);
    EXPECT_NEAR(r.aod_sat.az, 0.78504825088985941, 1e-12);
    EXPECT_NEAR(r.aod_sat.el, 1.3190451911848302, 1e-12);
    EXPECT_NEAR(r.doppler, 28.720657104420322, 1e-9);
    const double lambda = cfg.wavelength();
    const Vec3 ps = scn.satellites[0].pose.position, pr = scn.rises[0].pose.position;
    EXPECT_NEAR(std::abs(r.gain), std::abs(fspl_gain((ps - pr).norm(), lambda, 0) * fspl_gain(pr.norm(), lambda, 0)),
                1e-28);
    EXPECT_EQ(p.unknown_count(), 11);
}

TEST(ScenarioToPathParams, CascadeExcessDelay)
{
    Scenario scn = reference_scenario(2);
    scn.clock_offset = 0.0;
    const PathParams p = scenario_to_path_params(scn, reference_signal(), 0, 5);
    const Vec3 ps = scn.satellites[0].pose.position;
    for (std::size_t l = 0; l < 2; ++l) {
        const Vec3 pr = scn.rises[l].pose.position;
        const double excess = ((ps - pr).norm() + pr.norm() - ps.norm()) / kSpeedOfLight;
        EXPECT_GE(p.ris[l].delay - p.los.delay, 0.0);
        EXPECT_NEAR(p.ris[l].delay - p.los.delay, excess, 1e-17);
    }
    EXPECT_EQ(p.unknown_count(), 16);
}

TEST(ScenarioToPathParams, GainPhasesAreSeeded)
{
    const Scenario scn = reference_scenario(2);
    const PathParams a = scenario_to_path_params(scn, reference_signal(), 0, 5);
    const PathParams b = scenario_to_path_params(scn, reference_signal(), 0, 5);
    const PathParams c = scenario_to_path_params(scn, reference_signal(), 0, 6);
    EXPECT_EQ(a.unknowns(), b.unknowns());
    EXPECT_NE(a.los.gain, c.los.gain);
    EXPECT_NEAR(std::abs(a.los.gain), std::abs(c.los.gain), 1e-24);
    EXPECT_THROW(scenario_to_path_params(scn, reference_signal(), 1, 5), Error);
}

TEST(PathParams, UnknownsRoundTrip)
{
    PathParams p = scenario_to_path_params(reference_scenario(2), reference_signal(), 0, 2);
    Eigen::VectorXd g = p.unknowns();
    g(0) += 1e-9;
    g(7) -= 0.01;
    g(15) = 3.0;
    p.set_unknowns(g);
    EXPECT_EQ(p.unknowns(), g);
    EXPECT_THROW(p.set_unknowns(Eigen::VectorXd::Zero(3)), Error);
}

// Brute force: y = sqrt(P) H_m[n] f_m s_m[n] with the full channel matrix
// H = a_su e^{..} a_s^T + a_sru e^{..} a_r^T(phi_ru) diag(w) a_r(phi_sr) a_s^T(theta_sr).
cplx brute_force_sample(const PathParams& p, const std::vector<CVec>& w, const SignalConfig& cfg, int m, int n)
{
    const double fc = cfg.carrier_hz;
    auto phase = [&](double nu, double tau) {
        return std::exp(cplx(0, 2 * kPi * (m * cfg.period_s * nu - n * cfg.subcarrier_spacing * tau)));
    };
    CMat h = p.los.gain * phase(p.los.doppler, p.los.delay) *
             array_response(p.sat_array, p.los.aod, fc).transpose();
    for (std::size_t l = 0; l < p.ris.size(); ++l) {
        const RisPath& r = p.ris[l];
        const CMat omega = w[l].asDiagonal();
        const CVec ar_out = array_response(r.array, r.aod_ris, fc);
        const CVec ar_in = array_response(r.array, r.aoa_ris, fc);
        const CVec as = array_response(p.sat_array, r.aod_sat, fc);
        h += r.gain * phase(r.doppler, r.delay) * (ar_out.transpose() * omega * ar_in) * as.transpose();
    }
    return std::sqrt(cfg.tx_power_w) * (h * cfg.precoders.col(m - 1))(0) * cfg.pilots(n - 1, m - 1);
}

TEST(NoiselessSignal, MatchesFullChannelProduct)
{
    const Scenario scn = fixtures::local_scenario(31, 2, {3, 3});
    SignalConfig cfg = fixtures::small_signal(4, 6, 4, 2);
    cfg.tx_power_w = 2.5;
    Rng rng(9);
    for (Eigen::Index i = 0; i < cfg.pilots.size(); ++i)
        cfg.pilots(i) = std::polar(1.0, rng.phase());
    const PathParams p = scenario_to_path_params(scn, cfg, 0, 3);
    const auto w = fixtures::random_profiles(scn, 4);
    for (int m = 1; m <= 4; ++m)
        for (int n = 1; n <= 6; ++n) {
            const cplx ref = brute_force_sample(p, w, cfg, m, n);
            EXPECT_LE(std::abs(noiseless_signal(p, w, cfg, m, n) - ref), 1e-12 * std::abs(ref));
        }
}

TEST(NoiselessSignal, MutedRisLeavesLineOfSight)
{
    const Scenario scn = fixtures::local_scenario(32, 1, {3, 3});
    const SignalConfig cfg = fixtures::small_signal(3, 4, 4, 2);
    PathParams p = scenario_to_path_params(scn, cfg, 0, 3);
    const std::vector<CVec> zero{CVec::Zero(9)};
    PathParams los_only = p;
    los_only.ris.clear();
    EXPECT_NEAR(std::abs(noiseless_signal(p, zero, cfg, 2, 3) - noiseless_signal(los_only, {}, cfg, 2, 3)), 0.0,
                1e-20);
    p.los.gain = 0.0;
    EXPECT_EQ(noiseless_signal(p, zero, cfg, 2, 3), cplx{});
}

TEST(NoiselessSignal, IndexAndDimensionChecks)
{
    const Scenario scn = fixtures::local_scenario(33, 1, {3, 3});
    const SignalConfig cfg = fixtures::small_signal(3, 4, 4, 2);
    const PathParams p = scenario_to_path_params(scn, cfg, 0, 3);
    const std::vector<CVec> w{CVec::Ones(9)};
    try {
        noiseless_signal(p, w, cfg, 0, 1);
        FAIL() << "expected IndexOutOfRange";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
    }
    EXPECT_THROW(noiseless_signal(p, w, cfg, 1, 5), Error);
    EXPECT_THROW(noiseless_signal(p, {}, cfg, 1, 1), Error);
}

TEST(NoiselessSignal, PilotPhaseOnlyRotates)
{
    const Scenario scn = fixtures::local_scenario(34, 2, {3, 3});
    SignalConfig cfg = fixtures::small_signal(3, 5, 4, 2);
    const PathParams p = scenario_to_path_params(scn, cfg, 0, 3);
    const auto w = fixtures::random_profiles(scn, 1);
    SignalConfig rotated = cfg;
    Rng rng(3);
    for (Eigen::Index i = 0; i < rotated.pilots.size(); ++i)
        rotated.pilots(i) = std::polar(1.0, rng.phase());
    for (int m = 1; m <= 3; ++m)
        for (int n = 1; n <= 5; ++n)
            EXPECT_NEAR(std::abs(noiseless_signal(p, w, cfg, m, n)), std::abs(noiseless_signal(p, w, rotated, m, n)),
                        1e-12 * std::abs(noiseless_signal(p, w, cfg, m, n)));
}

TEST(NoiselessSignal, LinearInGainsAndProfilePhase)
{
    const Scenario scn = fixtures::local_scenario(35, 1, {3, 3});
    const SignalConfig cfg = fixtures::small_signal(3, 5, 4, 2);
    const PathParams p = scenario_to_path_params(scn, cfg, 0, 3);
    const auto w = fixtures::random_profiles(scn, 1);

    PathParams los = p, ris = p;
    ris.los.gain = 0.0;
    los.ris[0].gain = 0.0;
    const cplx full = noiseless_signal(p, w, cfg, 2, 4);
    const cplx only_los = noiseless_signal(los, w, cfg, 2, 4);
    const cplx only_ris = noiseless_signal(ris, w, cfg, 2, 4);
    EXPECT_NEAR(std::abs(full - only_los - only_ris), 0.0, 1e-12 * std::abs(full));

    PathParams doubled = p;
    doubled.ris[0].gain *= cplx(2.0, -1.0);
    EXPECT_NEAR(std::abs(noiseless_signal(doubled, w, cfg, 2, 4) - only_los - cplx(2.0, -1.0) * only_ris), 0.0,
                1e-12 * std::abs(full));

    const cplx rot = std::polar(1.0, 0.9);
    const std::vector<CVec> turned{rot * w[0]};
    EXPECT_NEAR(std::abs(noiseless_signal(p, turned, cfg, 2, 4) - only_los - rot * only_ris), 0.0,
                1e-12 * std::abs(full));
}

} // namespace
