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

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "leoris/arrays.hpp"
#include "leoris/channel.hpp"
#include "leoris/errors.hpp"
#include "leoris/geometry.hpp"

namespace leoris {

/// Scalars through which a RIS profile enters the received signal:
/// b^T w and the two angular derivatives of b^T w with respect to phi_ru.
struct RisScalars {
    cplx q;
    cplx q_az;
    cplx q_el;
};

inline RisScalars ris_scalars(const RisCascade& cascade, const CVec& profile)
{
    if (profile.size() != cascade.b.size())
        throw Error(ErrorCode::DimensionMismatch, "RIS profile length differs from RIS size");
    return {cascade.b.cwiseProduct(profile).sum(), cascade.d_az.cwiseProduct(profile).sum(),
            cascade.d_el.cwiseProduct(profile).sum()};
}

inline std::vector<RisScalars> ris_scalars(const PathParams& params, std::span<const CVec> profiles,
                                           double carrier_hz)
{
    if (profiles.size() != params.ris.size())
        throw Error(ErrorCode::DimensionMismatch, "one RIS profile per RIS path required");
    std::vector<RisScalars> out;
    out.reserve(profiles.size());
    for (std::size_t l = 0; l < profiles.size(); ++l) {
        const auto& r = params.ris[l];
        out.push_back(ris_scalars(ris_cascade_vector(r.array, r.aod_ris, r.aoa_ris, carrier_hz), profiles[l]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Factorized derivatives
//
// Every partial derivative of mu_m[n] with respect to one unknown has the form
//   coeff * m^m_order * n^n_order * beta_{beam,m} * exp(j2pi(mT nu_p - n df tau_p)) * s_m[n]
// where p is the path owning the beam. Beams 0..2 are a_s^T f_m, da_s/daz^T f_m
// and da_s/del^T f_m at theta_su; beam 3+l is a_s^T f_m at theta_sr of RIS l.
// Path 0 is the LoS path, path 1+l the cascade through RIS l.
// ---------------------------------------------------------------------------

struct PartialTerm {
    std::size_t path = 0;
    std::size_t beam = 0;
    cplx coeff;
    int m_order = 0;
    int n_order = 0;
};

struct MuPartials {
    std::vector<PartialTerm> terms;
    std::size_t path_count = 0;
    std::size_t beam_count = 0;

    std::size_t size() const noexcept { return terms.size(); }
};

inline std::size_t beam_path(std::size_t beam) { return beam < 3 ? 0 : beam - 2; }

inline MuPartials mu_partials(const PathParams& params, std::span<const RisScalars> scalars,
                              const SignalConfig& cfg)
{
    if (scalars.size() != params.ris.size())
        throw Error(ErrorCode::DimensionMismatch, "one RIS scalar set per RIS path required");
    const double two_pi = 2.0 * std::numbers::pi;
    const double amp = std::sqrt(cfg.tx_power_w);
    const cplx delay_factor(0.0, -two_pi * cfg.subcarrier_spacing);
    const cplx doppler_factor(0.0, two_pi * cfg.period_s);
    const cplx j(0.0, 1.0);

    MuPartials out;
    out.path_count = 1 + params.ris.size();
    out.beam_count = 3 + params.ris.size();
    out.terms.reserve(static_cast<std::size_t>(params.unknown_count()));

    const cplx a_su = amp * params.los.gain;
    out.terms.push_back({0, 0, a_su * delay_factor, 0, 1});  // tau_su
    out.terms.push_back({0, 1, a_su, 0, 0});                 // theta_su az
    out.terms.push_back({0, 2, a_su, 0, 0});                 // theta_su el
    out.terms.push_back({0, 0, a_su * doppler_factor, 1, 0}); // nu_su
    out.terms.push_back({0, 0, amp, 0, 0});                  // Re alpha_su
    out.terms.push_back({0, 0, j * amp, 0, 0});              // Im alpha_su

    for (std::size_t l = 0; l < params.ris.size(); ++l) {
        const cplx a_sru = amp * params.ris[l].gain;
        const RisScalars& s = scalars[l];
        const std::size_t path = 1 + l;
        const std::size_t beam = 3 + l;
        out.terms.push_back({path, beam, a_sru * s.q * delay_factor, 0, 1}); // tau_sru
        out.terms.push_back({path, beam, a_sru * s.q_az, 0, 0});             // phi_ru az
        out.terms.push_back({path, beam, a_sru * s.q_el, 0, 0});             // phi_ru el
        out.terms.push_back({path, beam, amp * s.q, 0, 0});                  // Re alpha_sru
        out.terms.push_back({path, beam, j * amp * s.q, 0, 0});              // Im alpha_sru
    }
    return out;
}

inline MuPartials mu_partials(const PathParams& params, std::span<const CVec> profiles,
                              const SignalConfig& cfg)
{
    const auto scalars = ris_scalars(params, profiles, cfg.carrier_hz);
    return mu_partials(params, scalars, cfg);
}

/// Per-transmission beam scalars, beam_count x M.
inline CMat beam_scalars(const PathParams& params, const SignalConfig& cfg)
{
    if (cfg.precoders.rows() != params.sat_array.size())
        throw Error(ErrorCode::DimensionMismatch, "precoder length differs from satellite array size");
    const std::size_t beams = 3 + params.ris.size();
    CMat steer(static_cast<Eigen::Index>(beams), params.sat_array.size());
    steer.row(0) = array_response(params.sat_array, params.los.aod, cfg.carrier_hz).transpose();
    const auto jac = array_response_jacobian(params.sat_array, params.los.aod, cfg.carrier_hz);
    steer.row(1) = jac.d_az.transpose();
    steer.row(2) = jac.d_el.transpose();
    for (std::size_t l = 0; l < params.ris.size(); ++l)
        steer.row(static_cast<Eigen::Index>(3 + l)) =
            array_response(params.sat_array, params.ris[l].aod_sat, cfg.carrier_hz).transpose();
    return steer * cfg.precoders;
}

inline double path_doppler(const PathParams& params, std::size_t path)
{
    return path == 0 ? params.los.doppler : params.ris[path - 1].doppler;
}

inline double path_delay_of(const PathParams& params, std::size_t path)
{
    return path == 0 ? params.los.delay : params.ris[path - 1].delay;
}

/// Value of one partial derivative at (m, n), both 1-based, rebuilt from its
/// factorized form.
inline cplx partial_value(const PathParams& params, const MuPartials& partials, const CMat& beams,
                          const SignalConfig& cfg, std::size_t index, int m, int n)
{
    if (index >= partials.size())
        throw Error(ErrorCode::IndexOutOfRange, "partial index out of range");
    const PartialTerm& t = partials.terms[index];
    const std::size_t p = t.path;
    cplx v = t.coeff * beams(static_cast<Eigen::Index>(t.beam), m - 1) *
             detail::cycles_phasor(m * cfg.period_s * path_doppler(params, p)) *
             detail::cycles_phasor(-n * cfg.subcarrier_spacing * path_delay_of(params, p)) *
             cfg.pilots(n - 1, m - 1);
    if (t.m_order == 1)
        v *= static_cast<double>(m);
    if (t.n_order == 1)
        v *= static_cast<double>(n);
    return v;
}

/// Moment sums shared by every FIM evaluation of one satellite:
///   S_m(X, Y, a) = sum_m m^a beta_{X,m} conj(beta_{Y,m}) exp(j2pi m T (nu_X - nu_Y))
///   S_n(p, q, b) = sum_n n^b exp(-j2pi n df (tau_p - tau_q))
/// Only the RIS scalars change between profile candidates, so these are
/// computed once per geometry and precoder set.
class MomentTables {
public:
    MomentTables() = default;

    MomentTables(const PathParams& params, const SignalConfig& cfg)
        : beams_(3 + params.ris.size()), paths_(1 + params.ris.size())
    {
        const CMat beta = beam_scalars(params, cfg);
        m_sums_.assign(beams_ * beams_ * 3, cplx{});
        for (std::size_t x = 0; x < beams_; ++x) {
            for (std::size_t y = x; y < beams_; ++y) {
                const double dnu = path_doppler(params, beam_path(x)) - path_doppler(params, beam_path(y));
                std::array<cplx, 3> acc{};
                for (int m = 1; m <= cfg.transmissions; ++m) {
                    const cplx v = beta(static_cast<Eigen::Index>(x), m - 1) *
                                   std::conj(beta(static_cast<Eigen::Index>(y), m - 1)) *
                                   detail::cycles_phasor(m * cfg.period_s * dnu);
                    const double md = m;
                    acc[0] += v;
                    acc[1] += md * v;
                    acc[2] += md * md * v;
                }
                for (int a = 0; a < 3; ++a) {
                    m_sums_[m_index(x, y, a)] = acc[a];
                    m_sums_[m_index(y, x, a)] = std::conj(acc[a]);
                }
            }
        }
        n_sums_.assign(paths_ * paths_ * 3, cplx{});
        for (std::size_t p = 0; p < paths_; ++p) {
            for (std::size_t q = p; q < paths_; ++q) {
                const double dtau = path_delay_of(params, p) - path_delay_of(params, q);
                std::array<cplx, 3> acc{};
                for (int n = 1; n <= cfg.subcarriers; ++n) {
                    const cplx v = detail::cycles_phasor(-n * cfg.subcarrier_spacing * dtau);
                    const double nd = n;
                    acc[0] += v;
                    acc[1] += nd * v;
                    acc[2] += nd * nd * v;
                }
                for (int b = 0; b < 3; ++b) {
                    n_sums_[n_index(p, q, b)] = acc[b];
                    n_sums_[n_index(q, p, b)] = std::conj(acc[b]);
                }
            }
        }
    }

    std::size_t beam_count() const noexcept { return beams_; }
    std::size_t path_count() const noexcept { return paths_; }

    cplx m_sum(std::size_t x, std::size_t y, int order) const { return m_sums_[m_index(x, y, order)]; }
    cplx n_sum(std::size_t p, std::size_t q, int order) const { return n_sums_[n_index(p, q, order)]; }

private:
    std::size_t m_index(std::size_t x, std::size_t y, int a) const
    {
        return (x * beams_ + y) * 3 + static_cast<std::size_t>(a);
    }
    std::size_t n_index(std::size_t p, std::size_t q, int b) const
    {
        return (p * paths_ + q) * 3 + static_cast<std::size_t>(b);
    }

    std::size_t beams_ = 0;
    std::size_t paths_ = 0;
    std::vector<cplx> m_sums_;
    std::vector<cplx> n_sums_;
};

/// Exact low-dimensional factor of the same Gram structure. Pilots are unit
/// modulus and drop out, so every derivative is coeff * (u_{beam,a} kron
/// v_{path,b}) with u in C^M and v in C^N. Thin QR of the u and v families
/// gives coordinates whose Kronecker products reproduce all inner products,
/// so J_gamma = F F^T without forming sums whose cancellation would cost
/// digits in the ill-conditioned location FIM.
class SampleFactor {
public:
    SampleFactor() = default;

    SampleFactor(const PathParams& params, const SignalConfig& cfg)
        : beams_(3 + params.ris.size()), paths_(1 + params.ris.size())
    {
        const CMat beta = beam_scalars(params, cfg);
        const double nu0 = path_doppler(params, 0);
        const double tau0 = path_delay_of(params, 0);
        CMat u(cfg.transmissions, static_cast<Eigen::Index>(2 * beams_));
        for (std::size_t x = 0; x < beams_; ++x) {
            const double dnu = path_doppler(params, beam_path(x)) - nu0;
            for (int m = 1; m <= cfg.transmissions; ++m) {
                const cplx v = beta(static_cast<Eigen::Index>(x), m - 1) *
                               detail::cycles_phasor(m * cfg.period_s * dnu);
                u(m - 1, static_cast<Eigen::Index>(2 * x)) = v;
                u(m - 1, static_cast<Eigen::Index>(2 * x + 1)) = static_cast<double>(m) * v;
            }
        }
        CMat w(cfg.subcarriers, static_cast<Eigen::Index>(2 * paths_));
        for (std::size_t p = 0; p < paths_; ++p) {
            const double dtau = path_delay_of(params, p) - tau0;
            for (int n = 1; n <= cfg.subcarriers; ++n) {
                const cplx v = detail::cycles_phasor(-n * cfg.subcarrier_spacing * dtau);
                w(n - 1, static_cast<Eigen::Index>(2 * p)) = v;
                w(n - 1, static_cast<Eigen::Index>(2 * p + 1)) = static_cast<double>(n) * v;
            }
        }
        u_coords_ = coordinates(u);
        v_coords_ = coordinates(w);
    }

    std::size_t beam_count() const noexcept { return beams_; }
    std::size_t path_count() const noexcept { return paths_; }

    /// Real factor F with J_gamma = F F^T; rows follow the partials.
    Eigen::MatrixXd real_factor(const MuPartials& partials, double noise_var) const
    {
        if (partials.beam_count != beams_ || partials.path_count != paths_)
            throw Error(ErrorCode::DimensionMismatch, "partials and sample factor describe different paths");
        const Eigen::Index ru = u_coords_.rows(), rv = v_coords_.rows();
        const Eigen::Index width = ru * rv;
        const double scale = std::sqrt(2.0 / noise_var);
        Eigen::MatrixXd f(static_cast<Eigen::Index>(partials.size()), 2 * width);
        for (std::size_t i = 0; i < partials.size(); ++i) {
            const PartialTerm& t = partials.terms[i];
            const auto uc = u_coords_.col(static_cast<Eigen::Index>(2 * t.beam + static_cast<std::size_t>(t.m_order)));
            const auto vc = v_coords_.col(static_cast<Eigen::Index>(2 * t.path + static_cast<std::size_t>(t.n_order)));
            const cplx c = scale * t.coeff;
            const auto row = static_cast<Eigen::Index>(i);
            for (Eigen::Index a = 0; a < ru; ++a) {
                const cplx ca = c * uc(a);
                for (Eigen::Index b = 0; b < rv; ++b) {
                    const cplx v = ca * vc(b);
                    f(row, a * rv + b) = v.real();
                    f(row, width + a * rv + b) = v.imag();
                }
            }
        }
        return f;
    }

private:
    // R of a thin QR; columns are coordinates in an orthonormal basis.
    static CMat coordinates(const CMat& x)
    {
        Eigen::HouseholderQR<CMat> qr(x);
        const Eigen::Index r = std::min(x.rows(), x.cols());
        CMat out = qr.matrixQR().topRows(r);
        for (Eigen::Index c = 0; c < out.cols(); ++c)
            for (Eigen::Index i = c + 1; i < r; ++i)
                out(i, c) = cplx{};
        return out;
    }

    std::size_t beams_ = 0;
    std::size_t paths_ = 0;
    CMat u_coords_;
    CMat v_coords_;
};

/// Slepian-Bangs FIM of the channel-domain unknowns,
/// J = 2/sigma^2 sum_m sum_n Re{dmu dmu^H}, assembled from moment sums.
/// Assumes unit-modulus pilots, which SignalConfig::validate enforces.
inline Eigen::MatrixXd channel_fim(const MuPartials& partials, const MomentTables& tables,
                                   const SignalConfig& cfg)
{
    if (partials.beam_count != tables.beam_count() || partials.path_count != tables.path_count())
        throw Error(ErrorCode::DimensionMismatch, "partials and moment tables describe different paths");
    const auto dim = static_cast<Eigen::Index>(partials.size());
    const double scale = 2.0 / cfg.noise_var_w;
    Eigen::MatrixXd fim(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        const PartialTerm& ti = partials.terms[static_cast<std::size_t>(i)];
        for (Eigen::Index k = i; k < dim; ++k) {
            const PartialTerm& tk = partials.terms[static_cast<std::size_t>(k)];
            const cplx v = ti.coeff * std::conj(tk.coeff) *
                           tables.m_sum(ti.beam, tk.beam, ti.m_order + tk.m_order) *
                           tables.n_sum(ti.path, tk.path, ti.n_order + tk.n_order);
            fim(i, k) = fim(k, i) = scale * v.real();
        }
    }
    return fim;
}

inline Eigen::MatrixXd channel_fim(const PathParams& params, std::span<const CVec> profiles,
                                   const SignalConfig& cfg)
{
    return channel_fim(mu_partials(params, profiles, cfg), MomentTables(params, cfg), cfg);
}

// ---------------------------------------------------------------------------
// Location domain
// ---------------------------------------------------------------------------

/// Location-domain unknowns: [p_u (3), clock offset, gain nuisances], where
/// the nuisances are (Re, Im) of the LoS gain then of each RIS cascade, per
/// satellite in order.
struct EtaLayout {
    std::size_t satellites = 1;
    std::size_t rises = 0;

    Eigen::Index size() const
    {
        return static_cast<Eigen::Index>(4 + 2 * satellites * (1 + rises));
    }
    Eigen::Index los_gain_slot(std::size_t k) const
    {
        return static_cast<Eigen::Index>(4 + 2 * k * (1 + rises));
    }
    Eigen::Index ris_gain_slot(std::size_t k, std::size_t l) const
    {
        return los_gain_slot(k) + static_cast<Eigen::Index>(2 * (1 + l));
    }
    bool operator==(const EtaLayout&) const = default;
};

struct JacobianSteps {
    double position_m = 1e-2;
    double clock_s = 1e-10;
};

/// T = d gamma^T / d eta for one satellite, by central differences of the
/// geometry map with gains held fixed. Rows follow EtaLayout, columns the
/// PathParams unknown ordering.
inline Eigen::MatrixXd location_jacobian(const Scenario& scn, const SignalConfig& cfg, std::size_t sat_index,
                                         std::uint64_t gain_seed, JacobianSteps steps = {})
{
    const EtaLayout layout{scn.satellites.size(), scn.rises.size()};
    const PathParams nominal = scenario_to_path_params(scn, cfg, sat_index, gain_seed);
    const Eigen::Index gdim = nominal.unknown_count();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(layout.size(), gdim);

    // gain coordinates inside the PathParams unknown vector
    std::vector<Eigen::Index> gain_cols{4, 5};
    for (std::size_t l = 0; l < scn.rises.size(); ++l) {
        const Eigen::Index o = PathParams::kLosSize + PathParams::kRisSize * static_cast<Eigen::Index>(l);
        gain_cols.push_back(o + 3);
        gain_cols.push_back(o + 4);
    }
    // azimuth coordinates need wrapped differences
    std::vector<Eigen::Index> az_cols{1};
    for (std::size_t l = 0; l < scn.rises.size(); ++l)
        az_cols.push_back(PathParams::kLosSize + PathParams::kRisSize * static_cast<Eigen::Index>(l) + 1);

    for (int row = 0; row < 4; ++row) {
        Scenario plus = scn, minus = scn;
        double h = 0.0;
        if (row < 3) {
            h = steps.position_m;
            plus.ue_position(row) += h;
            minus.ue_position(row) -= h;
        } else {
            h = steps.clock_s;
            plus.clock_offset += h;
            minus.clock_offset -= h;
        }
        const Eigen::VectorXd gp = scenario_to_path_params(plus, cfg, sat_index, gain_seed).unknowns();
        const Eigen::VectorXd gm = scenario_to_path_params(minus, cfg, sat_index, gain_seed).unknowns();
        Eigen::VectorXd diff = gp - gm;
        for (Eigen::Index c : az_cols)
            diff(c) = std::remainder(diff(c), 2.0 * std::numbers::pi);
        for (Eigen::Index c : gain_cols)
            diff(c) = 0.0;
        jac.row(row) = diff.transpose() / (2.0 * h);
    }
    for (std::size_t g = 0; g < gain_cols.size(); ++g)
        jac(layout.los_gain_slot(sat_index) + static_cast<Eigen::Index>(g), gain_cols[g]) = 1.0;
    return jac;
}

struct PebResult {
    double peb = std::numeric_limits<double>::infinity();
    double condition = std::numeric_limits<double>::infinity();
    bool identifiable = false;
};

inline constexpr double kMaxFimCondition = 1e14;

namespace detail {

// PEB from a square root A of the location FIM (J = A A^T). Rows are
// equilibrated so that unit choices do not affect the identifiability test.
inline PebResult peb_from_root(const Eigen::MatrixXd& root)
{
    PebResult out;
    const Eigen::Index dim = root.rows();
    if (!root.allFinite())
        return out;
    const Eigen::VectorXd norms = root.rowwise().norm();
    if ((norms.array() <= 0.0).any() || root.cols() < dim)
        return out;
    const Eigen::VectorXd s = norms.cwiseInverse();
    const Eigen::MatrixXd scaled = (s.asDiagonal() * root).transpose();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(scaled);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(dim).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double hi = sv(0), lo = sv(dim - 1);
    out.condition = lo > 0.0 ? (hi / lo) * (hi / lo) : std::numeric_limits<double>::infinity();
    if (!(lo > 0.0) || out.condition > kMaxFimCondition)
        return out;
    const Eigen::MatrixXd v = svd.matrixV().topRows(3);
    const Eigen::VectorXd inv_sq = sv.array().square().inverse();
    double trace = 0.0;
    for (int i = 0; i < 3; ++i)
        trace += v.row(i).array().square().matrix().dot(inv_sq) * s(i) * s(i);
    out.peb = std::sqrt(trace);
    out.identifiable = true;
    return out;
}

} // namespace detail

/// PEB = sqrt(tr([J^-1]_{1:3,1:3})). Identifiability is judged on the
/// Jacobi-equilibrated matrix so that unit choices do not matter.
inline PebResult position_error_bound(const Eigen::MatrixXd& location_fim)
{
    PebResult out;
    const Eigen::Index dim = location_fim.rows();
    if (dim < 3 || location_fim.cols() != dim)
        throw Error(ErrorCode::DimensionMismatch, "location FIM must be square with at least 3 rows");
    const Eigen::VectorXd diag = location_fim.diagonal();
    if (!location_fim.allFinite() || (diag.array() <= 0.0).any())
        return out;
    const Eigen::VectorXd s = diag.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd scaled = s.asDiagonal() * location_fim * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
    if (eig.info() != Eigen::Success)
        return out;
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double lo = lambda(0), hi = lambda(dim - 1);
    out.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(lo > 0.0) || out.condition > kMaxFimCondition)
        return out;
    const Eigen::MatrixXd v = eig.eigenvectors().topRows(3);
    const Eigen::Matrix3d block = v * lambda.cwiseInverse().asDiagonal() * v.transpose();
    double trace = 0.0;
    for (int i = 0; i < 3; ++i)
        trace += block(i, i) * s(i) * s(i);
    out.peb = std::sqrt(trace);
    out.identifiable = true;
    return out;
}

/// Same bound from a factor A with J = A A^T, which keeps roughly twice the
/// significant digits of the explicit form on ill-conditioned geometries.
inline PebResult position_error_bound_from_root(const Eigen::MatrixXd& root)
{
    if (root.rows() < 3)
        throw Error(ErrorCode::DimensionMismatch, "location FIM must have at least 3 rows");
    return detail::peb_from_root(root);
}

struct FimBundle {
    Eigen::MatrixXd channel_fim;
    Eigen::MatrixXd jacobian;
    Eigen::MatrixXd location_fim;
    double peb = std::numeric_limits<double>::infinity();
};

namespace detail {

// Nuisance rows of one satellite: every row past the shared block that its
// Jacobian touches.
inline std::vector<Eigen::Index> nuisance_rows(const Eigen::MatrixXd& jacobian)
{
    std::vector<Eigen::Index> rows;
    for (Eigen::Index r = 4; r < jacobian.rows(); ++r)
        if (jacobian.row(r).cwiseAbs().maxCoeff() > 0.0)
            rows.push_back(r);
    return rows;
}

// Schur complement of the nuisance block of J onto (p, Delta). Empty when the
// nuisance block is not numerically positive definite.
inline std::optional<Eigen::Matrix4d> shared_information(const Eigen::MatrixXd& j,
                                                         const std::vector<Eigen::Index>& nuisance)
{
    const Eigen::Matrix4d p = j.topLeftCorner(4, 4);
    if (nuisance.empty())
        return p;
    const std::vector<Eigen::Index> shared{0, 1, 2, 3};
    const Eigen::MatrixXd g = j(nuisance, nuisance);
    const Eigen::MatrixXd c = j(shared, nuisance);
    const Eigen::VectorXd diag = g.diagonal();
    if ((diag.array() <= 0.0).any())
        return std::nullopt;
    const Eigen::VectorXd d = diag.cwiseSqrt().cwiseInverse();
    const Eigen::LLT<Eigen::MatrixXd> llt(d.asDiagonal() * g * d.asDiagonal());
    if (llt.info() != Eigen::Success)
        return std::nullopt;
    const Eigen::VectorXd l = llt.matrixLLT().diagonal();
    const double ratio = l.maxCoeff() / l.minCoeff();
    if (!(ratio * ratio <= kMaxFimCondition))
        return std::nullopt;
    const Eigen::MatrixXd x = llt.matrixL().solve(d.asDiagonal() * c.transpose());
    Eigen::Matrix4d s = p - x.transpose() * x;
    return 0.5 * (s + s.transpose());
}

// PEB of sum_k J_k where the J_k share only the (p, Delta) block. Each
// satellite's nuisances are eliminated on their own, so the result is exactly
// additive over satellites. Falls back to the joint matrix when the nuisance
// sets overlap.
inline PebResult peb_by_elimination(const std::vector<Eigen::MatrixXd>& parts,
                                    const std::vector<Eigen::MatrixXd>& jacobians, const Eigen::MatrixXd& joint)
{
    std::vector<std::vector<Eigen::Index>> rows;
    std::vector<int> owner(static_cast<std::size_t>(joint.rows()), 0);
    for (const auto& t : jacobians) {
        rows.push_back(nuisance_rows(t));
        for (Eigen::Index r : rows.back())
            if (++owner[static_cast<std::size_t>(r)] > 1)
                return position_error_bound(joint);
    }
    for (std::size_t r = 4; r < owner.size(); ++r)
        if (owner[r] == 0)
            return PebResult{};
    Eigen::Matrix4d total = Eigen::Matrix4d::Zero();
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto s = shared_information(parts[k], rows[k]);
        if (!s)
            return PebResult{};
        total += *s;
    }
    return position_error_bound(total);
}

} // namespace detail

inline FimBundle location_fim_and_peb(const Eigen::MatrixXd& channel_fim, const Eigen::MatrixXd& jacobian)
{
    if (channel_fim.rows() != channel_fim.cols() || jacobian.cols() != channel_fim.rows())
        throw Error(ErrorCode::DimensionMismatch, "T must be dim(eta) x dim(gamma)");
    if (jacobian.rows() < 4)
        throw Error(ErrorCode::DimensionMismatch, "eta needs position and clock rows");
    FimBundle out{channel_fim, jacobian, jacobian * channel_fim * jacobian.transpose(), 0.0};
    out.location_fim = 0.5 * (out.location_fim + out.location_fim.transpose()).eval();
    const PebResult r = detail::peb_by_elimination({out.location_fim}, {jacobian}, out.location_fim);
    if (!r.identifiable)
        throw Error(ErrorCode::SingularFim,
                    "location FIM is not invertible (condition " + std::to_string(r.condition) + ")");
    out.peb = r.peb;
    return out;
}

struct SatelliteFim {
    Eigen::MatrixXd channel_fim;
    Eigen::MatrixXd jacobian;
};

/// J_eta = T_tot blkdiag(J_1..J_K) T_tot^T, with T_tot = [T_1, ..., T_K].
inline FimBundle assemble_multi(std::span<const SatelliteFim> sats)
{
    if (sats.empty())
        throw Error(ErrorCode::LayoutMismatch, "no satellite contributions");
    const Eigen::Index eta = sats.front().jacobian.rows();
    if (eta < 4)
        throw Error(ErrorCode::DimensionMismatch, "eta needs position and clock rows");
    Eigen::Index total = 0;
    for (const auto& s : sats) {
        if (s.jacobian.rows() != eta)
            throw Error(ErrorCode::LayoutMismatch, "satellites disagree on the eta layout");
        if (s.channel_fim.rows() != s.jacobian.cols() || s.channel_fim.cols() != s.channel_fim.rows())
            throw Error(ErrorCode::DimensionMismatch, "T must be dim(eta) x dim(gamma)");
        total += s.channel_fim.rows();
    }
    Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(total, total);
    Eigen::MatrixXd t_tot(eta, total);
    Eigen::MatrixXd j_eta = Eigen::MatrixXd::Zero(eta, eta);
    std::vector<Eigen::MatrixXd> parts, jacobians;
    Eigen::Index offset = 0;
    for (const auto& s : sats) {
        const Eigen::Index d = s.channel_fim.rows();
        blk.block(offset, offset, d, d) = s.channel_fim;
        t_tot.middleCols(offset, d) = s.jacobian;
        Eigen::MatrixXd part = s.jacobian * s.channel_fim * s.jacobian.transpose();
        part = 0.5 * (part + part.transpose()).eval();
        j_eta += part;
        parts.push_back(std::move(part));
        jacobians.push_back(s.jacobian);
        offset += d;
    }
    FimBundle out{std::move(blk), std::move(t_tot), std::move(j_eta), 0.0};
    const PebResult r = detail::peb_by_elimination(parts, jacobians, out.location_fim);
    if (!r.identifiable)
        throw Error(ErrorCode::SingularFim,
                    "location FIM is not invertible (condition " + std::to_string(r.condition) + ")");
    out.peb = r.peb;
    return out;
}

// ---------------------------------------------------------------------------
// Per-satellite cache used by sweeps and the profile search
// ---------------------------------------------------------------------------

struct SatelliteModel {
    PathParams params;
    MomentTables tables;
    SampleFactor factor;
    Eigen::MatrixXd jacobian;
    std::vector<RisCascade> cascades;
};

inline SatelliteModel build_satellite_model(const Scenario& scn, const SignalConfig& cfg, std::size_t sat_index,
                                            std::uint64_t gain_seed)
{
    SatelliteModel model;
    model.params = scenario_to_path_params(scn, cfg, sat_index, gain_seed);
    model.tables = MomentTables(model.params, cfg);
    model.factor = SampleFactor(model.params, cfg);
    model.jacobian = location_jacobian(scn, cfg, sat_index, gain_seed);
    for (const auto& r : model.params.ris)
        model.cascades.push_back(ris_cascade_vector(r.array, r.aod_ris, r.aoa_ris, cfg.carrier_hz));
    return model;
}

/// Same model with T restricted to [p_u, clock offset] and the satellite's
/// own gain nuisances, i.e. the single-satellite location problem.
inline SatelliteModel single_satellite_view(const SatelliteModel& model, std::size_t sat_index)
{
    const std::size_t rises = model.params.ris.size();
    const auto per_sat = static_cast<Eigen::Index>(2 * (1 + rises));
    const EtaLayout full{static_cast<std::size_t>((model.jacobian.rows() - 4) / per_sat), rises};
    if (full.size() != model.jacobian.rows() || sat_index >= full.satellites)
        throw Error(ErrorCode::LayoutMismatch, "jacobian rows do not match an eta layout");
    SatelliteModel out = model;
    out.jacobian.resize(4 + per_sat, model.jacobian.cols());
    out.jacobian.topRows(4) = model.jacobian.topRows(4);
    out.jacobian.bottomRows(per_sat) = model.jacobian.middleRows(full.los_gain_slot(sat_index), per_sat);
    return out;
}

inline Eigen::MatrixXd satellite_channel_fim(const SatelliteModel& model, std::span<const RisScalars> scalars,
                                             const SignalConfig& cfg)
{
    return channel_fim(mu_partials(model.params, scalars, cfg), model.tables, cfg);
}

/// A with T J_gamma T^T = A A^T for one satellite.
inline Eigen::MatrixXd satellite_location_root(const SatelliteModel& model, std::span<const RisScalars> scalars,
                                               const SignalConfig& cfg)
{
    return model.jacobian * model.factor.real_factor(mu_partials(model.params, scalars, cfg), cfg.noise_var_w);
}

/// Horizontal stack of the per-satellite roots, so that J_eta = A A^T.
inline Eigen::MatrixXd location_root(std::span<const SatelliteModel> models, std::span<const CVec> profiles,
                                     const SignalConfig& cfg)
{
    if (models.empty())
        throw Error(ErrorCode::LayoutMismatch, "no satellite models");
    const Eigen::Index eta = models.front().jacobian.rows();
    std::vector<Eigen::MatrixXd> parts;
    Eigen::Index width = 0;
    for (const auto& model : models) {
        if (model.jacobian.rows() != eta)
            throw Error(ErrorCode::LayoutMismatch, "satellites disagree on the eta layout");
        if (profiles.size() != model.cascades.size())
            throw Error(ErrorCode::DimensionMismatch, "one RIS profile per RIS path required");
        std::vector<RisScalars> scalars;
        scalars.reserve(profiles.size());
        for (std::size_t l = 0; l < profiles.size(); ++l)
            scalars.push_back(ris_scalars(model.cascades[l], profiles[l]));
        parts.push_back(satellite_location_root(model, scalars, cfg));
        width += parts.back().cols();
    }
    Eigen::MatrixXd root(eta, width);
    Eigen::Index offset = 0;
    for (const auto& p : parts) {
        root.middleCols(offset, p.cols()) = p;
        offset += p.cols();
    }
    return root;
}

inline Eigen::MatrixXd location_fim(std::span<const SatelliteModel> models, std::span<const CVec> profiles,
                                    const SignalConfig& cfg)
{
    const Eigen::MatrixXd root = location_root(models, profiles, cfg);
    return root * root.transpose();
}

inline PebResult evaluate_peb(std::span<const SatelliteModel> models, std::span<const CVec> profiles,
                              const SignalConfig& cfg)
{
    return position_error_bound_from_root(location_root(models, profiles, cfg));
}

} // namespace leoris
