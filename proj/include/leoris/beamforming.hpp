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
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leoris/arrays.hpp"
#include "leoris/errors.hpp"
#include "leoris/fim.hpp"
#include "leoris/random.hpp"

namespace leoris {

inline constexpr double kProfileTolerance = 1e-12;

/// RIS reflection vector subject to ||w||_inf <= 1.
class RisProfile {
public:
    RisProfile() = default;

    explicit RisProfile(CVec values) : values_(std::move(values))
    {
        if (!values_.allFinite())
            throw Error(ErrorCode::InfeasibleProfile, "non-finite reflection coefficient");
        if (max_modulus() > 1.0 + kProfileTolerance)
            throw Error(ErrorCode::InfeasibleProfile, "reflection coefficient exceeds unit modulus");
    }

    static RisProfile zeros(Eigen::Index n) { return RisProfile(CVec::Zero(n)); }

    const CVec& values() const noexcept { return values_; }
    Eigen::Index size() const noexcept { return values_.size(); }
    double max_modulus() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }

private:
    CVec values_;
};

namespace detail {

// Nudges z by single ulps until |z| is exactly 1.
inline cplx snap_unit(cplx z)
{
    z /= std::abs(z);
    for (int guard = 0; guard < 64; ++guard) {
        const double m = std::abs(z);
        if (m == 1.0)
            break;
        const double target = m > 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
        if (std::abs(z.real()) >= std::abs(z.imag()))
            z.real(std::nextafter(z.real(), std::copysign(target, z.real())));
        else
            z.imag(std::nextafter(z.imag(), std::copysign(target, z.imag())));
    }
    return z;
}

} // namespace detail

inline std::vector<CVec> profile_values(std::span<const RisProfile> profiles)
{
    std::vector<CVec> out;
    out.reserve(profiles.size());
    for (const auto& p : profiles)
        out.push_back(p.values());
    return out;
}

inline RisProfile random_profile(int n_r, std::uint64_t seed)
{
    if (n_r < 1)
        throw Error(ErrorCode::InvalidDimension, "RIS needs at least one element");
    Rng rng(seed);
    CVec w(n_r);
    for (int i = 0; i < n_r; ++i)
        w(i) = std::polar(1.0, rng.phase());
    return RisProfile(std::move(w));
}

/// Phase-conjugate combining toward phi_ru: b_r^T w = N_r.
inline RisProfile directional_profile(const UpaGeometry& geom, const AnglePair& phi_ru, const AnglePair& phi_sr,
                                      double carrier_hz)
{
    const CVec b = ris_cascade_vector(geom, phi_ru, phi_sr, carrier_hz).b;
    CVec w(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i)
        w(i) = detail::snap_unit(std::conj(b(i)));
    return RisProfile(std::move(w));
}

/// B = [b_r*, db_r*/daz, db_r*/del] and its column-space projector.
class SteeringBasis {
public:
    static constexpr double kMaxGramCondition = 1e12;

    explicit SteeringBasis(CMat basis) : basis_(std::move(basis))
    {
        if (basis_.cols() != 3 || basis_.rows() < 3)
            throw Error(ErrorCode::RankDeficient, "steering basis needs at least 3 RIS elements");
        const CMat gram = basis_.adjoint() * basis_;
        Eigen::SelfAdjointEigenSolver<CMat> eig(gram);
        const double lo = eig.eigenvalues()(0), hi = eig.eigenvalues()(2);
        if (!(lo > 0.0) || hi / lo > kMaxGramCondition)
            throw Error(ErrorCode::RankDeficient, "B^H B is numerically singular");
        gram_inverse_ = gram.inverse();
        normalized_ = basis_;
        for (int c = 0; c < 3; ++c)
            normalized_.col(c) /= basis_.col(c).norm();
    }

    const CMat& basis() const noexcept { return basis_; }
    /// Columns of B scaled to unit Euclidean norm.
    const CMat& normalized() const noexcept { return normalized_; }

    CVec project(const CVec& x) const { return basis_ * (gram_inverse_ * (basis_.adjoint() * x)); }
    CVec project_orthogonal(const CVec& x) const { return x - project(x); }

    CMat projector() const { return basis_ * gram_inverse_ * basis_.adjoint(); }

private:
    CMat basis_;
    CMat normalized_;
    CMat gram_inverse_;
};

inline SteeringBasis steering_basis(const UpaGeometry& geom, const AnglePair& phi_ru, const AnglePair& phi_sr,
                                    double carrier_hz)
{
    const RisCascade c = ris_cascade_vector(geom, phi_ru, phi_sr, carrier_hz);
    CMat b(c.b.size(), 3);
    b.col(0) = c.b.conjugate();
    b.col(1) = c.d_az.conjugate();
    b.col(2) = c.d_el.conjugate();
    return SteeringBasis(std::move(b));
}

/// Coefficient grid for w = c1 B1 + c2 B2 + c3 B3 over unit-norm columns.
/// c1 is real and non-negative (fixes the global phase); c2 and c3 range over
/// magnitudes x phases.
struct GridSpec {
    std::vector<double> c1_values{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> magnitudes{0.0, 0.25, 0.5, 0.75, 1.0};
    int phase_count = 4;

    std::vector<cplx> complex_values() const
    {
        std::vector<cplx> out;
        for (double mag : magnitudes)
            for (int p = 0; p < phase_count; ++p)
                out.push_back(std::polar(mag, 2.0 * std::numbers::pi * p / phase_count));
        return out;
    }

    std::size_t candidate_count() const { return c1_values.size() * complex_values().size() * complex_values().size(); }
};

/// Parses "c1=0,0.5,1;mag=0,0.5,1;phases=4". Omitted keys keep defaults.
inline GridSpec parse_grid_spec(const std::string& text)
{
    GridSpec g;
    auto parse_list = [](const std::string& key, const std::string& body) {
        std::vector<double> values;
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(item, &used));
                if (used != item.size())
                    throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw Error(ErrorCode::ParseError, "grid key '" + key + "': bad number '" + item + "'");
            }
        }
        return values;
    };
    std::stringstream ss(text);
    std::string clause;
    while (std::getline(ss, clause, ';')) {
        if (clause.empty())
            continue;
        const auto eq = clause.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ParseError, "grid clause '" + clause + "' lacks '='");
        const std::string key = clause.substr(0, eq), body = clause.substr(eq + 1);
        if (key == "c1")
            g.c1_values = parse_list(key, body);
        else if (key == "mag")
            g.magnitudes = parse_list(key, body);
        else if (key == "phases") {
            const auto v = parse_list(key, body);
            if (v.size() != 1 || v[0] < 1 || v[0] != std::floor(v[0]))
                throw Error(ErrorCode::ParseError, "grid key 'phases' must be one positive integer");
            g.phase_count = static_cast<int>(v[0]);
        } else
            throw Error(ErrorCode::ParseError, "unknown grid key '" + key + "'");
    }
    for (double c : g.c1_values)
        if (c < 0.0)
            throw Error(ErrorCode::ValidationError, "c1 values must be non-negative");
    for (double m : g.magnitudes)
        if (m < 0.0)
            throw Error(ErrorCode::ValidationError, "magnitudes must be non-negative");
    return g;
}


/// Scales w so that max |w_i| is exactly 1.
inline void normalize_peak(CVec& w)
{
    Eigen::Index at = 0;
    const double peak = w.cwiseAbs().maxCoeff(&at);
    w /= peak;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (i == at || std::abs(w(i)) > 1.0)
            w(i) = detail::snap_unit(w(i));
}

/// Relative PEB improvement below which two candidates count as tied.
inline constexpr double kTieTolerance = 1e-12;

struct OptimizeResult {
    RisProfile profile;
    double peb = std::numeric_limits<double>::infinity();
    std::size_t evaluated = 0;
    std::size_t best_index = 0; // candidate_count() when the start profile was kept
};

/// Grid search over the column space of B for RIS `ris_index`; the other RIS
/// profiles stay at `profiles`. The objective is the PEB of `models`.
/// The incoming profile of that RIS is the incumbent, so the result is never
/// worse than the start. Candidates are visited in grid order and must beat
/// the incumbent by more than kTieTolerance; ties keep the earlier one.
inline OptimizeResult optimize_profile(std::span<const SatelliteModel> models, std::span<const CVec> profiles,
                                       const SignalConfig& cfg, std::size_t ris_index, const SteeringBasis& basis,
                                       const GridSpec& grid)
{
    if (grid.c1_values.empty() || grid.magnitudes.empty() || grid.phase_count < 1)
        throw Error(ErrorCode::EmptyGrid, "coefficient grid is empty");
    if (models.empty())
        throw Error(ErrorCode::LayoutMismatch, "no satellite models");
    if (ris_index >= profiles.size())
        throw Error(ErrorCode::IndexOutOfRange, "RIS index out of range");
    const CMat& cols = basis.normalized();
    const Eigen::Index eta = models.front().jacobian.rows();

    // Per model: fixed scalars of the other RISs and the 3x3 map from
    // coefficients to the optimised RIS's scalars.
    struct Cache {
        std::vector<RisScalars> scalars;
        Eigen::Matrix3cd coeff_map;
    };
    std::vector<Cache> caches;
    for (const auto& model : models) {
        if (model.cascades.size() != profiles.size())
            throw Error(ErrorCode::DimensionMismatch, "one RIS profile per RIS path required");
        if (model.cascades[ris_index].b.size() != cols.rows())
            throw Error(ErrorCode::DimensionMismatch, "basis size differs from RIS size");
        Cache c;
        for (std::size_t l = 0; l < profiles.size(); ++l)
            c.scalars.push_back(ris_scalars(model.cascades[l], profiles[l]));
        const RisCascade& rc = model.cascades[ris_index];
        c.coeff_map.row(0) = rc.b.transpose() * cols;
        c.coeff_map.row(1) = rc.d_az.transpose() * cols;
        c.coeff_map.row(2) = rc.d_el.transpose() * cols;
        caches.push_back(std::move(c));
    }
    Eigen::Index width = 0;
    for (std::size_t k = 0; k < models.size(); ++k) {
        if (models[k].jacobian.rows() != eta)
            throw Error(ErrorCode::LayoutMismatch, "satellites disagree on the eta layout");
        width += satellite_location_root(models[k], caches[k].scalars, cfg).cols();
    }

    OptimizeResult best;
    CVec best_w;
    {
        Eigen::MatrixXd root(eta, width);
        Eigen::Index offset = 0;
        for (std::size_t k = 0; k < models.size(); ++k) {
            const Eigen::MatrixXd part = satellite_location_root(models[k], caches[k].scalars, cfg);
            root.middleCols(offset, part.cols()) = part;
            offset += part.cols();
        }
        const PebResult r = position_error_bound_from_root(root);
        if (r.identifiable && profiles[ris_index].size() > 0 && profiles[ris_index].cwiseAbs().maxCoeff() == 1.0) {
            best.peb = r.peb;
            best.best_index = grid.candidate_count();
            best_w = profiles[ris_index];
        }
    }

    const auto cvals = grid.complex_values();
    std::size_t index = 0;
    for (double c1 : grid.c1_values) {
        for (cplx c2 : cvals) {
            for (cplx c3 : cvals) {
                const std::size_t here = index++;
                if (c1 == 0.0 && c2 == cplx{} && c3 == cplx{})
                    continue;
                const Eigen::Vector3cd coeff(c1, c2, c3);
                CVec w = cols * coeff;
                const double peak = w.cwiseAbs().maxCoeff();
                if (!(peak > 0.0))
                    continue;
                normalize_peak(w);
                Eigen::MatrixXd root(eta, width);
                Eigen::Index offset = 0;
                for (std::size_t k = 0; k < models.size(); ++k) {
                    Cache& c = caches[k];
                    const Eigen::Vector3cd s = c.coeff_map * coeff / peak;
                    c.scalars[ris_index] = {s(0), s(1), s(2)};
                    const Eigen::MatrixXd part = satellite_location_root(models[k], c.scalars, cfg);
                    root.middleCols(offset, part.cols()) = part;
                    offset += part.cols();
                }
                const PebResult r = position_error_bound_from_root(root);
                ++best.evaluated;
                if (r.identifiable && r.peb < best.peb * (1.0 - kTieTolerance)) {
                    best.peb = r.peb;
                    best.best_index = here;
                    best_w = std::move(w);
                }
            }
        }
    }
    if (best_w.size() == 0)
        throw Error(ErrorCode::SingularFim, "no grid candidate yields an identifiable geometry");
    best.profile = RisProfile(std::move(best_w));
    return best;
}

struct DependenceReport {
    double peb_original = 0.0;
    double peb_projected = 0.0;
    double relative_difference = 0.0;
};

/// Compares the PEB of w with that of its projection onto col(B) for RIS
/// `ris_index`; both must coincide.
inline DependenceReport profile_dependence_check(const CVec& w, const SteeringBasis& basis,
                                                 std::span<const SatelliteModel> models,
                                                 std::span<const CVec> profiles, const SignalConfig& cfg,
                                                 std::size_t ris_index)
{
    if (ris_index >= profiles.size())
        throw Error(ErrorCode::IndexOutOfRange, "RIS index out of range");
    std::vector<CVec> original(profiles.begin(), profiles.end());
    original[ris_index] = w;
    std::vector<CVec> projected = original;
    projected[ris_index] = basis.project(w);

    const PebResult a = evaluate_peb(models, original, cfg);
    const PebResult b = evaluate_peb(models, projected, cfg);
    if (!a.identifiable || !b.identifiable)
        throw Error(ErrorCode::SingularFim, "RIS path carries no position information for this profile");
    return {a.peb, b.peb, std::abs(a.peb - b.peb) / a.peb};
}

} // namespace leoris
