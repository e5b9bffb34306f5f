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

#include <complex>
#include <numbers>

#include <Eigen/Dense>

#include "leoris/errors.hpp"
#include "leoris/geometry.hpp"

namespace leoris {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Element positions of a half-wavelength UPA in its body frame, centred on
/// the body origin. Column index is i + nx * j (x index fastest).
struct UpaGeometry {
    int nx = 1;
    int ny = 1;
    Eigen::Matrix3Xd element_coords;

    Eigen::Index size() const noexcept { return element_coords.cols(); }
};

inline UpaGeometry upa_coordinates(int nx, int ny, double wavelength)
{
    if (nx < 1 || ny < 1)
        throw Error(ErrorCode::InvalidDimension, "UPA needs nx >= 1 and ny >= 1");
    if (!(wavelength > 0.0))
        throw Error(ErrorCode::InvalidDimension, "wavelength must be positive");
    UpaGeometry geom{nx, ny, Eigen::Matrix3Xd::Zero(3, nx * ny)};
    const double spacing = wavelength / 2.0;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int col = i + nx * j;
            geom.element_coords(0, col) = (i - 0.5 * (nx - 1)) * spacing;
            geom.element_coords(1, col) = (j - 0.5 * (ny - 1)) * spacing;
        }
    }
    return geom;
}

inline Vec3 direction_vector(const AnglePair& angle)
{
    const double ca = std::cos(angle.az), sa = std::sin(angle.az);
    const double ce = std::cos(angle.el), se = std::sin(angle.el);
    return {ca * ce, sa * ce, se};
}

inline Vec3 direction_vector_d_az(const AnglePair& angle)
{
    const double ce = std::cos(angle.el);
    return {-std::sin(angle.az) * ce, std::cos(angle.az) * ce, 0.0};
}

inline Vec3 direction_vector_d_el(const AnglePair& angle)
{
    const double se = std::sin(angle.el);
    return {-std::cos(angle.az) * se, -std::sin(angle.az) * se, std::cos(angle.el)};
}

namespace detail {

inline double wavenumber(double carrier_hz)
{
    return 2.0 * std::numbers::pi * carrier_hz / kSpeedOfLight;
}

} // namespace detail

/// a(theta) = exp(-j k P^T t(theta)), narrowband at the carrier.
inline CVec array_response(const UpaGeometry& geom, const AnglePair& angle, double carrier_hz)
{
    const double k = detail::wavenumber(carrier_hz);
    const Eigen::VectorXd proj = geom.element_coords.transpose() * direction_vector(angle);
    CVec out(geom.size());
    for (Eigen::Index i = 0; i < out.size(); ++i)
        out(i) = std::polar(1.0, -k * proj(i));
    return out;
}

struct ArrayResponseJacobian {
    CVec d_az;
    CVec d_el;
};

inline ArrayResponseJacobian array_response_jacobian(const UpaGeometry& geom, const AnglePair& angle,
                                                     double carrier_hz)
{
    const double k = detail::wavenumber(carrier_hz);
    const CVec a = array_response(geom, angle, carrier_hz);
    const Eigen::VectorXd g_az = geom.element_coords.transpose() * direction_vector_d_az(angle);
    const Eigen::VectorXd g_el = geom.element_coords.transpose() * direction_vector_d_el(angle);
    const cplx factor(0.0, -k);
    return {(factor * g_az.cast<cplx>()).cwiseProduct(a), (factor * g_el.cast<cplx>()).cwiseProduct(a)};
}

/// Cascade vector b_r = a_r(phi_ru) .* a_r(phi_sr) and its derivatives with
/// respect to phi_ru (phi_sr is known and held fixed).
struct RisCascade {
    CVec b;
    CVec d_az;
    CVec d_el;
};

inline RisCascade ris_cascade_vector(const UpaGeometry& geom, const AnglePair& phi_ru,
                                     const AnglePair& phi_sr, double carrier_hz)
{
    const CVec incoming = array_response(geom, phi_sr, carrier_hz);
    const CVec outgoing = array_response(geom, phi_ru, carrier_hz);
    const auto jac = array_response_jacobian(geom, phi_ru, carrier_hz);
    return {outgoing.cwiseProduct(incoming), jac.d_az.cwiseProduct(incoming),
            jac.d_el.cwiseProduct(incoming)};
}

} // namespace leoris
