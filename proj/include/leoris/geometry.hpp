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
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "leoris/errors.hpp"

namespace leoris {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kSpeedOfLight = 299792458.0; // m/s

/// Body-frame orientation plus global position. `orientation` maps body-frame
/// coordinates to global coordinates, so its columns are the body axes.
struct Pose {
    Vec3 position = Vec3::Zero();
    Mat3 orientation = Mat3::Identity();
};

/// Azimuth from body +x toward +y, elevation from the body xy-plane toward +z.
struct AnglePair {
    double az = 0.0;
    double el = 0.0;
};

/// Element counts of a uniform planar array along body x and y.
struct ArrayDims {
    int nx = 1;
    int ny = 1;
};

struct Satellite {
    Pose pose;
    Vec3 velocity = Vec3::Zero(); // m/s
    ArrayDims array{2, 2};
};

struct Ris {
    Pose pose;
    ArrayDims array{10, 10};
};

struct Scenario {
    Vec3 ue_position = Vec3::Zero();
    double clock_offset = 0.0; // s
    std::vector<Satellite> satellites;
    std::vector<Ris> rises;

    std::size_t satellite_count() const noexcept { return satellites.size(); }
    std::size_t ris_count() const noexcept { return rises.size(); }

    /// Throws ValidationError / ZeroDistance when an invariant is broken.
    void validate() const
    {
        if (satellites.empty())
            throw Error(ErrorCode::ValidationError, "scenario needs at least one satellite");
        if (!ue_position.allFinite() || !std::isfinite(clock_offset))
            throw Error(ErrorCode::ValidationError, "non-finite UE position or clock offset");
        for (const auto& sat : satellites) {
            if (!sat.pose.position.allFinite() || !sat.velocity.allFinite())
                throw Error(ErrorCode::ValidationError, "non-finite satellite state");
            if ((sat.pose.position - ue_position).norm() <= 0.0)
                throw Error(ErrorCode::ZeroDistance, "satellite coincides with UE");
            for (const auto& ris : rises)
                if ((sat.pose.position - ris.pose.position).norm() <= 0.0)
                    throw Error(ErrorCode::ZeroDistance, "satellite coincides with RIS");
        }
        for (const auto& ris : rises)
            if ((ris.pose.position - ue_position).norm() <= 0.0)
                throw Error(ErrorCode::ZeroDistance, "RIS coincides with UE");
    }
};

/// Z-Y-X intrinsic composition R = Rz(yaw) Ry(pitch) Rx(roll).
inline Mat3 rotation_from_euler(double yaw, double pitch, double roll)
{
    return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
            Eigen::AngleAxisd(roll, Vec3::UnitX()))
        .toRotationMatrix();
}

inline AnglePair direction_angles(const Pose& observer, const Vec3& target)
{
    const Vec3 diff = target - observer.position;
    const double dist = diff.norm();
    if (!(dist > 0.0))
        throw Error(ErrorCode::ZeroDistance, "target equals observer position");
    const Vec3 u = observer.orientation.transpose() * diff / dist;
    // clamp guards asin against |u_z| exceeding 1 by an ulp
    return {std::atan2(u.y(), u.x()), std::asin(std::clamp(u.z(), -1.0, 1.0))};
}

inline double path_delay(const Vec3& a, const Vec3& b, double offset)
{
    const double dist = (a - b).norm();
    if (!(dist > 0.0))
        throw Error(ErrorCode::ZeroDistance, "path endpoints coincide");
    return dist / kSpeedOfLight + offset;
}

/// Doppler shift seen on the path from a moving emitter at `p_from` to a static
/// endpoint `p_to`.
inline double doppler_shift(const Vec3& velocity, const Vec3& p_from, const Vec3& p_to,
                            double wavelength)
{
    const Vec3 diff = p_to - p_from;
    const double dist = diff.norm();
    if (!(dist > 0.0))
        throw Error(ErrorCode::ZeroDistance, "path endpoints coincide");
    return velocity.dot(diff) / (wavelength * dist);
}

inline double wavelength_of(double carrier_hz) { return kSpeedOfLight / carrier_hz; }

} // namespace leoris
