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

#include <stdexcept>
#include <string>
#include <string_view>

namespace leoris {

enum class ErrorCode {
    ZeroDistance,
    InvalidDimension,
    IndexOutOfRange,
    DimensionMismatch,
    TooLarge,
    SingularFim,
    RankDeficient,
    EmptyGrid,
    LayoutMismatch,
    InfeasibleProfile,
    ParseError,
    ValidationError,
    IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::ZeroDistance: return "ZeroDistance";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::SingularFim: return "SingularFim";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::InfeasibleProfile: return "InfeasibleProfile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace leoris
