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
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "leoris/errors.hpp"
#include "leoris/experiment.hpp"

namespace leoris {

inline constexpr const char* kCsvHeader = "sweep_var,sweep_value,scheme,n_ris,peb_m,seed,status";

/// %.9g, with inf/nan spelled out.
inline std::string format_real(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::string format_row(const EvaluationRow& row)
{
    return row.sweep_var + "," + format_real(row.sweep_value) + "," + row.scheme + "," + std::to_string(row.n_ris) +
           "," + format_real(row.peb_m) + "," + std::to_string(row.seed) + "," + row.status;
}

inline void write_csv(const SweepResult& result, std::ostream& out)
{
    if (!result.provenance.empty())
        out << "# " << result.provenance << '\n';
    out << kCsvHeader << '\n';
    for (const auto& row : result.rows)
        out << format_row(row) << '\n';
}

inline void emit_csv(const SweepResult& result, const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    write_csv(result, out);
    out.flush();
    if (!out)
        throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
}

inline SweepResult read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    SweepResult result;
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.rfind("# ", 0) == 0) {
            result.provenance = line.substr(2);
            continue;
        }
        if (!header_seen) {
            if (line != kCsvHeader)
                throw Error(ErrorCode::ParseError, "unexpected CSV header in '" + path + "'");
            header_seen = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ','))
            f.push_back(item);
        if (f.size() != 7)
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 7 fields");
        try {
            EvaluationRow row;
            row.sweep_var = f[0];
            row.sweep_value = std::stod(f[1]);
            row.scheme = f[2];
            row.n_ris = std::stoi(f[3]);
            row.peb_m = std::stod(f[4]);
            row.seed = std::stoull(f[5]);
            row.status = f[6];
            result.rows.push_back(row);
        } catch (const std::exception&) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": malformed field");
        }
    }
    if (!header_seen)
        throw Error(ErrorCode::ParseError, "missing CSV header in '" + path + "'");
    return result;
}

} // namespace leoris
