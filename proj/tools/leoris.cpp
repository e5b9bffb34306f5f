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

// Command-line front end: evaluate, sweep, optimize.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "leoris/config.hpp"
#include "leoris/csv.hpp"
#include "leoris/errors.hpp"
#include "leoris/experiment.hpp"

namespace {

enum ExitCode : int { kOk = 0, kValidation = 2, kSingular = 3, kIo = 4 };

int exit_code_for(leoris::ErrorCode code)
{
    using leoris::ErrorCode;
    switch (code) {
    case ErrorCode::SingularFim:
    case ErrorCode::RankDeficient:
        return kSingular;
    case ErrorCode::IoError:
        return kIo;
    default:
        return kValidation;
    }
}

struct CommonOptions {
    std::string config_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> scheme;
    std::optional<std::string> grid;
    bool bs_mode = false;
};

void add_common(CLI::App* cmd, CommonOptions& opt)
{
    cmd->add_option("--config", opt.config_path, "JSON experiment config (defaults if omitted)");
    cmd->add_option("--out", opt.out_path, "output file");
    cmd->add_option("--seed", opt.seed, "base seed");
    cmd->add_option("--scheme", opt.scheme, "random | directional | proposed");
    cmd->add_option("--grid", opt.grid, "coefficient grid, e.g. \"c1=0,0.5,1;mag=0,0.5,1;phases=4\"");
    cmd->add_flag("--bs-mode", opt.bs_mode, "replace the constellation with a terrestrial base station");
}

leoris::ExperimentConfig resolve(const CommonOptions& opt)
{
    leoris::ExperimentConfig cfg = opt.config_path.empty() ? leoris::ExperimentConfig{}
                                                           : leoris::load_config(opt.config_path);
    if (opt.seed)
        cfg.beamforming.seed = *opt.seed;
    if (opt.scheme) {
        cfg.beamforming.scheme = leoris::parse_scheme(*opt.scheme);
        cfg.sweep.schemes = {cfg.beamforming.scheme};
    }
    if (opt.grid)
        cfg.beamforming.grid = leoris::parse_grid_spec(*opt.grid);
    if (opt.bs_mode)
        cfg.scenario.bs_mode = true;
    cfg.validate();
    return cfg;
}

nlohmann::json row_json(const leoris::EvaluationRow& row)
{
    return {{"scheme", row.scheme}, {"n_ris", row.n_ris},       {"peb_m", row.peb_m},
            {"seed", row.seed},     {"status", row.status},     {"wall_time_s", row.wall_time_s}};
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw leoris::Error(leoris::ErrorCode::IoError, "cannot open '" + path + "' for writing");
    out << text;
    if (!out)
        throw leoris::Error(leoris::ErrorCode::IoError, "write to '" + path + "' failed");
}

int cmd_evaluate(const CommonOptions& opt)
{
    const auto cfg = resolve(opt);
    leoris::EvaluationRow row = leoris::run_evaluate(cfg);
    std::cout << row_json(row).dump() << '\n';
    if (!opt.out_path.empty()) {
        leoris::SweepResult result{{row}, leoris::provenance_line(cfg)};
        leoris::emit_csv(result, opt.out_path);
    }
    return kOk;
}

int cmd_sweep(const CommonOptions& opt, unsigned workers)
{
    const auto cfg = resolve(opt);
    const leoris::SweepResult result = leoris::run_sweep(cfg, workers);
    if (opt.out_path.empty() || opt.out_path == "-")
        leoris::write_csv(result, std::cout);
    else
        leoris::emit_csv(result, opt.out_path);
    std::size_t failed = 0;
    for (const auto& r : result.rows)
        failed += r.status != "ok";
    std::cerr << result.rows.size() << " rows, " << failed << " not ok\n";
    return kOk;
}

int cmd_optimize(const CommonOptions& opt)
{
    auto cfg = resolve(opt);
    cfg.beamforming.scheme = leoris::Scheme::Proposed;
    const leoris::OptimizeReport report = leoris::run_optimize(cfg);
    nlohmann::json doc{{"peb_m", report.peb_m}, {"seed", cfg.beamforming.seed}};
    auto& profiles = doc["profiles"] = nlohmann::json::array();
    for (const auto& w : report.profiles) {
        nlohmann::json elems = nlohmann::json::array();
        for (Eigen::Index i = 0; i < w.size(); ++i)
            elems.push_back({w(i).real(), w(i).imag()});
        profiles.push_back(std::move(elems));
    }
    if (opt.out_path.empty() || opt.out_path == "-") {
        std::cout << doc.dump(2) << '\n';
    } else {
        write_text(opt.out_path, doc.dump(2) + "\n");
        std::cout << nlohmann::json{{"peb_m", report.peb_m}, {"out", opt.out_path}}.dump() << '\n';
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Position error bounds and RIS beamforming for LEO satellite localization"};
    app.set_version_flag("--version", std::string(LEORIS_VERSION));
    app.require_subcommand(1);

    CommonOptions eval_opt, sweep_opt, opt_opt;
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    auto* evaluate = app.add_subcommand("evaluate", "PEB of one scenario under the configured scheme");
    add_common(evaluate, eval_opt);
    auto* sweep = app.add_subcommand("sweep", "RIS-size or satellite-count sweep to CSV");
    add_common(sweep, sweep_opt);
    sweep->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    auto* optimize = app.add_subcommand("optimize", "design RIS profiles with the subspace grid search");
    add_common(optimize, opt_opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kValidation;
    }

    try {
        if (evaluate->parsed())
            return cmd_evaluate(eval_opt);
        if (sweep->parsed())
            return cmd_sweep(sweep_opt, workers);
        return cmd_optimize(opt_opt);
    } catch (const leoris::Error& e) {
        std::cerr << nlohmann::json{{"status", std::string(leoris::to_string(e.code()))}, {"message", e.what()}}.dump()
                  << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"status", "InternalError"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
}
