/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 the aalsim authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "aalsim/config.hpp"
#include "aalsim/errors.hpp"
#include "aalsim/report.hpp"
#include "aalsim/sim.hpp"
#include "aalsim/trace.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitScenarioFailure = 1;
constexpr int kExitConfigError = 2;

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string format = "json";
    std::string out_path;
    bool emit_trace = false;
    bool strict = false;
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) aalsim::fail(aalsim::Errc::io_error, "cannot write " + path);
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) aalsim::fail(aalsim::Errc::io_error, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void emit(const CommonOpts& opts, const std::string& report_text) {
    if (opts.out_path.empty())
        std::cout << report_text;
    else
        write_file(opts.out_path, report_text);
}

int scenario_exit_code(const aalsim::MetricsReport& report, bool strict) {
    if (report.aggregate.slots_failed > 0) return kExitScenarioFailure;
    if (strict && report.aggregate.deadline_misses > 0) return kExitScenarioFailure;
    return kExitOk;
}

int cmd_run(const CommonOpts& opts) {
    aalsim::ScenarioConfig cfg = aalsim::load_config_file(opts.config_path);
    aalsim::RunResult result = aalsim::run_scenario(cfg, opts.seed);
    emit(opts, opts.format == "csv" ? aalsim::report_to_csv(result.report)
                                    : aalsim::report_to_json(result.report));
    if (opts.emit_trace) {
        if (opts.out_path.empty())
            aalsim::fail(aalsim::Errc::config_invalid, "--emit-trace requires --out");
        write_file(opts.out_path + ".trace", result.trace_text);
    }
    return scenario_exit_code(result.report, opts.strict);
}

int cmd_compare(const CommonOpts& opts) {
    aalsim::ScenarioConfig cfg = aalsim::load_config_file(opts.config_path);
    aalsim::CompareOutcome outcome = aalsim::compare_modes(cfg, opts.seed);
    emit(opts, opts.format == "csv" ? aalsim::compare_to_csv(outcome)
                                    : aalsim::compare_to_json(outcome));
    if (opts.emit_trace) {
        if (opts.out_path.empty())
            aalsim::fail(aalsim::Errc::config_invalid, "--emit-trace requires --out");
        write_file(opts.out_path + ".inline.trace", outcome.inline_run.trace_text);
        write_file(opts.out_path + ".lookaside.trace", outcome.lookaside_run.trace_text);
    }
    std::fprintf(stderr, "inline transfers/slot: %llu, lookaside transfers/slot: %llu, ratio %s\n",
                 static_cast<unsigned long long>(
                     outcome.inline_run.report.aggregate.host_device_transfers /
                     std::max<std::uint32_t>(1, outcome.inline_run.report.num_slots)),
                 static_cast<unsigned long long>(
                     outcome.lookaside_run.report.aggregate.host_device_transfers /
                     std::max<std::uint32_t>(1, outcome.lookaside_run.report.num_slots)),
                 aalsim::fmt_double(outcome.transfer_ratio).c_str());
    std::fprintf(stderr, "functional hash inline:    %llu\n",
                 static_cast<unsigned long long>(
                     outcome.inline_run.report.aggregate.functional_hash));
    std::fprintf(stderr, "functional hash lookaside: %llu (%s)\n",
                 static_cast<unsigned long long>(
                     outcome.lookaside_run.report.aggregate.functional_hash),
                 outcome.outputs_match ? "outputs match" : "OUTPUTS DIVERGE");
    if (!outcome.outputs_match) return kExitScenarioFailure;
    int rc_inline = scenario_exit_code(outcome.inline_run.report, opts.strict);
    int rc_lookaside = scenario_exit_code(outcome.lookaside_run.report, opts.strict);
    return rc_inline != kExitOk ? rc_inline : rc_lookaside;
}

int cmd_validate(const std::string& config_path) {
    aalsim::load_config_file(config_path);
    std::cout << "OK\n";
    return kExitOk;
}

int cmd_list_profiles() {
    std::cout << "profile          mode       description\n";
    std::cout << "fec_lookaside    lookaside  channel encode/decode jobs, host invokes per block\n";
    std::cout << "high_phy_inline  inline     full L1 pipeline on the accelerator, egress to NIC\n";
    return kExitOk;
}

int cmd_trace_diff(const std::string& a_path, const std::string& b_path) {
    std::string a = read_file(a_path);
    std::string b = read_file(b_path);
    aalsim::TraceDiff d = aalsim::diff_traces(a, b);
    if (d.identical) {
        std::cout << "identical\n";
        return kExitOk;
    }
    std::cout << "divergence at line " << d.line << "\n";
    std::cout << "< " << d.left << "\n";
    std::cout << "> " << d.right << "\n";
    return kExitScenarioFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"O-RAN AAL semantics and inline/lookaside offload simulator"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string validate_path;
    std::string diff_a, diff_b;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("--config", opts.config_path, "scenario config JSON")->required();
        cmd->add_option("--seed", opts.seed, "deterministic run seed");
        cmd->add_option("--format", opts.format, "report format")
            ->check(CLI::IsMember({"json", "csv"}));
        cmd->add_option("--out", opts.out_path, "report output path (default stdout)");
        cmd->add_flag("--emit-trace", opts.emit_trace, "write the event trace next to --out");
        cmd->add_flag("--strict", opts.strict, "exit 1 on deadline misses");
    };

    CLI::App* run = app.add_subcommand("run", "run one scenario");
    add_common(run, true);
    CLI::App* compare = app.add_subcommand("compare", "run the same workload inline and lookaside");
    add_common(compare, true);
    CLI::App* validate = app.add_subcommand("validate-config", "check a config and exit");
    validate->add_option("--config", validate_path, "scenario config JSON")->required();
    app.add_subcommand("list-profiles", "list the acceleration profiles");
    CLI::App* tdiff = app.add_subcommand("trace-diff", "compare two trace files");
    tdiff->add_option("a", diff_a, "first trace")->required();
    tdiff->add_option("b", diff_b, "second trace")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(opts);
        if (compare->parsed()) return cmd_compare(opts);
        if (validate->parsed()) return cmd_validate(validate_path);
        if (app.get_subcommand("list-profiles")->parsed()) return cmd_list_profiles();
        if (tdiff->parsed()) return cmd_trace_diff(diff_a, diff_b);
    } catch (const aalsim::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == aalsim::Errc::config_invalid || e.code() == aalsim::Errc::io_error
                   ? kExitConfigError
                   : kExitScenarioFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitScenarioFailure;
    }
    return kExitOk;
}
