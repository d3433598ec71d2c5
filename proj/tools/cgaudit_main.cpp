// SPDX-License-Identifier: Apache-2.0
/*
Copyright (C) 2026 The cgaudit Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cgaudit/error.hpp"
#include "cgaudit/event_model.hpp"
#include "cgaudit/harness.hpp"
#include "cgaudit/motif.hpp"
#include "cgaudit/pairing.hpp"
#include "cgaudit/policy.hpp"
#include "cgaudit/prov_document.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kMismatch = 1;
constexpr int kUsage = 2;

// Writes to the named file, or stdout for "" and "-".
class Output {
public:
    explicit Output(const std::string &path) {
        if (!path.empty() && path != "-") {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw cgaudit::Error(cgaudit::Errc::SinkError, "cannot write " + path);
        }
    }
    std::ostream &stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

struct Common {
    std::uint64_t seed = 1;
    std::string out;
};

void add_common(CLI::App *cmd, Common &c) {
    cmd->add_option("--seed", c.seed, "Seed for anything pseudo-random");
    cmd->add_option("--out", c.out, "Output file (stdout when omitted)");
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    Common common;
    std::string trace;
    std::string scenario;
    std::string prov_out;
    std::string violations_out;
    bool no_merge = false;
    bool no_avoidance = false;
    bool drop_on_full = false;
    std::size_t ring_capacity = 0;
    bool stats = false;
    bool fail_on_violation = false;
};

int simulate(const SimulateArgs &a) {
    cgaudit::Scenario scenario =
        a.scenario.empty() ? cgaudit::Scenario::capture_everywhere() : cgaudit::Scenario::load(a.scenario);
    if (scenario.capture) {
        if (a.no_merge) scenario.capture->options.merge = false;
        if (a.no_avoidance) scenario.capture->options.version_avoidance = false;
    }
    if (a.drop_on_full) scenario.overflow = cgaudit::OverflowPolicy::drop;
    if (a.ring_capacity) scenario.ring_capacity = a.ring_capacity;

    std::string trace_path = a.trace;
    if (trace_path.empty() && scenario.trace) trace_path = *scenario.trace;
    if (trace_path.empty()) throw CLI::ValidationError("--trace", "no trace given and the scenario names none");
    const auto trace = cgaudit::parse_trace_file(trace_path);

    std::unique_ptr<Output> stream;
    if (!a.common.out.empty()) stream = std::make_unique<Output>(a.common.out);
    const auto result = cgaudit::run_end_to_end(scenario, trace, stream ? &stream->stream() : nullptr);

    if (!a.prov_out.empty()) {
        Output prov(a.prov_out);
        prov.stream() << result.document.to_json() << "\n";
    }
    if (!a.violations_out.empty()) {
        Output v(a.violations_out);
        for (const auto &rec : result.violations) v.stream() << cgaudit::violation_to_line(rec) << "\n";
    } else {
        for (const auto &rec : result.violations) std::cerr << "violation " << cgaudit::violation_to_line(rec) << "\n";
    }
    if (a.stats) {
        auto stats = nlohmann::ordered_json::parse(result.stats.to_json());
        stats["seed"] = a.common.seed;
        std::cout << stats.dump(2) << "\n";
    }
    if (a.fail_on_violation && !result.violations.empty()) return kMismatch;
    return kOk;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
    Common common;
    std::string trace;
    std::string prov;
    bool embed = false;
    bool no_merge = false;
    bool no_avoidance = false;
};

int verify_motifs(const VerifyArgs &a) {
    const auto trace = cgaudit::parse_trace_file(a.trace);
    const auto doc = cgaudit::ProvDocument::load(a.prov);
    cgaudit::MotifOptions options;
    options.merge = !a.no_merge;
    options.version_avoidance = !a.no_avoidance;
    const auto motif = cgaudit::program_motif(trace, options);
    const auto report =
        cgaudit::match(doc, motif, a.embed ? cgaudit::MatchMode::embed : cgaudit::MatchMode::exact);

    Output out(a.common.out);
    if (report.matched) {
        out.stream() << "match: " << motif.nodes().size() << " nodes, " << motif.edges().size() << " edges\n";
        return kOk;
    }
    out.stream() << "mismatch against motif of " << trace.size() << " syscalls\n";
    for (const auto &m : report.mismatches) out.stream() << "- " << m << "\n";
    return kMismatch;
}

// ---------------------------------------------------------------------------

struct CompileArgs {
    Common common;
    std::string in;
    bool explain = false;
};

int compile_policy(const CompileArgs &a) {
    const auto policy = cgaudit::parse_policy_file(a.in);
    const auto set = cgaudit::compile(policy);
    Output out(a.common.out);
    out.stream() << set.plan_json() << "\n";
    if (a.explain) std::cout << set.explain();
    return kOk;
}

struct PairingArgs {
    Common common;
    std::vector<std::string> files;
};

int check_pairing(const PairingArgs &a) {
    Output out(a.common.out);
    int status = kOk;
    for (const auto &file : a.files) {
        const auto graph = cgaudit::ProgramGraph::load(file);
        const auto report = cgaudit::check_pairing(graph);
        if (report.ok()) {
            out.stream() << graph.name << ": ok\n";
            continue;
        }
        status = kMismatch;
        for (const auto &v : report.violations) {
            out.stream() << graph.name << ": " << cgaudit::to_string(v.kind) << " of " << v.resource << " x"
                         << v.unmatched << " at " << v.site << " via " << v.path << "\n";
        }
    }
    return status;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    Common common;
    std::string suite = "all";
    std::size_t batches = 31;
    std::size_t batch_events = 2000;
    std::uint32_t depth = 4;
    bool json = false;
};

int bench(const BenchArgs &a) {
    cgaudit::BenchOptions opt;
    opt.seed = a.common.seed;
    opt.batches = a.batches;
    opt.batch_events = a.batch_events;
    opt.depth = a.depth;
    std::vector<cgaudit::BenchSuite> suites;
    if (a.suite == "all") {
        suites = {cgaudit::BenchSuite::invocation, cgaudit::BenchSuite::storage, cgaudit::BenchSuite::policy};
    } else {
        suites = {cgaudit::parse_bench_suite(a.suite)};
    }
    Output out(a.common.out);
    nlohmann::ordered_json all = nlohmann::ordered_json::array();
    for (auto s : suites) {
        const auto report = cgaudit::run_bench(s, opt);
        if (a.json) {
            all.push_back(nlohmann::ordered_json::parse(report.to_json()));
        } else {
            out.stream() << report.to_text();
            if (s == cgaudit::BenchSuite::invocation) {
                for (const std::string &name : {std::string("dispatch-single"), "dispatch-depth" + std::to_string(a.depth)}) {
                    out.stream() << "cv " << name << " = " << cgaudit::ratio_cv(report, name) << "\n";
                }
            }
            out.stream() << "\n";
        }
    }
    if (a.json) out.stream() << all.dump(2) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------

struct GenArgs {
    Common common;
    std::string workload;
    std::size_t size = 100;
    bool no_teardown = false;
};

int gen_trace(const GenArgs &a) {
    cgaudit::WorkloadSpec spec{a.workload, a.size, a.common.seed, !a.no_teardown};
    const auto trace = cgaudit::generate_trace(spec);
    Output out(a.common.out);
    cgaudit::write_trace(out.stream(), trace);
    return kOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"cgaudit: cgroup-scoped audit, provenance capture and policy simulator"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto *sim_cmd = app.add_subcommand("simulate", "Replay a trace through dispatch, capture and serialization");
    add_common(sim_cmd, sim.common);
    sim_cmd->add_option("--trace", sim.trace, "Trace file (JSON lines)")->check(CLI::ExistingFile);
    sim_cmd->add_option("--scenario", sim.scenario, "Scenario file")->check(CLI::ExistingFile);
    sim_cmd->add_option("--prov-out", sim.prov_out, "Consolidated provenance document");
    sim_cmd->add_option("--violations-out", sim.violations_out, "Policy violation log (JSON lines)");
    sim_cmd->add_flag("--no-merge", sim.no_merge, "Disable event merging");
    sim_cmd->add_flag("--no-version-avoidance", sim.no_avoidance, "Version on every inflow");
    sim_cmd->add_flag("--drop-on-full", sim.drop_on_full, "Drop elements when the ring buffer is full");
    sim_cmd->add_option("--ring-capacity", sim.ring_capacity, "Ring buffer capacity in elements");
    sim_cmd->add_flag("--stats", sim.stats, "Print run statistics as JSON");
    sim_cmd->add_flag("--fail-on-violation", sim.fail_on_violation, "Exit 1 when a policy violation was logged");

    VerifyArgs ver;
    auto *ver_cmd = app.add_subcommand("verify-motifs", "Check a captured document against the trace's motif");
    add_common(ver_cmd, ver.common);
    ver_cmd->add_option("--trace", ver.trace, "Trace file")->required()->check(CLI::ExistingFile);
    ver_cmd->add_option("--prov", ver.prov, "Consolidated provenance document")->required()->check(CLI::ExistingFile);
    ver_cmd->add_flag("--embed", ver.embed, "Subgraph matching (for filtered captures)");
    ver_cmd->add_flag("--no-merge", ver.no_merge, "Capture ran without merging");
    ver_cmd->add_flag("--no-version-avoidance", ver.no_avoidance, "Capture ran without version avoidance");

    CompileArgs comp;
    auto *comp_cmd = app.add_subcommand("compile-policy", "Compile a JSON policy into its program plan");
    add_common(comp_cmd, comp.common);
    comp_cmd->add_option("--in", comp.in, "Policy file")->required()->check(CLI::ExistingFile);
    comp_cmd->add_flag("--explain", comp.explain, "Print the hook to rule mapping");

    PairingArgs pair;
    auto *pair_cmd = app.add_subcommand("check-pairing", "Check acquire/release pairing of program graphs");
    add_common(pair_cmd, pair.common);
    pair_cmd->add_option("files", pair.files, "Program graph files")->required()->check(CLI::ExistingFile);

    BenchArgs bn;
    auto *bench_cmd = app.add_subcommand("bench", "Run the benchmark suites");
    add_common(bench_cmd, bn.common);
    bench_cmd->add_option("--suite", bn.suite, "invocation, storage, policy or all")
        ->check(CLI::IsMember({"invocation", "storage", "policy", "all"}));
    bench_cmd->add_option("--batches", bn.batches, "Timed batches per configuration")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--batch-events", bn.batch_events, "Events per batch")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--depth", bn.depth, "Hierarchy depth")->check(CLI::PositiveNumber);
    bench_cmd->add_flag("--json", bn.json, "JSON output");

    GenArgs gen;
    auto *gen_cmd = app.add_subcommand("gen-trace", "Generate a workload trace");
    add_common(gen_cmd, gen.common);
    gen_cmd->add_option("--workload", gen.workload, "fileserver, webserver, fork-tree, fig4-scenario, random")
        ->required();
    gen_cmd->add_option("--size", gen.size, "Number of syscalls before teardown");
    gen_cmd->add_flag("--no-teardown", gen.no_teardown, "Leave objects and tasks alive at the end");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*sim_cmd) return simulate(sim);
        if (*ver_cmd) return verify_motifs(ver);
        if (*comp_cmd) return compile_policy(comp);
        if (*pair_cmd) return check_pairing(pair);
        if (*bench_cmd) return bench(bn);
        if (*gen_cmd) return gen_trace(gen);
    } catch (const CLI::ValidationError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const cgaudit::ParseError &e) {
        std::cerr << "error: " << cgaudit::errc_name(e.code()) << " at line " << e.line() << ": " << e.what() << "\n";
        return kUsage;
    } catch (const cgaudit::Error &e) {
        std::cerr << "error: " << cgaudit::errc_name(e.code()) << ": " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
