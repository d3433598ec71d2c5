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

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cgaudit/dispatch.hpp"
#include "cgaudit/event_model.hpp"
#include "cgaudit/object_store.hpp"
#include "cgaudit/policy.hpp"
#include "cgaudit/prov_document.hpp"
#include "cgaudit/provenance.hpp"
#include "cgaudit/ring_buffer.hpp"

namespace cgaudit {

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

struct ScenarioCgroup {
    std::string name;
    std::string parent;  // "/" is the root
};

struct ScenarioTask {
    std::uint64_t pid = 0;
    std::string cgroup;
};

struct ScenarioPolicy {
    Policy policy;
    std::string cgroup = "/";
    // Tasks bound when first seen; tasks executing policy.subject are bound
    // after a successful execve.
    std::vector<std::uint64_t> bind_pids;
};

struct ScenarioCapture {
    std::vector<std::string> cgroups{"/"};
    CaptureOptions options;
};

struct Scenario {
    std::vector<ScenarioCgroup> cgroups;
    std::vector<ScenarioTask> tasks;
    std::string default_cgroup = "/";  // placement of tasks not listed
    std::optional<ScenarioCapture> capture;
    std::vector<ScenarioPolicy> policies;
    std::vector<KernelObjectId> opaque;
    std::size_t ring_capacity = 1024;
    OverflowPolicy overflow = OverflowPolicy::block;
    std::optional<std::string> trace;  // path, relative to the scenario file

    // Capture attached at the root, no policies.
    static Scenario capture_everywhere(CaptureOptions options = {});
    // Throws Error(ScenarioError) for unresolved references or bad fields.
    static Scenario parse(std::string_view json_text, const std::string &base_dir = ".");
    static Scenario load(const std::string &path);
    void validate() const;
};

// ---------------------------------------------------------------------------
// End to end
// ---------------------------------------------------------------------------

struct RunStats {
    std::uint64_t syscalls = 0;
    std::uint64_t aborted_syscalls = 0;  // stopped by a deny
    std::uint64_t hook_events = 0;
    std::array<std::uint64_t, kHookCount> per_hook{};
    std::uint64_t denied_events = 0;
    std::uint64_t programs_run = 0;
    std::uint64_t elements_pushed = 0;
    std::uint64_t elements_serialized = 0;
    std::uint64_t elements_dropped = 0;
    std::uint64_t producer_waits = 0;
    std::uint64_t dangling_edges = 0;
    std::uint64_t violations = 0;
    std::uint64_t violations_dropped = 0;
    CaptureCounters capture;
    StorageStats storage;
    std::size_t live_objects_holding_storage = 0;
    std::size_t live_objects = 0;

    std::string to_json() const;
};

struct RunResult {
    ProvDocument document;
    std::vector<ViolationRecord> violations;
    RunStats stats;
    int exit_status = 0;
};

// Dispatch -> capture -> ring buffer -> serializer, with the serializer on
// its own thread. When `stream` is given every element is also written to it
// as one line.
RunResult run_end_to_end(const Scenario &scenario, const std::vector<SyscallRecord> &trace,
                         std::ostream *stream = nullptr);

// ---------------------------------------------------------------------------
// Workloads
// ---------------------------------------------------------------------------

struct WorkloadSpec {
    std::string name;  // fileserver, webserver, fork-tree, fig4-scenario, random
    std::size_t size = 100;
    std::uint64_t seed = 1;
    // Close every object and exit every task at the end.
    bool teardown = true;
};

std::vector<std::string> workload_names();
// Deterministic in the spec. Throws Error(UnknownWorkload).
std::vector<SyscallRecord> generate_trace(const WorkloadSpec &spec);

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

enum class BenchSuite : std::uint8_t { invocation, storage, policy };
std::string_view to_string(BenchSuite s) noexcept;
BenchSuite parse_bench_suite(std::string_view name);

struct BenchRow {
    std::string name;      // configuration
    std::string workload;  // rows are only compared within one workload
    double mean_ns = 0;
    double p50_ns = 0;
    double p99_ns = 0;
    std::uint64_t events = 0;
    double programs_per_event = 0;
};

struct BenchRatio {
    std::string name;
    std::string workload;
    std::string baseline;
    double ratio = 0;
};

struct BenchReport {
    BenchSuite suite = BenchSuite::invocation;
    std::uint64_t seed = 0;
    std::vector<BenchRow> rows;
    std::vector<BenchRatio> ratios;

    const BenchRow *row(std::string_view name, std::string_view workload) const;
    std::string to_text() const;
    std::string to_json() const;
};

struct BenchOptions {
    std::uint64_t seed = 1;
    std::size_t batches = 31;
    std::size_t batch_events = 2000;
    std::uint32_t depth = 4;  // hierarchy depth for the invocation suite
};

BenchReport run_bench(BenchSuite suite, const BenchOptions &options = {});

// Coefficient of variation of the per-workload ratios of one configuration.
double ratio_cv(const BenchReport &report, std::string_view name);

}  // namespace cgaudit
