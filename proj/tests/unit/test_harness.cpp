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

#include <doctest.h>

#include <numeric>
#include <sstream>

#include "cgaudit/error.hpp"
#include "cgaudit/harness.hpp"
#include "cgaudit/motif.hpp"
#include "support.hpp"

using namespace cgaudit;

namespace {

const std::string kScenarios = std::string(CGAUDIT_TEST_DATA) + "/scenarios";

std::string trace_text(const std::vector<SyscallRecord> &t) {
    std::ostringstream out;
    write_trace(out, t);
    return out.str();
}

void check_conservation(const RunResult &r) {
    const auto &s = r.stats;
    CHECK(s.elements_pushed == s.elements_serialized + s.elements_dropped);
    CHECK(std::accumulate(s.per_hook.begin(), s.per_hook.end(), std::uint64_t{0}) == s.hook_events);
    CHECK(s.live_objects_holding_storage <= s.live_objects);
    CHECK(s.storage.live_count == s.storage.created_total - s.storage.reclaimed_total);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("pipe scenario end to end") {
    const auto scenario = Scenario::load(kScenarios + "/pipe.json");
    const auto trace = generate_trace({"fig4-scenario", 0, 1, false});
    CHECK(trace == fig4_trace());
    const auto r = run_end_to_end(scenario, trace);
    const auto m = match(r.document, program_motif(trace));
    CHECK_MESSAGE(m.matched, (m.mismatches.empty() ? "" : m.mismatches[0]));
    CHECK(r.document.dangling_edges() == 0);
    check_conservation(r);
}

TEST_CASE("capture scoped to another cgroup sees nothing") {
    const auto scenario = Scenario::load(kScenarios + "/capture_child1.json");
    const auto r = run_end_to_end(scenario, generate_trace({"fileserver", 300, 3}));
    CHECK(r.document.empty());
    CHECK(r.stats.elements_pushed == 0);
    CHECK(r.stats.programs_run == 0);
    CHECK(r.stats.hook_events > 0);
}

TEST_CASE("one violation for the port 22 connect") {
    const auto scenario = Scenario::load(kScenarios + "/foo_port22.json");
    REQUIRE(scenario.trace);
    const auto r = run_end_to_end(scenario, parse_trace_file(*scenario.trace));
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].net->port == 22);
    CHECK(r.violations[0].subject == "task::10:0");
    CHECK(r.stats.aborted_syscalls == 1);
    CHECK(r.stats.syscalls == 6);
}

TEST_CASE("execve of the subject binds the policy") {
    Scenario s;
    s.policies.push_back({parse_policy_file(std::string(CGAUDIT_TEST_DATA) + "/policies/foo.json"), "/", {}});
    std::vector<SyscallRecord> t(3);
    t[0].timestamp = 1;
    t[0].syscall = Syscall::execve;
    t[0].subject = task_id(5);
    t[0].object = inode_id("rootfs", 77);
    t[0].path = "/usr/bin/foo";
    t[0].path_depth = 2;
    t[1].timestamp = 2;
    t[1].syscall = Syscall::socket;
    t[1].subject = task_id(5);
    t[1].object = object_id(ObjectKind::socket, 1);
    t[2] = t[1];
    t[2].timestamp = 3;
    t[2].syscall = Syscall::connect;
    t[2].net = NetParams{Direction::outgoing, 22};
    const auto r = run_end_to_end(s, t);
    CHECK(r.violations.size() == 1);
}

TEST_CASE("workloads are deterministic") {
    for (const auto &name : workload_names()) {
        CAPTURE(name);
        const auto a = trace_text(generate_trace({name, 200, 7}));
        CHECK(a == trace_text(generate_trace({name, 200, 7})));
        if (name != "fig4-scenario") CHECK(a != trace_text(generate_trace({name, 200, 8})));
    }
    CHECK(generate_trace({"fileserver", 0, 1}).empty());
    CHECK_THROWS_AS(generate_trace({"nosuch", 10, 1}), Error);
}

TEST_CASE("generated traces parse back") {
    for (const auto &name : workload_names()) {
        const auto t = generate_trace({name, 150, 2});
        std::istringstream in(trace_text(t));
        CHECK(parse_trace(in) == t);
    }
}

TEST_CASE("stats conservation and storage hygiene") {
    for (const auto &name : workload_names()) {
        CAPTURE(name);
        const auto trace = generate_trace({name, 500, 11});
        const auto r = run_end_to_end(Scenario::capture_everywhere(), trace);
        check_conservation(r);
        CHECK(r.stats.elements_dropped == 0);
        CHECK(r.stats.dangling_edges == 0);
        CHECK(r.stats.storage.live_count == r.stats.live_objects_holding_storage);
        CHECK(cgtest::oracle_acyclic(r.document));
    }
}

TEST_CASE("a small dropping ring keeps the books straight") {
    auto s = Scenario::capture_everywhere();
    s.ring_capacity = 2;
    s.overflow = OverflowPolicy::drop;
    const auto r = run_end_to_end(s, generate_trace({"webserver", 2000, 4}));
    check_conservation(r);
}

TEST_CASE("a blocking ring loses nothing") {
    auto s = Scenario::capture_everywhere();
    s.ring_capacity = 1;
    const auto trace = generate_trace({"random", 1000, 9});
    const auto big = run_end_to_end(Scenario::capture_everywhere(), trace);
    const auto small = run_end_to_end(s, trace);
    CHECK(small.stats.elements_dropped == 0);
    CHECK(small.document.to_json() == big.document.to_json());
}

TEST_CASE("scenario errors") {
    auto bad = [](const std::string &text) {
        try {
            Scenario::parse(text).validate();
        } catch (const Error &e) {
            return e.code() == Errc::ScenarioError;
        }
        return false;
    };
    CHECK(bad(R"({"cgroups": [{"name": "a", "parent": "nowhere"}]})"));
    CHECK(bad(R"({"tasks": [{"pid": 1, "cgroup": "ghost"}]})"));
    CHECK(bad(R"({"capture": {"cgroups": ["ghost"]}})"));
    CHECK(bad(R"({"ring": {"capacity": 0}})"));
    CHECK(bad(R"({"surprise": 1})"));
    CHECK(bad(R"({"cgroups": [{"name": "a"}, {"name": "a"}]})"));
}

TEST_CASE("bench smoke") {
    BenchOptions o;
    o.batches = 3;
    o.batch_events = 200;
    for (auto suite : {BenchSuite::invocation, BenchSuite::storage, BenchSuite::policy}) {
        const auto rep = run_bench(suite, o);
        CHECK_FALSE(rep.rows.empty());
        CHECK_FALSE(rep.ratios.empty());
        CHECK(nlohmann::json::accept(rep.to_json()));
        for (const auto &row : rep.rows) CHECK(row.mean_ns > 0);
    }
}

}  // TEST_SUITE
