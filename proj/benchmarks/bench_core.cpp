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

#include <benchmark/benchmark.h>

#include <mutex>
#include <sstream>
#include <unordered_map>

#include "cgaudit/dispatch.hpp"
#include "cgaudit/harness.hpp"
#include "cgaudit/pairing.hpp"
#include "cgaudit/policy.hpp"

using namespace cgaudit;

namespace {

ProgramPtr allow_all(HookId hook) {
    return make_program("allow", hook, [](const HookEvent &, ProgramContext &) { return ReturnCode::allow(); });
}

// Chain of `depth` cgroups below the root with `per_level` programs each.
void BM_DispatchChain(benchmark::State &state) {
    const auto depth = static_cast<std::size_t>(state.range(0));
    const auto per_level = static_cast<std::size_t>(state.range(1));
    CgroupTree tree;
    ObjectStore store;
    TaskCgroupMap map;
    CgroupId leaf = tree.root();
    for (std::size_t d = 0; d < depth; ++d) {
        leaf = tree.create(leaf, "c" + std::to_string(d));
        for (std::size_t p = 0; p < per_level; ++p) tree.attach(leaf, HookId::socket_bind, allow_all(HookId::socket_bind));
    }
    const auto task = task_id(1);
    map.assign(task, leaf);
    Dispatcher d(tree, store);
    HookEvent ev;
    ev.hook = HookId::socket_bind;
    ev.subject = task;
    for (auto _ : state) benchmark::DoNotOptimize(d.dispatch_event(ev, map));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_DispatchChain)->ArgsProduct({{1, 2, 4, 8}, {1, 4}});

constexpr std::size_t kObjects = 4096;

std::vector<KernelObjectId> bench_ids() {
    std::vector<KernelObjectId> ids;
    for (std::size_t i = 0; i < kObjects; ++i) ids.push_back(inode_id("fs-" + std::to_string(i % 8), 1000 + i));
    return ids;
}

void BM_StorageLocal(benchmark::State &state) {
    ObjectStore store;
    const SlotKey slot = store.slot("bench");
    std::vector<StorageHandle> handles;
    for (const auto &id : bench_ids()) {
        handles.push_back(*store.storage_get(id, true));
        handles.back().put(slot, Bytes(8, 0));
    }
    std::size_t i = 0;
    for (auto _ : state) handles[(i++ * 2654435761u) % kObjects].update(slot, [](std::optional<Bytes> &v) { ++(*v)[0]; });
}
BENCHMARK(BM_StorageLocal);

void BM_StorageMap(benchmark::State &state) {
    const auto ids = bench_ids();
    std::mutex mutex;
    std::unordered_map<std::string, Bytes> map;
    for (const auto &id : ids) map[id.to_string() + "/bench"] = Bytes(8, 0);
    std::size_t i = 0;
    for (auto _ : state) {
        const auto &id = ids[(i++ * 2654435761u) % kObjects];
        std::lock_guard lock(mutex);
        ++map.find(id.to_string() + "/bench")->second[0];
    }
}
BENCHMARK(BM_StorageMap);

const char *kFsOnly = R"({"subject": "/usr/bin/bench", "rules": {"filesystem": {
    "default": {"write": "deny"},
    "allow": [{"path": "/tmp/**", "perms": ["write"]}, {"path": "/srv/**", "perms": ["write"]}]}}})";

// Policy programs on every hook of a fileserver trace, state.range(0) = 1 for
// the compiled set, 0 for the interpreter.
void BM_Policy(benchmark::State &state) {
    const Policy policy = parse_policy(kFsOnly);
    const auto set = state.range(0) ? compile(policy) : compile_interpreter(policy);
    CgroupTree tree;
    ObjectStore store;
    TaskCgroupMap map;
    set.attach(tree, tree.root());
    Dispatcher d(tree, store);
    const auto trace = generate_trace({"fileserver", 2000, 1, false});
    std::vector<HookEvent> events;
    for (const auto &rec : trace) {
        map.assign(rec.subject, tree.root());
        for (const auto &ev : expand_syscall(rec)) events.push_back(ev);
    }
    std::size_t i = 0;
    std::uint64_t programs = 0;
    for (auto _ : state) programs += d.dispatch_event(events[i++ % events.size()], map).executed.size();
    state.counters["programs_per_event"] =
        benchmark::Counter(static_cast<double>(programs) / static_cast<double>(state.iterations()));
}
BENCHMARK(BM_Policy)->Arg(1)->Arg(0);

// Whole pipeline: dispatch, capture, ring buffer and serializer.
void BM_CaptureEndToEnd(benchmark::State &state) {
    const auto trace = generate_trace({"webserver", static_cast<std::size_t>(state.range(0)), 2});
    const auto scenario = Scenario::capture_everywhere();
    for (auto _ : state) benchmark::DoNotOptimize(run_end_to_end(scenario, trace));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * trace.size()));
}
BENCHMARK(BM_CaptureEndToEnd)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_PairingDiamonds(benchmark::State &state) {
    std::ostringstream out;
    for (std::int64_t i = 0; i < state.range(0); ++i) {
        out << "branch a" << i << " b" << i << "\na" << i << ":\nget d\nput d\ngoto j" << i << "\nb" << i
            << ":\nget d\nput d\nj" << i << ":\n";
    }
    out << "exit\n";
    const auto program = ProgramGraph::parse(out.str());
    for (auto _ : state) benchmark::DoNotOptimize(check_pairing(program));
}
BENCHMARK(BM_PairingDiamonds)->Arg(8)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
