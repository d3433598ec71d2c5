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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "cgaudit/error.hpp"
#include "cgaudit/harness.hpp"

namespace cgaudit {

std::string_view to_string(BenchSuite s) noexcept {
    switch (s) {
        case BenchSuite::invocation: return "invocation";
        case BenchSuite::storage: return "storage";
        case BenchSuite::policy: return "policy";
    }
    return "?";
}

BenchSuite parse_bench_suite(std::string_view name) {
    for (BenchSuite s : {BenchSuite::invocation, BenchSuite::storage, BenchSuite::policy}) {
        if (to_string(s) == name) return s;
    }
    throw std::invalid_argument("unknown bench suite '" + std::string(name) + "'");
}

const BenchRow *BenchReport::row(std::string_view name, std::string_view workload) const {
    for (const auto &r : rows) {
        if (r.name == name && r.workload == workload) return &r;
    }
    return nullptr;
}

std::string BenchReport::to_text() const {
    std::ostringstream out;
    char buf[256];
    out << "suite " << to_string(suite) << " seed " << seed << "\n";
    std::snprintf(buf, sizeof buf, "%-14s %-22s %10s %10s %10s %8s %9s\n", "workload", "config", "mean_ns", "p50_ns",
                  "p99_ns", "events", "progs/ev");
    out << buf;
    for (const auto &r : rows) {
        std::snprintf(buf, sizeof buf, "%-14s %-22s %10.1f %10.1f %10.1f %8llu %9.2f\n", r.workload.c_str(),
                      r.name.c_str(), r.mean_ns, r.p50_ns, r.p99_ns, static_cast<unsigned long long>(r.events),
                      r.programs_per_event);
        out << buf;
    }
    for (const auto &r : ratios) {
        std::snprintf(buf, sizeof buf, "ratio %-14s %-22s / %-12s = %.3f\n", r.workload.c_str(), r.name.c_str(),
                      r.baseline.c_str(), r.ratio);
        out << buf;
    }
    return out.str();
}

std::string BenchReport::to_json() const {
    nlohmann::ordered_json j;
    j["suite"] = std::string(to_string(suite));
    j["seed"] = seed;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto &r : rows) {
        j["rows"].push_back({{"name", r.name},
                             {"workload", r.workload},
                             {"mean_ns", r.mean_ns},
                             {"p50_ns", r.p50_ns},
                             {"p99_ns", r.p99_ns},
                             {"events", r.events},
                             {"programs_per_event", r.programs_per_event}});
    }
    j["ratios"] = nlohmann::ordered_json::array();
    for (const auto &r : ratios) {
        j["ratios"].push_back(
            {{"name", r.name}, {"workload", r.workload}, {"baseline", r.baseline}, {"ratio", r.ratio}});
    }
    return j.dump(2);
}

double ratio_cv(const BenchReport &report, std::string_view name) {
    std::vector<double> xs;
    for (const auto &r : report.ratios) {
        if (r.name == name) xs.push_back(r.ratio);
    }
    if (xs.size() < 2) return 0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return mean == 0 ? 0 : std::sqrt(var) / mean;
}

namespace {

using Clock = std::chrono::steady_clock;

// One configuration of one workload: `run(n)` executes n events and returns
// how many programs ran.
struct Case {
    std::string name;
    std::string workload;
    std::function<std::uint64_t(std::size_t)> run;
    std::vector<double> batch_ns;  // per-event time of each batch
    std::uint64_t events = 0;
    std::uint64_t programs = 0;
};

Case make_case(std::string name, std::string workload, std::function<std::uint64_t(std::size_t)> run) {
    Case c;
    c.name = std::move(name);
    c.workload = std::move(workload);
    c.run = std::move(run);
    return c;
}

double percentile(std::vector<double> xs, double q) {
    if (xs.empty()) return 0;
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return xs[lo] + (xs[hi] - xs[lo]) * (pos - static_cast<double>(lo));
}

// Batches of every case are interleaved so slow drift hits all of them alike.
void measure(std::vector<Case> &cases, const BenchOptions &opt) {
    for (auto &c : cases) c.run(std::min<std::size_t>(opt.batch_events, 256));  // warm up
    for (std::size_t b = 0; b < opt.batches; ++b) {
        for (auto &c : cases) {
            const auto t0 = Clock::now();
            const std::uint64_t programs = c.run(opt.batch_events);
            const auto t1 = Clock::now();
            const double ns = std::chrono::duration<double, std::nano>(t1 - t0).count();
            c.batch_ns.push_back(ns / static_cast<double>(opt.batch_events));
            c.events += opt.batch_events;
            c.programs += programs;
        }
    }
}

BenchReport finish(BenchSuite suite, const BenchOptions &opt, const std::vector<Case> &cases,
                   const std::string &baseline) {
    BenchReport report;
    report.suite = suite;
    report.seed = opt.seed;
    for (const auto &c : cases) {
        BenchRow row;
        row.name = c.name;
        row.workload = c.workload;
        row.mean_ns = std::accumulate(c.batch_ns.begin(), c.batch_ns.end(), 0.0) / static_cast<double>(c.batch_ns.size());
        row.p50_ns = percentile(c.batch_ns, 0.5);
        row.p99_ns = percentile(c.batch_ns, 0.99);
        row.events = c.events;
        row.programs_per_event = c.events ? static_cast<double>(c.programs) / static_cast<double>(c.events) : 0;
        report.rows.push_back(row);
    }
    // Ratios of medians, within a workload only.
    for (const auto &r : report.rows) {
        if (r.name == baseline) continue;
        const BenchRow *base = report.row(baseline, r.workload);
        if (!base || base->p50_ns <= 0) continue;
        report.ratios.push_back(BenchRatio{r.name, r.workload, baseline, r.p50_ns / base->p50_ns});
    }
    return report;
}

// The audited operation used by the invocation suite: bump a per-task counter
// kept in local storage.
ReturnCode counting_body(const HookEvent &ev, ProgramContext &ctx, SlotKey slot) {
    auto handle = ctx.store.storage_get(ev.subject, true);
    handle->update(slot, [](std::optional<Bytes> &v) {
        if (!v) v = Bytes(8, 0);
        ++(*v)[0];
    });
    return ReturnCode::allow();
}

BenchReport invocation_suite(const BenchOptions &opt) {
    ObjectStore store;
    const SlotKey slot = store.slot("bench.count");
    CgroupTree tree;
    TaskCgroupMap placement;

    const KernelObjectId flat_task = task_id(10);
    const KernelObjectId deep_task = task_id(11);
    CgroupId leaf = tree.root();
    for (std::uint32_t d = 0; d < opt.depth; ++d) leaf = tree.create(leaf, "level" + std::to_string(d + 1));
    if (opt.depth == 0) throw std::invalid_argument("hierarchy depth must be positive");
    const CgroupId flat = tree.create(tree.root(), "flat");
    placement.assign(flat_task, flat);
    placement.assign(deep_task, leaf);

    const std::vector<std::pair<std::string, HookId>> workloads = {
        {"socket", HookId::socket_create},
        {"bind", HookId::socket_bind},
        {"listen", HookId::socket_listen},
        {"accept", HookId::socket_accept},
    };
    for (const auto &[_, hook] : workloads) {
        auto body = [slot](const HookEvent &ev, ProgramContext &ctx) { return counting_body(ev, ctx, slot); };
        tree.attach(flat, hook, make_program("count", hook, body));
        // One program on every level of the deep chain; the root has none.
        for (CgroupId c = leaf; c != tree.root(); c = *tree.parent(c)) {
            tree.attach(c, hook, make_program("count", hook, body));
        }
    }
    auto dispatcher = std::make_shared<Dispatcher>(tree, store);
    const KernelObjectId sock = object_id(ObjectKind::socket, 1);

    std::vector<Case> cases;
    for (const auto &[workload, hook] : workloads) {
        HookEvent ev;
        ev.hook = hook;
        ev.object = sock;
        cases.push_back(make_case("direct", workload, [&store, slot, ev](std::size_t n) mutable {
                                 ev.subject = task_id(10);
                                 ProgramContext ctx{store, nullptr, CgroupId{0}};
                                 for (std::size_t i = 0; i < n; ++i) counting_body(ev, ctx, slot);
                                 return std::uint64_t{n};
                             }));
        cases.push_back(make_case("dispatch-single", workload, [dispatcher, &placement, ev](std::size_t n) mutable {
                                 ev.subject = task_id(10);
                                 std::uint64_t programs = 0;
                                 for (std::size_t i = 0; i < n; ++i) {
                                     programs += dispatcher->dispatch_event(ev, placement).executed.size();
                                 }
                                 return programs;
                             }));
        cases.push_back(make_case("dispatch-depth" + std::to_string(opt.depth), workload,
                             [dispatcher, &placement, ev](std::size_t n) mutable {
                                 ev.subject = task_id(11);
                                 std::uint64_t programs = 0;
                                 for (std::size_t i = 0; i < n; ++i) {
                                     programs += dispatcher->dispatch_event(ev, placement).executed.size();
                                 }
                                 return programs;
                             }));
    }
    measure(cases, opt);
    return finish(BenchSuite::invocation, opt, cases, "direct");
}

// Storage keyed by the full object identity plus slot, as a global map must be.
struct CompositeKey {
    ObjectKind kind;
    std::string fs_uuid;
    std::uint64_t local_id;
    std::uint32_t generation;
    std::uint32_t slot;
    friend bool operator==(const CompositeKey &, const CompositeKey &) = default;
};

struct CompositeKeyHash {
    std::size_t operator()(const CompositeKey &k) const noexcept {
        std::size_t h = std::hash<std::string>{}(k.fs_uuid);
        auto mix = [&h](std::uint64_t v) { h ^= std::hash<std::uint64_t>{}(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
        mix(static_cast<std::uint64_t>(k.kind));
        mix(k.local_id);
        mix(k.generation);
        mix(k.slot);
        return h;
    }
};

BenchReport storage_suite(const BenchOptions &opt) {
    constexpr std::size_t kObjects = 4096;
    ObjectStore store;
    const SlotKey slot = store.slot("bench.value");
    std::vector<KernelObjectId> ids;
    std::vector<StorageHandle> handles;
    for (std::size_t i = 0; i < kObjects; ++i) {
        ids.push_back(inode_id("fs-" + std::to_string(i % 8), 1000 + i));
        handles.push_back(*store.storage_get(ids.back(), true));
        handles.back().put(slot, Bytes(8, 0));
    }
    std::mutex map_mutex;
    std::unordered_map<CompositeKey, Bytes, CompositeKeyHash> map;
    for (const auto &id : ids) map[CompositeKey{id.kind, id.fs_uuid, id.local_id, id.generation, 0}] = Bytes(8, 0);

    // Same pseudo-random access order for both paths.
    std::mt19937_64 rng(opt.seed);
    std::vector<std::size_t> order(1 << 14);
    for (auto &o : order) o = static_cast<std::size_t>(rng() % kObjects);

    std::vector<Case> cases;
    std::size_t pos_local = 0;
    std::size_t pos_map = 0;
    cases.push_back(make_case("local-storage", "update", [&](std::size_t n) {
                             for (std::size_t i = 0; i < n; ++i) {
                                 const std::size_t o = order[pos_local++ & (order.size() - 1)];
                                 handles[o].update(slot, [](std::optional<Bytes> &v) { ++(*v)[0]; });
                             }
                             return std::uint64_t{n};
                         }));
    cases.push_back(make_case("composite-map", "update", [&](std::size_t n) {
                             for (std::size_t i = 0; i < n; ++i) {
                                 const KernelObjectId &id = ids[order[pos_map++ & (order.size() - 1)]];
                                 std::lock_guard lock(map_mutex);
                                 auto it = map.find(CompositeKey{id.kind, id.fs_uuid, id.local_id, id.generation, 0});
                                 ++it->second[0];
                             }
                             return std::uint64_t{n};
                         }));
    measure(cases, opt);
    return finish(BenchSuite::storage, opt, cases, "composite-map");
}

BenchReport policy_suite(const BenchOptions &opt) {
    static constexpr std::string_view kFsOnly = R"({
  "subject": "/usr/bin/foo",
  "rules": {
    "filesystem": {
      "default": {"write": "deny", "exec": "deny"},
      "allow": [
        {"path": "/tmp/**", "perms": ["read", "write"]},
        {"path": "/usr/lib/**", "perms": ["map"]}
      ]
    }
  }
})";
    const Policy policy = parse_policy(kFsOnly);

    struct Setup {
        std::unique_ptr<ObjectStore> store = std::make_unique<ObjectStore>();
        CgroupTree tree;
        TaskCgroupMap placement;
        CompiledProgramSet set;
        std::unique_ptr<Dispatcher> dispatcher;
    };
    std::vector<std::unique_ptr<Setup>> setups;
    std::vector<Case> cases;
    std::vector<std::shared_ptr<std::vector<SyscallRecord>>> traces;

    for (const std::string workload : {"fileserver", "webserver"}) {
        auto trace = std::make_shared<std::vector<SyscallRecord>>(
            generate_trace(WorkloadSpec{workload, 4000, opt.seed, false}));
        // Lifecycle markers are dropped so the same events can be replayed.
        std::erase_if(*trace, [](const SyscallRecord &r) { return r.syscall == Syscall::exit || r.syscall == Syscall::close; });
        traces.push_back(trace);
        auto events = std::make_shared<std::vector<HookEvent>>();
        for (const auto &rec : *trace) {
            for (auto &ev : expand_syscall(rec)) events->push_back(ev);
        }

        for (const std::string config : {"compiled", "interpreter"}) {
            auto s = std::make_unique<Setup>();
            s->set = config == "compiled" ? compile(policy) : compile_interpreter(policy);
            s->set.attach(s->tree, s->tree.root());
            for (const auto &ev : *events) {
                if (!s->placement.contains(ev.subject)) {
                    s->placement.assign(ev.subject, s->tree.root());
                    s->store->storage_get(cred_of(ev.subject), true)
                        ->put(s->store->slot(kContextSlot), to_bytes(s->set.context));
                }
            }
            s->dispatcher = std::make_unique<Dispatcher>(s->tree, *s->store);
            Setup *raw = s.get();
            auto pos = std::make_shared<std::size_t>(0);
            cases.push_back(make_case(config, workload, [raw, events, pos](std::size_t n) {
                                     std::uint64_t programs = 0;
                                     for (std::size_t i = 0; i < n; ++i) {
                                         const HookEvent &ev = (*events)[(*pos)++ % events->size()];
                                         programs += raw->dispatcher->dispatch_event(ev, raw->placement).executed.size();
                                         while (raw->set.violations->try_pop()) {
                                         }
                                     }
                                     return programs;
                                 }));
            setups.push_back(std::move(s));
        }
    }
    measure(cases, opt);
    return finish(BenchSuite::policy, opt, cases, "interpreter");
}

}  // namespace

BenchReport run_bench(BenchSuite suite, const BenchOptions &options) {
    switch (suite) {
        case BenchSuite::invocation: return invocation_suite(options);
        case BenchSuite::storage: return storage_suite(options);
        case BenchSuite::policy: return policy_suite(options);
    }
    throw std::invalid_argument("bad suite");
}

}  // namespace cgaudit
