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

#include "cgaudit/harness.hpp"

#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cgaudit/error.hpp"

namespace cgaudit {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void bad_scenario(const std::string &what) { throw Error(Errc::ScenarioError, what); }

void check_keys(const json &obj, const std::string &where, std::initializer_list<std::string_view> keys) {
    if (!obj.is_object()) bad_scenario(where + ": expected an object");
    for (const auto &[k, _] : obj.items()) {
        bool ok = false;
        for (auto key : keys) ok = ok || k == key;
        if (!ok) bad_scenario(where + "." + k + ": unknown field");
    }
}

std::string join_path(const std::string &base, const std::string &rel) {
    if (rel.empty() || rel.front() == '/' || base.empty() || base == ".") return rel;
    return base + "/" + rel;
}

template <typename T>
T field(const json &obj, const char *key, const std::string &where) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception &) {
        bad_scenario(where + "." + key + ": missing or wrong type");
    }
}

}  // namespace

Scenario Scenario::capture_everywhere(CaptureOptions options) {
    Scenario s;
    s.capture = ScenarioCapture{{"/"}, std::move(options)};
    return s;
}

Scenario Scenario::parse(std::string_view json_text, const std::string &base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error &e) {
        bad_scenario(std::string("scenario is not valid JSON: ") + e.what());
    }
    check_keys(doc, "scenario",
               {"cgroups", "tasks", "default_cgroup", "capture", "policies", "opaque", "ring", "trace"});
    Scenario s;
    if (doc.contains("cgroups")) {
        for (const auto &c : doc["cgroups"]) {
            check_keys(c, "cgroups[]", {"name", "parent"});
            s.cgroups.push_back({field<std::string>(c, "name", "cgroups[]"),
                                 c.contains("parent") ? field<std::string>(c, "parent", "cgroups[]") : "/"});
        }
    }
    if (doc.contains("tasks")) {
        for (const auto &t : doc["tasks"]) {
            check_keys(t, "tasks[]", {"pid", "cgroup"});
            s.tasks.push_back({field<std::uint64_t>(t, "pid", "tasks[]"), field<std::string>(t, "cgroup", "tasks[]")});
        }
    }
    if (doc.contains("default_cgroup")) s.default_cgroup = field<std::string>(doc, "default_cgroup", "scenario");
    if (doc.contains("capture")) {
        const json &c = doc["capture"];
        check_keys(c, "capture", {"cgroups", "merge", "version_avoidance", "relations", "node_kinds",
                                  "context_allowlist"});
        ScenarioCapture cap;
        if (c.contains("cgroups")) cap.cgroups = field<std::vector<std::string>>(c, "cgroups", "capture");
        if (c.contains("merge")) cap.options.merge = field<bool>(c, "merge", "capture");
        if (c.contains("version_avoidance")) {
            cap.options.version_avoidance = field<bool>(c, "version_avoidance", "capture");
        }
        try {
            if (c.contains("relations")) {
                for (const auto &r : field<std::vector<std::string>>(c, "relations", "capture")) {
                    cap.options.filter.relations.insert(parse_relation(r));
                }
            }
            if (c.contains("node_kinds")) {
                for (const auto &k : field<std::vector<std::string>>(c, "node_kinds", "capture")) {
                    cap.options.filter.node_kinds.insert(parse_node_kind(k));
                }
            }
        } catch (const Error &e) {
            bad_scenario(std::string("capture: ") + e.what());
        }
        if (c.contains("context_allowlist")) {
            auto list = field<std::vector<std::string>>(c, "context_allowlist", "capture");
            cap.options.filter.context_allowlist = std::set<std::string>(list.begin(), list.end());
        }
        s.capture = std::move(cap);
    }
    if (doc.contains("policies")) {
        for (const auto &p : doc["policies"]) {
            check_keys(p, "policies[]", {"file", "policy", "cgroup", "bind_pids"});
            ScenarioPolicy sp;
            if (p.contains("file") == p.contains("policy")) bad_scenario("policies[]: give exactly one of file, policy");
            sp.policy = p.contains("file") ? parse_policy_file(join_path(base_dir, field<std::string>(p, "file", "policies[]")))
                                           : parse_policy(p["policy"].dump());
            if (p.contains("cgroup")) sp.cgroup = field<std::string>(p, "cgroup", "policies[]");
            if (p.contains("bind_pids")) sp.bind_pids = field<std::vector<std::uint64_t>>(p, "bind_pids", "policies[]");
            s.policies.push_back(std::move(sp));
        }
    }
    if (doc.contains("opaque")) {
        for (const auto &o : field<std::vector<std::string>>(doc, "opaque", "scenario")) {
            try {
                s.opaque.push_back(KernelObjectId::parse(o));
            } catch (const Error &e) {
                bad_scenario("opaque: " + std::string(e.what()));
            }
        }
    }
    if (doc.contains("ring")) {
        const json &r = doc["ring"];
        check_keys(r, "ring", {"capacity", "overflow"});
        if (r.contains("capacity")) s.ring_capacity = field<std::size_t>(r, "capacity", "ring");
        if (r.contains("overflow")) {
            const auto o = field<std::string>(r, "overflow", "ring");
            if (o == "block") {
                s.overflow = OverflowPolicy::block;
            } else if (o == "drop") {
                s.overflow = OverflowPolicy::drop;
            } else {
                bad_scenario("ring.overflow: expected block or drop");
            }
        }
    }
    if (doc.contains("trace")) s.trace = join_path(base_dir, field<std::string>(doc, "trace", "scenario"));
    s.validate();
    return s;
}

Scenario Scenario::load(const std::string &path) {
    std::ifstream in(path);
    if (!in) bad_scenario("cannot open scenario " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto slash = path.find_last_of('/');
    return parse(ss.str(), slash == std::string::npos ? "." : path.substr(0, slash));
}

void Scenario::validate() const {
    std::set<std::string> names{"/"};
    for (const auto &c : cgroups) {
        if (c.name.empty() || c.name == "/") bad_scenario("cgroup name '" + c.name + "' is reserved");
        if (!names.count(c.parent)) bad_scenario("cgroup " + c.name + " names unknown parent " + c.parent);
        if (!names.insert(c.name).second) bad_scenario("duplicate cgroup " + c.name);
    }
    auto known = [&](const std::string &n, const std::string &who) {
        if (!names.count(n)) bad_scenario(who + " references unknown cgroup " + n);
    };
    known(default_cgroup, "default_cgroup");
    std::set<std::uint64_t> pids;
    for (const auto &t : tasks) {
        known(t.cgroup, "task " + std::to_string(t.pid));
        if (!pids.insert(t.pid).second) bad_scenario("task " + std::to_string(t.pid) + " placed twice");
    }
    if (capture) {
        for (const auto &c : capture->cgroups) known(c, "capture");
    }
    for (const auto &p : policies) known(p.cgroup, "policy " + p.policy.subject);
    if (ring_capacity == 0) bad_scenario("ring capacity must be positive");
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

std::string RunStats::to_json() const {
    json j;
    j["syscalls"] = syscalls;
    j["aborted_syscalls"] = aborted_syscalls;
    j["hook_events"] = hook_events;
    json hooks = json::object();
    for (HookId h : kAllHooks) {
        if (per_hook[index_of(h)]) hooks[std::string(to_string(h))] = per_hook[index_of(h)];
    }
    j["per_hook"] = hooks;
    j["denied_events"] = denied_events;
    j["programs_run"] = programs_run;
    j["elements"] = {{"pushed", elements_pushed},
                     {"serialized", elements_serialized},
                     {"dropped", elements_dropped},
                     {"producer_waits", producer_waits},
                     {"dangling_edges", dangling_edges}};
    j["capture"] = {{"events", capture.events},
                    {"opaque_skips", capture.opaque_skips},
                    {"version_bumps", capture.version_bumps},
                    {"avoided_versions", capture.avoided_versions},
                    {"merged_edges", capture.merged_edges}};
    j["violations"] = violations;
    j["violations_dropped"] = violations_dropped;
    j["storage"] = {{"live", storage.live_count},
                    {"created", storage.created_total},
                    {"reclaimed", storage.reclaimed_total},
                    {"live_objects_holding_storage", live_objects_holding_storage},
                    {"live_objects", live_objects}};
    return j.dump(2);
}

namespace {

// A hook event reaches the sink once even when capture programs are attached
// at several levels of the subject's path.
class OnceSink final : public ProvenanceSink {
public:
    explicit OnceSink(ProvenanceSink &inner) : inner_(inner) {}
    void on_event(const HookEvent &ev) override {
        const Key key{ev.origin, ev.ordinal, ev.hook};
        if (last_ && *last_ == key) return;
        last_ = key;
        inner_.on_event(ev);
    }

private:
    using Key = std::tuple<const SyscallRecord *, std::uint32_t, HookId>;
    ProvenanceSink &inner_;
    std::optional<Key> last_;
};

ProgramPtr capture_program(HookId hook) {
    return make_program("capture:" + std::string(to_string(hook)), hook,
                        [](const HookEvent &ev, ProgramContext &ctx) {
                            if (ctx.sink) ctx.sink->on_event(ev);
                            return ReturnCode::allow();
                        });
}

void retire(ObjectStore &store, const KernelObjectId &id) {
    if (store.is_known(id) && !store.is_live(id)) return;
    store.end_lifecycle(id);
}

}  // namespace

RunResult run_end_to_end(const Scenario &scenario, const std::vector<SyscallRecord> &trace, std::ostream *stream) {
    scenario.validate();
    ObjectStore store;
    CgroupTree tree;
    TaskCgroupMap placement;
    std::map<std::string, CgroupId> cgroups{{"/", tree.root()}};
    for (const auto &c : scenario.cgroups) cgroups[c.name] = tree.create(cgroups.at(c.parent), c.name);
    std::map<std::uint64_t, CgroupId> listed;
    for (const auto &t : scenario.tasks) listed[t.pid] = cgroups.at(t.cgroup);

    RingBuffer<ProvElement> ring(scenario.ring_capacity, scenario.overflow);
    RingSink ring_sink(ring);
    std::optional<CaptureEngine> engine;
    std::optional<OnceSink> once;
    if (scenario.capture) {
        engine.emplace(store, ring_sink, scenario.capture->options);
        once.emplace(*engine);
    }

    // Enforcement first so that, within one cgroup, a deny precedes capture.
    std::vector<CompiledProgramSet> sets;
    std::map<std::uint64_t, std::vector<std::size_t>> pending_binds;
    for (const auto &p : scenario.policies) {
        sets.push_back(compile(p.policy));
        sets.back().attach(tree, cgroups.at(p.cgroup));
        for (auto pid : p.bind_pids) pending_binds[pid].push_back(sets.size() - 1);
    }
    if (scenario.capture) {
        std::set<std::string> seen;
        for (const auto &name : scenario.capture->cgroups) {
            if (!seen.insert(name).second) continue;
            for (HookId h : kAllHooks) tree.attach(cgroups.at(name), h, capture_program(h));
        }
    }
    for (const auto &id : scenario.opaque) {
        if (!engine) bad_scenario("opacity marks need capture");
        engine->set_opaque(id, true);
    }

    Dispatcher dispatcher(tree, store, once ? &*once : nullptr);

    Serializer serializer(stream, scenario.overflow == OverflowPolicy::drop);
    std::exception_ptr consumer_error;
    std::thread consumer([&] {
        while (auto element = ring.pop()) {
            if (consumer_error) continue;  // keep draining so the producer never stalls
            try {
                serializer.append(*element);
            } catch (...) {
                consumer_error = std::current_exception();
            }
        }
    });

    RunResult result;
    RunStats &stats = result.stats;
    auto collect_violations = [&] {
        for (auto &set : sets) {
            while (auto v = set.violations->try_pop()) result.violations.push_back(std::move(*v));
        }
    };

    std::exception_ptr producer_error;
    try {
        for (const auto &rec : trace) {
            ++stats.syscalls;
            if (!placement.contains(rec.subject)) {
                auto it = listed.find(rec.subject.local_id);
                placement.assign(rec.subject, it != listed.end() ? it->second : cgroups.at(scenario.default_cgroup));
            }
            if (auto it = pending_binds.find(rec.subject.local_id); it != pending_binds.end()) {
                store.resolve(rec.subject);
                for (std::size_t idx : it->second) bind_policy(store, sets[idx], rec.subject.local_id);
                pending_binds.erase(it);
            }

            bool aborted = false;
            for (const auto &ev : expand_syscall(rec)) {
                ++stats.hook_events;
                ++stats.per_hook[index_of(ev.hook)];
                const DispatchResult r = dispatcher.dispatch_event(ev, placement);
                stats.programs_run += r.executed.size();
                if (r.final.denied()) {
                    ++stats.denied_events;
                    aborted = true;
                    break;
                }
            }
            collect_violations();
            if (aborted) {
                ++stats.aborted_syscalls;
                continue;
            }
            if (rec.outcome != Outcome::success) continue;

            switch (rec.syscall) {
                case Syscall::fork:
                    placement.assign(*rec.object, placement.cgroup_of(rec.subject));
                    break;
                case Syscall::execve:
                    for (std::size_t i = 0; i < sets.size(); ++i) {
                        if (rec.path && *rec.path == scenario.policies[i].policy.subject) {
                            store.storage_get(cred_of(rec.subject), true)
                                ->put(store.slot(kContextSlot), to_bytes(sets[i].context));
                        }
                    }
                    break;
                case Syscall::exit:
                    retire(store, rec.subject);
                    retire(store, cred_of(rec.subject));
                    retire(store, memory_of(rec.subject));
                    placement.erase(rec.subject);
                    break;
                case Syscall::close: retire(store, *rec.object); break;
                default: break;
            }
        }
    } catch (...) {
        producer_error = std::current_exception();
    }
    ring.close();
    consumer.join();
    if (producer_error) std::rethrow_exception(producer_error);
    if (consumer_error) std::rethrow_exception(consumer_error);

    const RingCounters rc = ring.counters();
    stats.elements_pushed = rc.pushed;
    stats.elements_dropped = rc.dropped;
    stats.producer_waits = rc.producer_waits;
    stats.elements_serialized = serializer.serialized();
    stats.dangling_edges = serializer.document().dangling_edges();
    stats.violations = result.violations.size();
    for (const auto &set : sets) stats.violations_dropped += set.violations->counters().dropped;
    if (engine) stats.capture = engine->counters();
    stats.storage = store.stats();
    stats.live_objects_holding_storage = store.live_objects_holding_storage();
    stats.live_objects = store.live_object_count();
    result.document = serializer.take_document();
    return result;
}

}  // namespace cgaudit
