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

// Generators and reference implementations shared by the unit and
// acceptance tests. Oracles here deliberately avoid the library code they
// check: they walk parent arrays, scan raw JSON, enumerate paths.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cgaudit/dispatch.hpp"
#include "cgaudit/event_model.hpp"
#include "cgaudit/harness.hpp"
#include "cgaudit/motif.hpp"
#include "cgaudit/pairing.hpp"
#include "cgaudit/policy.hpp"
#include "cgaudit/prov_document.hpp"

namespace cgtest {

using Rng = std::mt19937_64;

inline std::size_t pick(Rng &rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// ---------------------------------------------------------------------------
// cgroup trees
// ---------------------------------------------------------------------------

// A tree built in the library next to a plain parent array the oracle uses.
struct RandomTree {
    cgaudit::CgroupTree tree;
    std::vector<cgaudit::CgroupId> ids;  // index -> library id, 0 is the root
    std::vector<int> parent;             // -1 for the root
    std::vector<int> depth;
};

inline void grow_tree(RandomTree &t, Rng &rng, std::size_t max_nodes = 64, int max_depth = 6) {
    t.ids = {t.tree.root()};
    t.parent = {-1};
    t.depth = {0};
    const std::size_t n = 1 + pick(rng, max_nodes);
    while (t.ids.size() < n) {
        const std::size_t p = pick(rng, t.ids.size());
        if (t.depth[p] >= max_depth) continue;
        t.ids.push_back(t.tree.create(t.ids[p], "cg" + std::to_string(t.ids.size())));
        t.parent.push_back(static_cast<int>(p));
        t.depth.push_back(t.depth[p] + 1);
    }
}

inline bool oracle_in_subtree(const RandomTree &t, int node, int ancestor) {
    for (int c = node; c != -1; c = t.parent[c]) {
        if (c == ancestor) return true;
    }
    return false;
}

// One attached program as the oracle remembers it.
struct OracleAttachment {
    int cgroup;
    cgaudit::HookId hook;
    std::string program;
    int deny_code;  // 0 allows
    std::uint64_t order;
};

// Expected executed list: walk the parent array from the leaf, attachments of
// each cgroup in attach order, stop after the first deny.
inline cgaudit::DispatchResult oracle_dispatch(const RandomTree &t, const std::vector<OracleAttachment> &attached,
                                               int leaf, cgaudit::HookId hook) {
    cgaudit::DispatchResult r;
    for (int c = leaf; c != -1; c = t.parent[c]) {
        std::vector<const OracleAttachment *> here;
        for (const auto &a : attached) {
            if (a.cgroup == c && a.hook == hook) here.push_back(&a);
        }
        std::sort(here.begin(), here.end(), [](auto *x, auto *y) { return x->order < y->order; });
        for (auto *a : here) {
            r.executed.push_back({t.ids[static_cast<std::size_t>(c)], a->program});
            if (a->deny_code != 0) {
                r.final = cgaudit::ReturnCode::deny(a->deny_code);
                return r;
            }
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Policies: a brute-force interpreter over the raw document
// ---------------------------------------------------------------------------

inline std::regex glob_regex(const std::string &glob) {
    std::string re;
    for (std::size_t i = 0; i < glob.size(); ++i) {
        const char c = glob[i];
        if (c == '*' && i + 1 < glob.size() && glob[i + 1] == '*') {
            re += ".*";
            ++i;
        } else if (c == '*') {
            re += "[^/]*";
        } else if (c == '?') {
            re += "[^/]";
        } else if (std::string("\\^$.|+()[]{}").find(c) != std::string::npos) {
            re += '\\';
            re += c;
        } else {
            re += c;
        }
    }
    return std::regex(re);
}

inline std::size_t literal_chars(const std::string &glob) {
    return static_cast<std::size_t>(std::count_if(glob.begin(), glob.end(), [](char c) { return c != '*' && c != '?'; }));
}

// Decision for one query, read straight from the policy JSON.
// perm: "read" | "write" | "exec" | "map"; for network queries pass
// perm = "" and a direction / port (port 0 means socket creation).
inline bool oracle_allows(const nlohmann::json &doc, const std::string &perm, const std::string &path,
                          const std::string &direction = "", int port = -1) {
    const auto &rules = doc.at("rules");
    if (perm.empty()) {
        if (!rules.contains("network")) return true;
        const auto &net = rules["network"];
        const bool deflt = net.value("default", std::string("deny")) == "allow";
        const auto allow = net.value("allow", nlohmann::json::array());
        if (port == 0) return !allow.empty() || deflt;
        for (const auto &rule : allow) {
            if (rule.at("direction") != direction) continue;
            for (const auto &p : rule.at("ports")) {
                int value = 0;
                if (p.is_string()) {
                    value = p == "http" ? 80 : p == "https" ? 443 : -1;
                } else {
                    value = p.get<int>();
                }
                if (value == port) return true;
            }
        }
        return deflt;
    }
    if (!rules.contains("filesystem") || perm == "read") return true;
    const auto &fs = rules["filesystem"];
    const std::string key = perm == "write" ? "write" : "exec";
    std::string fallback;
    if (!fs.contains("default")) {
        fallback = "deny";
    } else if (fs["default"].contains(key)) {
        fallback = fs["default"][key].get<std::string>();
    } else {
        return true;
    }
    const nlohmann::json *best = nullptr;
    const auto allow = fs.value("allow", nlohmann::json::array());
    for (const auto &rule : allow) {
        const std::string pattern = rule.at("path");
        if (!std::regex_match(path, glob_regex(pattern))) continue;
        if (!best || literal_chars(pattern) > literal_chars((*best)["path"].get<std::string>())) best = &rule;
    }
    if (best) {
        for (const auto &p : (*best)["perms"]) {
            if (p == perm) return true;
        }
    }
    return fallback == "allow";
}

// Fifty paths covering the rule shapes used in the tests.
inline std::vector<std::string> path_corpus() {
    return {
        "/tmp",           "/tmp/x",           "/tmp/a/b",          "/tmp/.hidden",     "/tmpfile",
        "/tmp/a/b/c/d",   "/etc/passwd",      "/etc/shadow",       "/etc/foo/conf",    "/etc",
        "/usr/lib/libc.so", "/usr/lib/x86/libm.so", "/usr/lib",     "/usr/lib64/ld.so", "/usr/libexec/foo",
        "/usr/bin/foo",   "/usr/bin/bar",     "/usr/bin",          "/usr/local/bin/foo", "/lib/libz.so",
        "/lib/modules/x", "/lib",             "/home/u/.ssh/id",   "/home/u/notes",    "/home",
        "/var/log/foo.log", "/var/log/a/b.log", "/var/tmp/x",      "/var/www/index.html", "/var/www/a/b.html",
        "/srv/data/f1",   "/srv/data/a/f2",   "/srv/data/b/c/f3",  "/srv",             "/proc/self/mem",
        "/dev/null",      "/dev/tty",         "/opt/foo/bin/foo",  "/opt/foo/lib/x.so", "/root/.profile",
        "/",              "/a",               "/tmp/x.so",         "/usr/lib/a/b/c.so", "/etc/ssl/cert.pem",
        "/run/foo.pid",   "/tmp/foo/bar.txt", "/mnt/usb/x",        "/boot/vmlinuz",    "/sys/kernel/x",
    };
}

// ---------------------------------------------------------------------------
// Pairing: enumerate every path
// ---------------------------------------------------------------------------

using PairingKey = std::tuple<std::string, std::string, cgaudit::PairingViolation::Kind, std::uint32_t>;

inline void enumerate_paths(const cgaudit::ProgramGraph &g, std::size_t pc, std::map<std::string, std::uint32_t> held,
                            std::set<PairingKey> &out, std::size_t &paths) {
    using Op = cgaudit::PairingStmt::Op;
    using Kind = cgaudit::PairingViolation::Kind;
    auto at_exit = [&](std::size_t site) {
        ++paths;
        for (const auto &[res, n] : held) {
            if (n > 0) out.emplace(g.site(site), res, Kind::leak, n);
        }
    };
    const auto &s = g.stmts[pc];
    switch (s.op) {
        case Op::acquire:
        case Op::release:
            if (s.op == Op::acquire) {
                ++held[s.resource];
            } else if (held[s.resource] == 0) {
                out.emplace(g.site(pc), s.resource, Kind::underflow, 1);
            } else {
                --held[s.resource];
            }
            if (pc + 1 < g.stmts.size()) {
                enumerate_paths(g, pc + 1, held, out, paths);
            } else {
                at_exit(pc);
            }
            return;
        case Op::jump:
        case Op::branch:
            for (std::size_t t : s.targets) enumerate_paths(g, t, held, out, paths);
            return;
        case Op::exit: at_exit(pc); return;
    }
}

inline std::set<PairingKey> oracle_pairing(const cgaudit::ProgramGraph &g, std::size_t *path_count = nullptr) {
    std::set<PairingKey> out;
    std::size_t paths = 0;
    enumerate_paths(g, 0, {}, out, paths);
    if (path_count) *path_count = paths;
    return out;
}

inline std::set<PairingKey> keys_of(const cgaudit::PairingCheckReport &r) {
    std::set<PairingKey> out;
    for (const auto &v : r.violations) out.emplace(v.site, v.resource, v.kind, v.unmatched);
    return out;
}

// ---------------------------------------------------------------------------
// Graph checks
// ---------------------------------------------------------------------------

// Three-colour DFS over node ids.
inline bool oracle_acyclic(const cgaudit::ProvDocument &doc) {
    std::unordered_map<std::string, std::vector<std::string>> succ;
    for (const auto &e : doc.edges()) succ[e.from].push_back(e.to);
    std::unordered_map<std::string, int> colour;
    std::vector<std::pair<std::string, std::size_t>> stack;
    for (const auto &n : doc.nodes()) {
        if (colour[n.id] != 0) continue;
        stack.push_back({n.id, 0});
        colour[n.id] = 1;
        while (!stack.empty()) {
            auto &[id, next] = stack.back();
            auto &out = succ[id];
            if (next == out.size()) {
                colour[id] = 2;
                stack.pop_back();
                continue;
            }
            const std::string m = out[next++];
            if (colour[m] == 1) return false;
            if (colour[m] == 0) {
                colour[m] = 1;
                stack.push_back({m, 0});
            }
        }
    }
    return true;
}

// (a, b): some version of object a reaches the newest version of object b.
// Propagates per-node sets of source objects in topological order (Kahn);
// a cyclic document yields {("<cycle>", "<cycle>")}.
inline std::set<std::pair<std::string, std::string>> oracle_flow(const cgaudit::ProvDocument &doc) {
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::size_t> object_of;
    std::map<std::string, std::size_t> objects;
    std::vector<std::string> object_names;
    for (const auto &n : doc.nodes()) {
        const auto [it, fresh] = objects.emplace(n.object.to_string(), object_names.size());
        if (fresh) object_names.push_back(it->first);
        index.emplace(n.id, object_of.size());
        object_of.push_back(it->second);
    }
    const std::size_t n = object_of.size(), words = (object_names.size() + 63) / 64;
    std::vector<std::vector<std::size_t>> succ(n);
    std::vector<std::size_t> indegree(n, 0);
    for (const auto &e : doc.edges()) {
        const auto f = index.at(e.from), t = index.at(e.to);
        succ[f].push_back(t);
        ++indegree[t];
    }
    std::vector<std::vector<std::uint64_t>> reach(n, std::vector<std::uint64_t>(words, 0));
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i) {
        reach[i][object_of[i] / 64] |= std::uint64_t{1} << (object_of[i] % 64);
        if (indegree[i] == 0) ready.push_back(i);
    }
    std::size_t done = 0;
    while (!ready.empty()) {
        const auto i = ready.back();
        ready.pop_back();
        ++done;
        for (auto t : succ[i]) {
            for (std::size_t w = 0; w < words; ++w) reach[t][w] |= reach[i][w];
            if (--indegree[t] == 0) ready.push_back(t);
        }
    }
    if (done != n) return {{"<cycle>", "<cycle>"}};
    std::vector<std::pair<std::uint32_t, std::size_t>> newest(object_names.size(), {0, n});
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = doc.nodes()[i].version;
        auto &slot = newest[object_of[i]];
        if (slot.second == n || slot.first < v) slot = {v, i};
    }
    std::set<std::pair<std::string, std::string>> flow;
    for (std::size_t b = 0; b < object_names.size(); ++b) {
        const auto &bits = reach[newest[b].second];
        for (std::size_t a = 0; a < object_names.size(); ++a) {
            if (a != b && (bits[a / 64] >> (a % 64) & 1)) flow.emplace(object_names[a], object_names[b]);
        }
    }
    return flow;
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

// A random trace of at most max_events records, lifecycle events included.
inline std::vector<cgaudit::SyscallRecord> random_trace(Rng &rng, std::size_t max_events) {
    static const std::vector<std::string> kinds = {"random", "fileserver", "webserver", "fork-tree"};
    cgaudit::WorkloadSpec spec;
    spec.name = kinds[pick(rng, kinds.size())];
    spec.seed = rng();
    // Teardown adds records, so shrink until the whole trace fits.
    spec.size = max_events;
    for (;;) {
        auto trace = cgaudit::generate_trace(spec);
        if (trace.size() <= max_events) return trace;
        spec.size = spec.size * 3 / 4;
    }
}

// Sizes spread evenly over orders of magnitude so small and large traces both
// appear; the largest size is always included.
inline std::size_t log_uniform_size(Rng &rng, std::size_t max) {
    std::uniform_real_distribution<double> d(0.0, std::log(static_cast<double>(max)));
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::exp(d(rng))));
}


// Counted by hand from the hook table, not from the expansion code.
inline std::size_t expected_hooks(cgaudit::Syscall sc, std::uint32_t depth, bool creates) {
    switch (sc) {
        case cgaudit::Syscall::open: return depth + 1 + (creates ? 2 : 0);
        case cgaudit::Syscall::execve: return depth + 4;
        case cgaudit::Syscall::exit:
        case cgaudit::Syscall::close: return 0;
        default: return 1;
    }
}

namespace motif_detail {
using namespace cgaudit;
// Order-free view of a motif.
struct Canon {
    std::set<std::tuple<std::string, NodeKind, bool>> nodes;
    std::multiset<std::tuple<std::string, std::string, Relation, std::uint32_t>> edges;
    friend bool operator==(const Canon &, const Canon &) = default;
};

inline Canon canon(const Motif &m) {
    Canon c;
    for (const auto &n : m.nodes()) c.nodes.emplace(n.label(), n.kind, n.fresh);
    for (const auto &e : m.edges()) {
        c.edges.emplace(m.nodes()[e.from].label(), m.nodes()[e.to].label(), e.relation, e.count);
    }
    return c;
}

inline SyscallRecord record(Syscall sc, std::uint32_t depth, bool creates, const KernelObjectId &obj) {
    SyscallRecord r;
    r.syscall = sc;
    r.subject = task_id(1);
    if (requires_object(sc)) r.object = sc == Syscall::fork ? task_id(2) : obj;
    if (requires_path_depth(sc)) r.path_depth = depth;
    if (requires_net(sc)) r.net = NetParams{};
    r.creates_new_file = creates;
    return r;
}

// Folds hook motifs over the expansion: each hook motif's versions are
// shifted by what earlier hooks already did to the same object.
inline Canon fold(Syscall sc, std::uint32_t depth, bool creates, ObjectKind kind) {
    const KernelObjectId obj = kind == ObjectKind::inode ? inode_id("rootfs", 1) : object_id(kind, 1);
    const auto rec = record(sc, depth, creates, obj);
    std::map<std::string, std::uint32_t> offset;
    std::map<std::string, bool> fresh;
    Canon c;
    for (const auto &ev : expand_syscall(rec)) {
        const Motif hm = hook_motif(ev.hook, ev.access, ev.object ? node_kind_of(ev.object->kind) : NodeKind::file);
        auto global = [&](const MotifNode &n) {
            std::string label = n.object;
            if (ev.hook == HookId::inode_permission && label == kObjectLabel) {
                for (std::uint32_t i = 0; i < depth; ++i) {
                    if (directory_inode(rec, i) == *ev.object) label = "dir" + std::to_string(i);
                }
            }
            return label;
        };
        std::map<std::string, std::uint32_t> high;
        std::vector<std::string> labels;
        for (const auto &n : hm.nodes()) {
            const std::string g = global(n);
            if (!fresh.count(g)) fresh[g] = n.fresh;
            const std::uint32_t v = offset[g] + n.version;
            labels.push_back(g + "#" + std::to_string(v));
            c.nodes.emplace(labels.back(), n.kind, fresh[g]);
            high[g] = std::max(high[g], v);
        }
        for (const auto &e : hm.edges()) c.edges.emplace(labels[e.from], labels[e.to], e.relation, e.count);
        for (const auto &[g, v] : high) offset[g] = v;
    }
    return c;
}

}  // namespace motif_detail
using motif_detail::Canon;
using motif_detail::canon;
using motif_detail::fold;

}  // namespace cgtest
