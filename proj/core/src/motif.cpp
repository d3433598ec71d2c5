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

#include "cgaudit/motif.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <unordered_map>

#include "cgaudit/error.hpp"

namespace cgaudit {

std::size_t Motif::node(const std::string &object, NodeKind kind, std::uint32_t version, bool fresh) {
    auto [it, inserted] = index_.try_emplace({object, version}, nodes_.size());
    if (inserted) nodes_.push_back(MotifNode{object, kind, version, fresh});
    return it->second;
}

std::optional<std::size_t> Motif::find(const std::string &object, std::uint32_t version) const {
    auto it = index_.find({object, version});
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t Motif::add_edge(std::size_t from, std::size_t to, Relation relation, std::uint32_t count) {
    edges_.push_back(MotifEdge{from, to, relation, count});
    return edges_.size() - 1;
}

bool Motif::is_acyclic() const {
    std::vector<std::size_t> indeg(nodes_.size(), 0);
    std::vector<std::vector<std::size_t>> succ(nodes_.size());
    for (const auto &e : edges_) {
        succ[e.from].push_back(e.to);
        ++indeg[e.to];
    }
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (indeg[i] == 0) ready.push_back(i);
    }
    std::size_t seen = 0;
    while (!ready.empty()) {
        const std::size_t n = ready.back();
        ready.pop_back();
        ++seen;
        for (std::size_t m : succ[n]) {
            if (--indeg[m] == 0) ready.push_back(m);
        }
    }
    return seen == nodes_.size();
}

std::string Motif::to_string() const {
    std::ostringstream out;
    for (const auto &n : nodes_) {
        out << "node " << n.label() << " " << cgaudit::to_string(n.kind) << (n.fresh ? " fresh" : "") << "\n";
    }
    for (const auto &e : edges_) {
        out << "edge " << cgaudit::to_string(e.relation) << " " << nodes_[e.from].label() << " -> "
            << nodes_[e.to].label();
        if (e.count != 1) out << " x" << e.count;
        out << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Symbolic capture
// ---------------------------------------------------------------------------

namespace {

// Executes capture steps over symbolic objects. `base` is the version an
// already-existing object has on first reference (0 in relative motifs).
class SymbolicCapture {
public:
    SymbolicCapture(Motif &motif, std::uint32_t base, bool merge, bool avoidance)
        : motif_(motif), base_(base), merge_(merge), avoidance_(avoidance) {}

    struct Obj {
        std::string label;
        NodeKind kind;
    };

    void step(const CaptureStep &s, const Obj &from, const Obj &to) {
        switch (s.kind) {
            case StepKind::touch: current(from); break;
            case StepKind::flow: inflow(from, to, s.relation, false); break;
            case StepKind::spawn: inflow(from, to, s.relation, true); break;
        }
    }

private:
    struct State {
        std::uint32_t version = 0;
        bool fresh = false;
        // last inflow: peer, peer version, relation, edge index
        std::string peer;
        std::uint32_t peer_version = 0;
        Relation relation = Relation::read;
        std::optional<std::size_t> edge;
    };

    std::size_t current(const Obj &o) {
        auto [it, inserted] = states_.try_emplace(o.label);
        if (inserted) it->second.version = base_;
        return motif_.node(o.label, o.kind, it->second.version, it->second.fresh);
    }

    void inflow(const Obj &from, const Obj &to, Relation rel, bool spawn) {
        const std::size_t src = current(from);
        const std::uint32_t from_version = states_.at(from.label).version;
        auto existing = states_.find(to.label);
        if (spawn && existing == states_.end()) {
            State st;
            st.version = 1;
            st.fresh = true;
            const std::size_t dst = motif_.node(to.label, to.kind, 1, true);
            st.peer = from.label;
            st.peer_version = from_version;
            st.relation = rel;
            st.edge = motif_.add_edge(src, dst, rel);
            states_.emplace(to.label, std::move(st));
            return;
        }
        const std::size_t old_node = current(to);
        State &st = states_.at(to.label);
        const bool repeat = st.edge && st.peer == from.label && st.peer_version == from_version && st.relation == rel;
        if (avoidance_ && repeat) {
            if (merge_) {
                ++motif_.edges()[*st.edge].count;
            } else {
                st.edge = motif_.add_edge(src, old_node, rel);
            }
            return;
        }
        ++st.version;
        const std::size_t new_node = motif_.node(to.label, to.kind, st.version, st.fresh);
        motif_.add_edge(old_node, new_node, Relation::version);
        st.peer = from.label;
        st.peer_version = from_version;
        st.relation = rel;
        st.edge = motif_.add_edge(src, new_node, rel);
    }

    Motif &motif_;
    std::uint32_t base_;
    bool merge_;
    bool avoidance_;
    std::unordered_map<std::string, State> states_;
};

SymbolicCapture::Obj role_object(Role role, const SymbolicCapture::Obj &subject, const SymbolicCapture::Obj &object,
                                 const SymbolicCapture::Obj &child_memory) {
    switch (role) {
        case Role::subject: return subject;
        case Role::object: return object;
        case Role::child_memory: return child_memory;
    }
    return subject;
}

// Drops filtered nodes and the edges touching them.
Motif filtered(const Motif &in, const std::set<Relation> &relations, const std::set<NodeKind> &kinds) {
    if (relations.empty() && kinds.empty()) return in;
    Motif out(in.relative());
    std::vector<std::optional<std::size_t>> remap(in.nodes().size());
    for (std::size_t i = 0; i < in.nodes().size(); ++i) {
        const auto &n = in.nodes()[i];
        if (!kinds.empty() && kinds.count(n.kind) == 0) continue;
        remap[i] = out.node(n.object, n.kind, n.version, n.fresh);
    }
    for (const auto &e : in.edges()) {
        if (!relations.empty() && relations.count(e.relation) == 0) continue;
        if (!remap[e.from] || !remap[e.to]) continue;
        out.add_edge(*remap[e.from], *remap[e.to], e.relation, e.count);
    }
    return out;
}

}  // namespace

Motif hook_motif(HookId hook, Access access, NodeKind object_kind) {
    Motif motif(true);
    SymbolicCapture cap(motif, 0, false, false);
    const SymbolicCapture::Obj subject{std::string(kSubjectLabel), NodeKind::task};
    // task_fork's object is the child task.
    const NodeKind obj_kind = hook == HookId::task_fork ? NodeKind::task : object_kind;
    const SymbolicCapture::Obj object{std::string(kObjectLabel), obj_kind};
    const SymbolicCapture::Obj memory{std::string(kChildMemoryLabel), NodeKind::memory};
    for (const auto &s : capture_rule(hook, access)) {
        cap.step(s, role_object(s.from, subject, object, memory), role_object(s.to, subject, object, memory));
    }
    return motif;
}

Motif hook_motif(std::string_view hook_name, Access access, NodeKind object_kind) {
    HookId hook;
    try {
        hook = parse_hook(hook_name);
    } catch (const Error &) {
        throw Error(Errc::UnmodeledHook, "no motif for hook '" + std::string(hook_name) + "'");
    }
    return hook_motif(hook, access, object_kind);
}

Motif syscall_motif(Syscall syscall, const SyscallParams &params) {
    SyscallRecord rec;
    rec.syscall = syscall;
    rec.subject = task_id(1);
    if (requires_object(syscall)) {
        if (syscall == Syscall::fork) {
            rec.object = task_id(2);
        } else if (params.object_kind == ObjectKind::inode) {
            rec.object = inode_id("rootfs", 1);
        } else {
            rec.object = object_id(params.object_kind, 1);
        }
    }
    if (requires_path_depth(syscall)) rec.path_depth = params.path_depth;
    if (requires_net(syscall)) rec.net = NetParams{};
    rec.creates_new_file = params.creates_new_file && syscall == Syscall::open;
    rec.sets_xattr = params.sets_xattr && syscall == Syscall::open;

    Motif motif(true);
    if (requires_path_depth(syscall)) motif.path_depth = params.path_depth;
    SymbolicCapture cap(motif, 0, false, false);
    const SymbolicCapture::Obj subject{std::string(kSubjectLabel), NodeKind::task};
    for (const auto &ev : expand_syscall(rec)) {
        SymbolicCapture::Obj object{std::string(kObjectLabel), NodeKind::file};
        SymbolicCapture::Obj memory{std::string(kChildMemoryLabel), NodeKind::memory};
        if (ev.object) {
            object.kind = node_kind_of(ev.object->kind);
            if (ev.hook == HookId::inode_permission) {
                for (std::uint32_t i = 0; i < params.path_depth; ++i) {
                    if (directory_inode(rec, i) == *ev.object) {
                        object.label = "dir" + std::to_string(i);
                        break;
                    }
                }
            }
        }
        for (const auto &s : capture_rule(ev.hook, ev.access)) {
            cap.step(s, role_object(s.from, subject, object, memory), role_object(s.to, subject, object, memory));
        }
    }
    return motif;
}

Motif program_motif(const std::vector<SyscallRecord> &trace, const MotifOptions &options) {
    Motif motif(false);
    SymbolicCapture cap(motif, 1, options.merge, options.version_avoidance);
    for (const auto &rec : trace) {
        for (const auto &ev : expand_syscall(rec)) {
            const SymbolicCapture::Obj subject{ev.subject.to_string(), NodeKind::task};
            SymbolicCapture::Obj object{"", NodeKind::file};
            SymbolicCapture::Obj memory{"", NodeKind::memory};
            if (ev.object) {
                object = {ev.object->to_string(), node_kind_of(ev.object->kind)};
                memory.label = memory_of(*ev.object).to_string();
            }
            const auto steps = capture_rule(ev.hook, ev.access);
            bool skip = false;
            for (const auto &s : steps) {
                for (Role r : {s.from, s.to}) {
                    const auto o = role_object(r, subject, object, memory);
                    if (options.opaque.count(o.label) != 0) skip = true;
                }
            }
            if (skip) continue;
            for (const auto &s : steps) {
                cap.step(s, role_object(s.from, subject, object, memory), role_object(s.to, subject, object, memory));
            }
        }
    }
    return filtered(motif, options.relations, options.node_kinds);
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

namespace {

using EdgeKey = std::tuple<std::string, std::string, Relation>;

struct GraphObject {
    std::string name;
    NodeKind kind;
    std::map<std::uint32_t, std::string> versions;  // version -> node id
};

struct MotifObject {
    std::string label;
    NodeKind kind;
    bool fresh = false;
    std::vector<std::size_t> nodes;
    std::uint32_t min_version = 0;
};

class Matcher {
public:
    Matcher(const ProvDocument &graph, const Motif &motif, MatchMode mode)
        : graph_(graph), motif_(motif), mode_(mode) {
        std::map<std::string, std::size_t> gindex;
        for (const auto &n : graph.nodes()) {
            const std::string name = n.object.to_string();
            auto [it, inserted] = gindex.try_emplace(name, gobjects_.size());
            if (inserted) gobjects_.push_back(GraphObject{name, n.kind, {}});
            gobjects_[it->second].versions[n.version] = n.id;
        }
        for (std::size_t i = 0; i < gobjects_.size(); ++i) gobject_index_[gobjects_[i].name] = i;
        for (const auto &e : graph.edges()) gedges_[{e.from, e.to, e.relation}].push_back(e.count);
        for (auto &[_, counts] : gedges_) std::sort(counts.begin(), counts.end());

        std::map<std::string, std::size_t> mindex;
        node_object_.resize(motif.nodes().size());
        for (std::size_t i = 0; i < motif.nodes().size(); ++i) {
            const auto &n = motif.nodes()[i];
            auto [it, inserted] = mindex.try_emplace(n.object, mobjects_.size());
            if (inserted) mobjects_.push_back(MotifObject{n.object, n.kind, n.fresh, {}, n.version});
            auto &mo = mobjects_[it->second];
            mo.nodes.push_back(i);
            mo.min_version = std::min(mo.min_version, n.version);
            node_object_[i] = it->second;
        }
        // Edges grouped by endpoints; checked once both endpoint objects are bound.
        std::map<std::tuple<std::size_t, std::size_t, Relation>, std::size_t> groups;
        for (const auto &e : motif.edges()) {
            auto [it, inserted] = groups.try_emplace({e.from, e.to, e.relation}, mgroups_.size());
            if (inserted) mgroups_.push_back(Group{e.from, e.to, e.relation, {}});
            mgroups_[it->second].counts.push_back(e.count);
        }
        for (auto &g : mgroups_) std::sort(g.counts.begin(), g.counts.end());

        // Bind objects with the most nodes first.
        order_.resize(mobjects_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
        std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
            return mobjects_[a].nodes.size() > mobjects_[b].nodes.size();
        });
        std::vector<std::size_t> position(mobjects_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) position[order_[i]] = i;
        groups_at_.resize(order_.size());
        for (std::size_t g = 0; g < mgroups_.size(); ++g) {
            const std::size_t a = position[node_object_[mgroups_[g].from]];
            const std::size_t b = position[node_object_[mgroups_[g].to]];
            groups_at_[std::max(a, b)].push_back(g);
        }
        binding_.assign(mobjects_.size(), Binding{});
        used_.assign(gobjects_.size(), false);
    }

    MatchReport run() {
        MatchReport report;
        if (mode_ == MatchMode::exact) {
            if (gobjects_.size() != mobjects_.size() || graph_.nodes().size() != motif_.nodes().size() ||
                graph_.edges().size() != motif_.edges().size()) {
                diagnose(report);
                if (report.mismatches.empty()) {
                    report.mismatches.push_back("graph has " + std::to_string(graph_.nodes().size()) + " nodes/" +
                                                std::to_string(graph_.edges().size()) + " edges, motif has " +
                                                std::to_string(motif_.nodes().size()) + "/" +
                                                std::to_string(motif_.edges().size()));
                }
                return report;
            }
        }
        if (search(0)) {
            report.matched = true;
            for (std::size_t i = 0; i < motif_.nodes().size(); ++i) {
                report.witness[motif_.nodes()[i].label()] = image(i).value_or("");
            }
            return report;
        }
        diagnose(report);
        if (budget_ == 0) report.mismatches.insert(report.mismatches.begin(), "search budget exhausted");
        if (report.mismatches.empty()) report.mismatches.push_back("no structure-preserving assignment of objects");
        return report;
    }

private:
    struct Group {
        std::size_t from;
        std::size_t to;
        Relation relation;
        std::vector<std::uint32_t> counts;
    };
    struct Binding {
        std::optional<std::size_t> object;
        std::int64_t offset = 0;
    };

    std::optional<std::string> image(std::size_t motif_node) const {
        const auto &b = binding_[node_object_[motif_node]];
        if (!b.object) return std::nullopt;
        const std::int64_t v = static_cast<std::int64_t>(motif_.nodes()[motif_node].version) + b.offset;
        if (v < 1) return std::nullopt;
        const auto &versions = gobjects_[*b.object].versions;
        auto it = versions.find(static_cast<std::uint32_t>(v));
        if (it == versions.end()) return std::nullopt;
        return it->second;
    }

    std::vector<std::int64_t> offsets(const MotifObject &mo, const GraphObject &go) const {
        if (!motif_.relative() || mo.fresh) return {0};
        std::vector<std::int64_t> out;
        for (const auto &[v, _] : go.versions) {
            const std::int64_t off = static_cast<std::int64_t>(v) - mo.min_version;
            if (off >= 1) out.push_back(off);
        }
        return out;
    }

    bool nodes_fit(std::size_t m) const {
        const auto &mo = mobjects_[m];
        for (std::size_t n : mo.nodes) {
            if (!image(n)) return false;
        }
        if (mode_ == MatchMode::exact && gobjects_[*binding_[m].object].versions.size() != mo.nodes.size()) {
            return false;
        }
        return true;
    }

    bool group_fits(const Group &g) const {
        const EdgeKey key{*image(g.from), *image(g.to), g.relation};
        auto it = gedges_.find(key);
        if (it == gedges_.end()) return false;
        if (mode_ == MatchMode::exact) return it->second == g.counts;
        return std::includes(it->second.begin(), it->second.end(), g.counts.begin(), g.counts.end());
    }

    std::vector<std::size_t> candidates(const MotifObject &mo) const {
        std::vector<std::size_t> out;
        auto hint = gobject_index_.find(mo.label);
        if (hint != gobject_index_.end() && !used_[hint->second] && gobjects_[hint->second].kind == mo.kind) {
            out.push_back(hint->second);
            // Absolute motifs name real objects; no other candidate makes sense.
            if (!motif_.relative()) return out;
        }
        for (std::size_t i = 0; i < gobjects_.size(); ++i) {
            if (used_[i] || gobjects_[i].kind != mo.kind) continue;
            if (hint != gobject_index_.end() && hint->second == i) continue;
            out.push_back(i);
        }
        return out;
    }

    bool search(std::size_t depth) {
        if (depth == order_.size()) return true;
        const std::size_t m = order_[depth];
        for (std::size_t g : candidates(mobjects_[m])) {
            for (std::int64_t off : offsets(mobjects_[m], gobjects_[g])) {
                if (budget_ == 0) return false;
                --budget_;
                binding_[m] = Binding{g, off};
                used_[g] = true;
                bool ok = nodes_fit(m);
                if (ok) {
                    for (std::size_t gi : groups_at_[depth]) {
                        if (!group_fits(mgroups_[gi])) {
                            ok = false;
                            break;
                        }
                    }
                }
                if (ok && search(depth + 1)) return true;
                used_[g] = false;
                binding_[m] = Binding{};
            }
        }
        return false;
    }

    // Reports differences under a best-effort object mapping: same name when
    // the graph has it, otherwise the first free object of the same kind.
    void diagnose(MatchReport &report) {
        binding_.assign(mobjects_.size(), Binding{});
        used_.assign(gobjects_.size(), false);
        for (std::size_t m = 0; m < mobjects_.size(); ++m) {
            const auto cands = candidates(mobjects_[m]);
            if (cands.empty()) continue;
            std::size_t best_g = cands.front();
            std::int64_t best_off = 0;
            std::size_t best_hits = 0;
            bool first = true;
            for (std::size_t g : cands) {
                for (std::int64_t off : offsets(mobjects_[m], gobjects_[g])) {
                    binding_[m] = Binding{g, off};
                    std::size_t hits = 0;
                    for (std::size_t n : mobjects_[m].nodes) hits += image(n) ? 1 : 0;
                    if (first || hits > best_hits) {
                        best_g = g;
                        best_off = off;
                        best_hits = hits;
                        first = false;
                    }
                }
                if (gobjects_[g].name == mobjects_[m].label) break;
            }
            binding_[m] = Binding{best_g, best_off};
            used_[best_g] = true;
        }

        std::set<std::string> covered_nodes;
        for (std::size_t i = 0; i < motif_.nodes().size(); ++i) {
            const auto &n = motif_.nodes()[i];
            if (auto id = image(i)) {
                covered_nodes.insert(*id);
                if (graph_.node(*id)->kind != n.kind) {
                    report.mismatches.push_back("kind mismatch on node " + n.label() + ": graph has " +
                                                std::string(to_string(graph_.node(*id)->kind)));
                }
            } else {
                report.mismatches.push_back("missing node " + n.label() + " (" + std::string(to_string(n.kind)) + ")");
            }
        }
        auto label = [&](std::size_t n) { return motif_.nodes()[n].label(); };
        std::map<EdgeKey, std::vector<std::uint32_t>> expected;
        for (const auto &g : mgroups_) {
            const std::string edge_name =
                std::string(to_string(g.relation)) + " edge " + label(g.from) + " -> " + label(g.to);
            const auto a = image(g.from);
            const auto b = image(g.to);
            if (!a || !b) {
                report.mismatches.push_back("missing " + edge_name);
                continue;
            }
            expected[{*a, *b, g.relation}] = g.counts;
            auto it = gedges_.find({*a, *b, g.relation});
            if (it == gedges_.end()) {
                report.mismatches.push_back("missing " + edge_name);
                continue;
            }
            const bool ok = mode_ == MatchMode::exact
                                ? it->second == g.counts
                                : std::includes(it->second.begin(), it->second.end(), g.counts.begin(), g.counts.end());
            if (!ok) {
                report.mismatches.push_back("multiplicity mismatch on " + edge_name + ": expected " +
                                            counts_text(g.counts) + ", graph has " + counts_text(it->second));
            }
        }
        if (mode_ != MatchMode::exact) return;
        for (const auto &n : graph_.nodes()) {
            if (covered_nodes.count(n.id) == 0) report.mismatches.push_back("extra node " + n.id);
        }
        for (const auto &[key, counts] : gedges_) {
            if (expected.count(key) == 0) {
                report.mismatches.push_back("extra " + std::string(to_string(std::get<2>(key))) + " edge " +
                                            std::get<0>(key) + " -> " + std::get<1>(key));
            }
        }
    }

    static std::string counts_text(const std::vector<std::uint32_t> &counts) {
        std::string s = "[";
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(counts[i]);
        }
        return s + "]";
    }

    const ProvDocument &graph_;
    const Motif &motif_;
    MatchMode mode_;
    std::vector<GraphObject> gobjects_;
    std::unordered_map<std::string, std::size_t> gobject_index_;
    std::map<EdgeKey, std::vector<std::uint32_t>> gedges_;
    std::vector<MotifObject> mobjects_;
    std::vector<std::size_t> node_object_;
    std::vector<Group> mgroups_;
    std::vector<std::size_t> order_;
    std::vector<std::vector<std::size_t>> groups_at_;
    std::vector<Binding> binding_;
    std::vector<bool> used_;
    std::uint64_t budget_ = 2'000'000;
};

}  // namespace

MatchReport match(const ProvDocument &graph, const Motif &motif, MatchMode mode) {
    if (!is_acyclic(graph)) throw Error(Errc::InvalidDocument, "provenance document has a cycle");
    for (const auto &e : graph.edges()) {
        if (!graph.node(e.from) || !graph.node(e.to)) {
            throw Error(Errc::InvalidDocument, "edge " + e.id + " references an unknown node");
        }
    }
    return Matcher(graph, motif, mode).run();
}

std::vector<SyscallRecord> fig4_trace() {
    const KernelObjectId t = task_id(100);
    const KernelObjectId child = task_id(101);
    const KernelObjectId pipe = object_id(ObjectKind::pipe, 7);
    const KernelObjectId file = inode_id("rootfs", 4242);

    std::vector<SyscallRecord> trace;
    auto add = [&](Syscall sc, const KernelObjectId &subject, const KernelObjectId &object) -> SyscallRecord & {
        SyscallRecord rec;
        rec.timestamp = trace.size() + 1;
        rec.syscall = sc;
        rec.subject = subject;
        rec.object = object;
        if (requires_path_depth(sc)) rec.path_depth = 0;
        trace.push_back(rec);
        return trace.back();
    };
    add(Syscall::open, t, pipe).creates_new_file = true;
    add(Syscall::fork, t, child);
    add(Syscall::open, child, file);
    add(Syscall::read, child, file);
    add(Syscall::write, child, pipe);
    add(Syscall::read, t, pipe);
    return trace;
}

}  // namespace cgaudit
