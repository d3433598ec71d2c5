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

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cgaudit/capture_rules.hpp"
#include "cgaudit/event_model.hpp"
#include "cgaudit/prov_document.hpp"

namespace cgaudit {

// A motif node is one version of a symbolic object. In relative motifs
// (hook and syscall motifs) version 0 stands for whatever version a
// pre-existing object has on entry and k > 0 for the k-th version created
// after it. Program motifs are absolute: versions are the ones capture
// assigns when the trace starts from an empty system.
struct MotifNode {
    std::string object;
    NodeKind kind = NodeKind::task;
    std::uint32_t version = 0;
    bool fresh = false;  // object comes into existence inside the motif

    std::string label() const { return object + "#" + std::to_string(version); }
    friend bool operator==(const MotifNode &, const MotifNode &) = default;
};

struct MotifEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    Relation relation = Relation::read;
    std::uint32_t count = 1;
    friend bool operator==(const MotifEdge &, const MotifEdge &) = default;
};

class Motif {
public:
    Motif() = default;
    explicit Motif(bool relative) : relative_(relative) {}

    // Returns the index of the (object, version) node, adding it if missing.
    std::size_t node(const std::string &object, NodeKind kind, std::uint32_t version, bool fresh = false);
    std::optional<std::size_t> find(const std::string &object, std::uint32_t version) const;
    std::size_t add_edge(std::size_t from, std::size_t to, Relation relation, std::uint32_t count = 1);

    const std::vector<MotifNode> &nodes() const noexcept { return nodes_; }
    const std::vector<MotifEdge> &edges() const noexcept { return edges_; }
    std::vector<MotifEdge> &edges() noexcept { return edges_; }
    bool relative() const noexcept { return relative_; }
    bool empty() const noexcept { return nodes_.empty(); }

    std::optional<std::uint32_t> path_depth;

    bool is_acyclic() const;
    // One line per node and edge, in insertion order.
    std::string to_string() const;

    friend bool operator==(const Motif &a, const Motif &b) {
        return a.relative_ == b.relative_ && a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
    }

private:
    bool relative_ = true;
    std::vector<MotifNode> nodes_;
    std::vector<MotifEdge> edges_;
    std::map<std::pair<std::string, std::uint32_t>, std::size_t> index_;
};

// Role labels used by hook motifs.
inline constexpr std::string_view kSubjectLabel = "subject";
inline constexpr std::string_view kObjectLabel = "object";
inline constexpr std::string_view kChildMemoryLabel = "child_memory";

// Template of one hook. The object's kind is a parameter because the same
// hook touches files, pipes or sockets.
Motif hook_motif(HookId hook, Access access = Access::none, NodeKind object_kind = NodeKind::file);
// Throws Error(UnmodeledHook) for names outside the hook table.
Motif hook_motif(std::string_view hook_name, Access access = Access::none, NodeKind object_kind = NodeKind::file);

// Parameters of a single syscall motif.
struct SyscallParams {
    std::uint32_t path_depth = 0;
    bool creates_new_file = false;
    bool sets_xattr = false;
    ObjectKind object_kind = ObjectKind::inode;
};

// Hook motifs of expand_syscall() chained along shared objects. Objects are
// labelled "subject", "object", "dir<i>", "child_memory".
Motif syscall_motif(Syscall syscall, const SyscallParams &params = {});

struct MotifOptions {
    bool merge = true;
    bool version_avoidance = true;
    // Objects whose events are skipped entirely, by KernelObjectId string.
    std::set<std::string> opaque;
    // Empty sets record everything.
    std::set<Relation> relations;
    std::set<NodeKind> node_kinds;
};

// Prediction of the reduced graph capture produces for a whole trace started
// from an empty system. Objects are labelled by their id strings.
Motif program_motif(const std::vector<SyscallRecord> &trace, const MotifOptions &options = {});

enum class MatchMode : std::uint8_t {
    exact,  // motif and graph isomorphic
    embed,  // motif isomorphic to a subgraph of the graph
};

struct MatchReport {
    bool matched = false;
    // motif node label -> graph node id
    std::map<std::string, std::string> witness;
    std::vector<std::string> mismatches;
};

MatchReport match(const ProvDocument &graph, const Motif &motif, MatchMode mode = MatchMode::exact);

// Pipe scenario: T creates pipe P, forks T', T' opens and reads F and
// writes P, T reads P.
std::vector<SyscallRecord> fig4_trace();

}  // namespace cgaudit
