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
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "cgaudit/capture_rules.hpp"
#include "cgaudit/event_model.hpp"

namespace cgaudit {

// Node ids are derived from (object, version): "<object>#<version>".
std::string node_id(const KernelObjectId &object, std::uint32_t version);

struct ProvNode {
    std::string id;
    KernelObjectId object;
    std::uint32_t version = 1;
    NodeKind kind = NodeKind::task;
    std::optional<std::string> security_context;

    friend bool operator==(const ProvNode &, const ProvNode &) = default;
};

struct ProvEdge {
    std::string id;
    std::string from;
    std::string to;
    Relation relation = Relation::read;
    std::uint32_t count = 1;
    std::uint64_t first_ts = 0;
    std::uint64_t last_ts = 0;

    friend bool operator==(const ProvEdge &, const ProvEdge &) = default;
};

// Unit streamed through the ring buffer. An edge element whose id was already
// streamed is an update of that edge (merged multiplicity).
using ProvElement = std::variant<ProvNode, ProvEdge>;

// PROV-DM rendering of each relation. fork and create map to two statements.
struct ProvMapping {
    std::string_view statement;
    std::string_view second_statement;  // empty when single
};
ProvMapping prov_mapping(Relation rel) noexcept;
// task -> "activity", everything else -> "entity".
std::string_view prov_class(NodeKind kind) noexcept;

// Consolidated provenance graph.
class ProvDocument {
public:
    // Throws Error(DanglingEdge) if an edge names an unknown node and
    // allow_dangling is false.
    void add(const ProvElement &element, bool allow_dangling = false);

    const std::vector<ProvNode> &nodes() const noexcept { return nodes_; }
    const std::vector<ProvEdge> &edges() const noexcept { return edges_; }
    const ProvNode *node(const std::string &id) const;
    const ProvEdge *edge(const std::string &id) const;
    bool empty() const noexcept { return nodes_.empty() && edges_.empty(); }
    std::size_t dangling_edges() const noexcept { return dangling_; }

    // Drops one edge (used to build corrupted fixtures in tests).
    bool remove_edge(const std::string &id);

    // PROV-JSON style consolidated document, stable key order.
    std::string to_json(int indent = 2) const;
    // Throws Error(InvalidDocument).
    static ProvDocument from_json(std::string_view text);
    static ProvDocument load(const std::string &path);

private:
    std::vector<ProvNode> nodes_;
    std::vector<ProvEdge> edges_;
    std::unordered_map<std::string, std::size_t> node_index_;
    std::unordered_map<std::string, std::size_t> edge_index_;
    std::size_t dangling_ = 0;
};

// One line of the element stream.
std::string element_to_line(const ProvElement &element);
ProvElement element_from_line(std::string_view line);

// Writes each element as a stream line (when a stream is given) and folds it
// into the consolidated document.
class Serializer {
public:
    explicit Serializer(std::ostream *stream = nullptr, bool allow_dangling = false)
        : stream_(stream), allow_dangling_(allow_dangling) {}

    void append(const ProvElement &element);
    std::uint64_t serialized() const noexcept { return serialized_; }
    const ProvDocument &document() const noexcept { return doc_; }
    ProvDocument take_document() { return std::move(doc_); }

private:
    std::ostream *stream_;
    bool allow_dangling_;
    ProvDocument doc_;
    std::uint64_t serialized_ = 0;
};

// Serializes a dependency-ordered element list. Throws Error(DanglingEdge).
ProvDocument serialize(const std::vector<ProvElement> &elements);

// ---------------------------------------------------------------------------
// Graph properties
// ---------------------------------------------------------------------------

// Kahn's algorithm over all edges.
bool is_acyclic(const ProvDocument &doc);

// Object-level information flow: (a, b) is present when some version of a
// reaches the latest version of b (a != b) in the document.
using ObjectFlow = std::set<std::pair<std::string, std::string>>;
ObjectFlow latest_version_reachability(const ProvDocument &doc);

// True when every node and edge of `sub` appears in `super` with equal
// attributes (edge identity is (from, to, relation) plus multiplicity).
bool is_subgraph(const ProvDocument &sub, const ProvDocument &super);

}  // namespace cgaudit
