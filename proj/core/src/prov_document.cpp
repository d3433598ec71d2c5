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

#include "cgaudit/prov_document.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "cgaudit/error.hpp"

namespace cgaudit {

using ordered_json = nlohmann::ordered_json;

std::string node_id(const KernelObjectId &object, std::uint32_t version) {
    return object.to_string() + "#" + std::to_string(version);
}

ProvMapping prov_mapping(Relation rel) noexcept {
    switch (rel) {
        case Relation::read:
        case Relation::exec: return {"used", ""};
        case Relation::write:
        case Relation::connect: return {"wasGeneratedBy", ""};
        case Relation::version: return {"wasDerivedFrom", ""};
        case Relation::create:
        case Relation::fork: return {"wasGeneratedBy", "wasAssociatedWith"};
    }
    return {"wasInfluencedBy", ""};
}

std::string_view prov_class(NodeKind kind) noexcept { return kind == NodeKind::task ? "activity" : "entity"; }

// ---------------------------------------------------------------------------

void ProvDocument::add(const ProvElement &element, bool allow_dangling) {
    if (const auto *node = std::get_if<ProvNode>(&element)) {
        auto [it, inserted] = node_index_.try_emplace(node->id, nodes_.size());
        if (inserted) {
            nodes_.push_back(*node);
        } else {
            nodes_[it->second] = *node;
        }
        return;
    }
    const auto &edge = std::get<ProvEdge>(element);
    if (!node_index_.count(edge.from) || !node_index_.count(edge.to)) {
        if (!allow_dangling) {
            throw Error(Errc::DanglingEdge, edge.id + " (" + edge.from + " -> " + edge.to + ")");
        }
        ++dangling_;
    }
    auto [it, inserted] = edge_index_.try_emplace(edge.id, edges_.size());
    if (inserted) {
        edges_.push_back(edge);
    } else {
        edges_[it->second] = edge;
    }
}

const ProvNode *ProvDocument::node(const std::string &id) const {
    auto it = node_index_.find(id);
    return it == node_index_.end() ? nullptr : &nodes_[it->second];
}

const ProvEdge *ProvDocument::edge(const std::string &id) const {
    auto it = edge_index_.find(id);
    return it == edge_index_.end() ? nullptr : &edges_[it->second];
}

bool ProvDocument::remove_edge(const std::string &id) {
    auto it = edge_index_.find(id);
    if (it == edge_index_.end()) return false;
    edges_.erase(edges_.begin() + static_cast<std::ptrdiff_t>(it->second));
    edge_index_.clear();
    for (std::size_t i = 0; i < edges_.size(); ++i) edge_index_[edges_[i].id] = i;
    return true;
}

namespace {

ordered_json node_json(const ProvNode &n) {
    ordered_json j;
    j["cg:object"] = n.object.to_string();
    j["cg:version"] = n.version;
    j["cg:kind"] = std::string(to_string(n.kind));
    if (n.security_context) j["cg:security_context"] = *n.security_context;
    return j;
}

ordered_json edge_json(const ProvEdge &e, const ProvDocument &doc, std::string_view statement) {
    const ProvNode *from = doc.node(e.from);
    const ProvNode *to = doc.node(e.to);
    const bool from_activity = from && from->kind == NodeKind::task;
    ordered_json j;
    if (statement == "used") {
        j["prov:activity"] = e.to;
        j["prov:entity"] = e.from;
    } else if (statement == "wasGeneratedBy") {
        j["prov:entity"] = e.to;
        j["prov:activity"] = e.from;
    } else if (statement == "wasDerivedFrom") {
        j["prov:generatedEntity"] = e.to;
        j["prov:usedEntity"] = e.from;
    } else if (statement == "wasAssociatedWith") {
        j["prov:activity"] = from_activity ? e.from : e.to;
        j["prov:agent"] = from_activity ? e.to : e.from;
    }
    (void)to;
    j["cg:from"] = e.from;
    j["cg:to"] = e.to;
    j["cg:relation"] = std::string(to_string(e.relation));
    j["cg:count"] = e.count;
    j["cg:first_ts"] = e.first_ts;
    j["cg:last_ts"] = e.last_ts;
    return j;
}

constexpr std::array<std::string_view, 4> kStatements = {"used", "wasGeneratedBy", "wasDerivedFrom",
                                                          "wasAssociatedWith"};

[[noreturn]] void invalid(const std::string &what) { throw Error(Errc::InvalidDocument, what); }

}  // namespace

std::string ProvDocument::to_json(int indent) const {
    ordered_json doc;
    doc["prefix"] = {{"cg", "urn:cgaudit:"}, {"prov", "http://www.w3.org/ns/prov#"}};
    ordered_json activity = ordered_json::object();
    ordered_json entity = ordered_json::object();
    for (const auto &n : nodes_) {
        (n.kind == NodeKind::task ? activity : entity)[n.id] = node_json(n);
    }
    doc["activity"] = std::move(activity);
    doc["entity"] = std::move(entity);

    std::map<std::string_view, ordered_json> statements;
    for (auto s : kStatements) statements[s] = ordered_json::object();
    for (const auto &e : edges_) {
        const auto mapping = prov_mapping(e.relation);
        statements[mapping.statement][e.id] = edge_json(e, *this, mapping.statement);
        if (!mapping.second_statement.empty()) {
            statements[mapping.second_statement][e.id] = edge_json(e, *this, mapping.second_statement);
        }
    }
    for (auto s : kStatements) doc[std::string(s)] = std::move(statements[s]);
    return doc.dump(indent);
}

ProvDocument ProvDocument::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        invalid(e.what());
    }
    if (!j.is_object()) invalid("document must be a JSON object");

    // nlohmann::json sorts keys; rebuild insertion order from versions and
    // edge timestamps so node-before-edge holds.
    ProvDocument doc;
    try {
        std::vector<ProvNode> nodes;
        for (std::string_view cls : {"activity", "entity"}) {
            if (!j.contains(cls)) continue;
            for (const auto &[id, body] : j.at(std::string(cls)).items()) {
                ProvNode n;
                n.id = id;
                n.object = KernelObjectId::parse(body.at("cg:object").get<std::string>());
                n.version = body.at("cg:version").get<std::uint32_t>();
                n.kind = parse_node_kind(body.at("cg:kind").get<std::string>());
                if (body.contains("cg:security_context")) {
                    n.security_context = body.at("cg:security_context").get<std::string>();
                }
                if ((n.kind == NodeKind::task) != (cls == "activity")) invalid("node " + id + " filed under " + std::string(cls));
                if (n.id != node_id(n.object, n.version)) invalid("node id " + id + " does not match its object");
                nodes.push_back(std::move(n));
            }
        }
        std::stable_sort(nodes.begin(), nodes.end(),
                         [](const ProvNode &a, const ProvNode &b) { return a.version < b.version; });
        for (auto &n : nodes) doc.add(n);

        std::map<std::string, ProvEdge> edges;
        for (auto s : kStatements) {
            const std::string key(s);
            if (!j.contains(key)) continue;
            for (const auto &[id, body] : j.at(key).items()) {
                ProvEdge e;
                e.id = id;
                e.from = body.at("cg:from").get<std::string>();
                e.to = body.at("cg:to").get<std::string>();
                e.relation = parse_relation(body.at("cg:relation").get<std::string>());
                e.count = body.at("cg:count").get<std::uint32_t>();
                e.first_ts = body.at("cg:first_ts").get<std::uint64_t>();
                e.last_ts = body.at("cg:last_ts").get<std::uint64_t>();
                if (e.count == 0) invalid("edge " + id + " has zero multiplicity");
                if (prov_mapping(e.relation).statement != s && prov_mapping(e.relation).second_statement != s) {
                    invalid("edge " + id + " (" + std::string(to_string(e.relation)) + ") filed under " + key);
                }
                auto [it, inserted] = edges.try_emplace(id, e);
                if (!inserted && !(it->second == e)) invalid("conflicting statements for edge " + id);
            }
        }
        std::vector<ProvEdge> ordered;
        for (auto &[_, e] : edges) ordered.push_back(std::move(e));
        std::stable_sort(ordered.begin(), ordered.end(),
                         [](const ProvEdge &a, const ProvEdge &b) { return a.first_ts < b.first_ts; });
        for (auto &e : ordered) doc.add(e);
    } catch (const Error &e) {
        if (e.code() == Errc::InvalidDocument) throw;
        invalid(e.what());
    } catch (const nlohmann::json::exception &e) {
        invalid(e.what());
    }
    return doc;
}

ProvDocument ProvDocument::load(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::InvalidDocument, "cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

// ---------------------------------------------------------------------------

std::string element_to_line(const ProvElement &element) {
    ordered_json j;
    if (const auto *n = std::get_if<ProvNode>(&element)) {
        j["type"] = "node";
        j["id"] = n->id;
        j["object"] = n->object.to_string();
        j["version"] = n->version;
        j["kind"] = std::string(to_string(n->kind));
        j["prov"] = std::string(prov_class(n->kind));
        if (n->security_context) j["security_context"] = *n->security_context;
    } else {
        const auto &e = std::get<ProvEdge>(element);
        j["type"] = "edge";
        j["id"] = e.id;
        j["from"] = e.from;
        j["to"] = e.to;
        j["relation"] = std::string(to_string(e.relation));
        j["prov"] = std::string(prov_mapping(e.relation).statement);
        j["count"] = e.count;
        j["first_ts"] = e.first_ts;
        j["last_ts"] = e.last_ts;
    }
    return j.dump();
}

ProvElement element_from_line(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        const auto type = j.at("type").get<std::string>();
        if (type == "node") {
            ProvNode n;
            n.id = j.at("id").get<std::string>();
            n.object = KernelObjectId::parse(j.at("object").get<std::string>());
            n.version = j.at("version").get<std::uint32_t>();
            n.kind = parse_node_kind(j.at("kind").get<std::string>());
            if (j.contains("security_context")) n.security_context = j.at("security_context").get<std::string>();
            return n;
        }
        if (type == "edge") {
            ProvEdge e;
            e.id = j.at("id").get<std::string>();
            e.from = j.at("from").get<std::string>();
            e.to = j.at("to").get<std::string>();
            e.relation = parse_relation(j.at("relation").get<std::string>());
            e.count = j.at("count").get<std::uint32_t>();
            e.first_ts = j.at("first_ts").get<std::uint64_t>();
            e.last_ts = j.at("last_ts").get<std::uint64_t>();
            return e;
        }
        invalid("unknown element type '" + type + "'");
    } catch (const nlohmann::json::exception &e) {
        invalid(e.what());
    }
}

void Serializer::append(const ProvElement &element) {
    doc_.add(element, allow_dangling_);
    if (stream_) {
        *stream_ << element_to_line(element) << '\n';
        if (!*stream_) throw Error(Errc::SinkError, "provenance stream write failed");
    }
    ++serialized_;
}

ProvDocument serialize(const std::vector<ProvElement> &elements) {
    Serializer s;
    for (const auto &e : elements) s.append(e);
    return s.take_document();
}

// ---------------------------------------------------------------------------

namespace {

struct IndexedGraph {
    std::vector<std::vector<std::size_t>> succ;
    std::vector<std::size_t> indegree;
};

IndexedGraph index_graph(const ProvDocument &doc, std::unordered_map<std::string, std::size_t> &ids) {
    ids.clear();
    for (std::size_t i = 0; i < doc.nodes().size(); ++i) ids[doc.nodes()[i].id] = i;
    IndexedGraph g;
    g.succ.resize(doc.nodes().size());
    g.indegree.assign(doc.nodes().size(), 0);
    for (const auto &e : doc.edges()) {
        auto f = ids.find(e.from);
        auto t = ids.find(e.to);
        if (f == ids.end() || t == ids.end()) continue;
        g.succ[f->second].push_back(t->second);
        ++g.indegree[t->second];
    }
    return g;
}

std::vector<std::size_t> topo_order(IndexedGraph g) {
    std::vector<std::size_t> order;
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < g.indegree.size(); ++i) {
        if (g.indegree[i] == 0) ready.push_back(i);
    }
    while (!ready.empty()) {
        const std::size_t n = ready.back();
        ready.pop_back();
        order.push_back(n);
        for (std::size_t m : g.succ[n]) {
            if (--g.indegree[m] == 0) ready.push_back(m);
        }
    }
    return order;
}

}  // namespace

bool is_acyclic(const ProvDocument &doc) {
    std::unordered_map<std::string, std::size_t> ids;
    auto g = index_graph(doc, ids);
    return topo_order(std::move(g)).size() == doc.nodes().size();
}

ObjectFlow latest_version_reachability(const ProvDocument &doc) {
    std::unordered_map<std::string, std::size_t> ids;
    auto g = index_graph(doc, ids);
    const auto order = topo_order(g);
    if (order.size() != doc.nodes().size()) throw Error(Errc::InvalidDocument, "graph has a cycle");

    // Dense object numbering, then one bitset of reaching objects per node.
    std::map<std::string, std::size_t> object_index;
    std::vector<std::size_t> node_object(doc.nodes().size());
    for (std::size_t i = 0; i < doc.nodes().size(); ++i) {
        auto [it, _] = object_index.try_emplace(doc.nodes()[i].object.to_string(), object_index.size());
        node_object[i] = it->second;
    }
    const std::size_t words = (object_index.size() + 63) / 64;
    std::vector<std::vector<std::uint64_t>> reach(doc.nodes().size(), std::vector<std::uint64_t>(words, 0));
    for (std::size_t n : order) {
        reach[n][node_object[n] / 64] |= 1ULL << (node_object[n] % 64);
        for (std::size_t m : g.succ[n]) {
            for (std::size_t w = 0; w < words; ++w) reach[m][w] |= reach[n][w];
        }
    }

    std::vector<std::string> object_names(object_index.size());
    for (const auto &[name, idx] : object_index) object_names[idx] = name;
    std::vector<std::size_t> latest(object_index.size(), SIZE_MAX);
    for (std::size_t i = 0; i < doc.nodes().size(); ++i) {
        const std::size_t o = node_object[i];
        if (latest[o] == SIZE_MAX || doc.nodes()[latest[o]].version < doc.nodes()[i].version) latest[o] = i;
    }

    ObjectFlow flow;
    for (std::size_t b = 0; b < latest.size(); ++b) {
        const auto &bits = reach[latest[b]];
        for (std::size_t a = 0; a < object_index.size(); ++a) {
            if (a != b && (bits[a / 64] >> (a % 64) & 1ULL)) flow.emplace(object_names[a], object_names[b]);
        }
    }
    return flow;
}

bool is_subgraph(const ProvDocument &sub, const ProvDocument &super) {
    for (const auto &n : sub.nodes()) {
        const ProvNode *m = super.node(n.id);
        if (!m || m->kind != n.kind || m->version != n.version) return false;
    }
    std::map<std::tuple<std::string, std::string, Relation, std::uint32_t>, int> edges;
    for (const auto &e : super.edges()) ++edges[{e.from, e.to, e.relation, e.count}];
    for (const auto &e : sub.edges()) {
        if (--edges[{e.from, e.to, e.relation, e.count}] < 0) return false;
    }
    return true;
}

}  // namespace cgaudit
