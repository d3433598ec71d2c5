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
#include <doctest.h>

#include <sstream>

#include "cgaudit/error.hpp"
#include "cgaudit/harness.hpp"
#include "cgaudit/motif.hpp"
#include "cgaudit/prov_document.hpp"
#include "support.hpp"

using namespace cgaudit;

namespace {

ProvNode node(const KernelObjectId &o, std::uint32_t v, NodeKind k = NodeKind::task) {
    return ProvNode{node_id(o, v), o, v, k, std::nullopt};
}

ProvEdge edge(const std::string &id, const ProvNode &a, const ProvNode &b, Relation r) {
    return ProvEdge{id, a.id, b.id, r, 1, 1, 1};
}

}  // namespace

TEST_SUITE("prov_document") {

TEST_CASE("empty input is an empty document") {
    const auto d = serialize({});
    CHECK(d.empty());
    CHECK(ProvDocument::from_json(d.to_json()).empty());
}

TEST_CASE("edge before its node is a dangling edge") {
    const auto a = node(task_id(1), 1), b = node(task_id(1), 2);
    try {
        serialize({a, edge("e1", a, b, Relation::version), b});
        FAIL("expected DanglingEdge");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::DanglingEdge);
    }
}

TEST_CASE("an edge element with a known id updates the multiplicity") {
    const auto a = node(task_id(1), 2), f = node(inode_id("x", 1), 1, NodeKind::file);
    auto e = edge("e1", f, a, Relation::read);
    ProvDocument d;
    d.add(a);
    d.add(f);
    d.add(e);
    e.count = 3;
    e.last_ts = 9;
    d.add(e);
    CHECK(d.edges().size() == 1);
    CHECK(d.edges()[0].count == 3);
}

TEST_CASE("json round trip keeps everything") {
    auto d = run_end_to_end(Scenario::capture_everywhere(), fig4_trace()).document;
    const auto again = ProvDocument::from_json(d.to_json());
    auto by_id = [](auto v) {
        std::sort(v.begin(), v.end(), [](const auto &a, const auto &b) { return a.id < b.id; });
        return v;
    };
    CHECK(by_id(again.nodes()) == by_id(d.nodes()));
    CHECK(by_id(again.edges()) == by_id(d.edges()));
    CHECK_THROWS_AS(ProvDocument::from_json("{\"entity\": 3}"), Error);
}

TEST_CASE("stream lines round trip") {
    const auto n = node(task_id(3), 4);
    const auto back = element_from_line(element_to_line(n));
    CHECK(std::get<ProvNode>(back) == n);
}

TEST_CASE("mapping table") {
    CHECK(prov_mapping(Relation::read).statement == "used");
    CHECK(prov_mapping(Relation::write).statement == "wasGeneratedBy");
    CHECK(prov_mapping(Relation::version).statement == "wasDerivedFrom");
    CHECK(prov_mapping(Relation::fork).second_statement == "wasAssociatedWith");
    CHECK(prov_mapping(Relation::create).second_statement == "wasAssociatedWith");
    CHECK(prov_class(NodeKind::task) == "activity");
    CHECK(prov_class(NodeKind::pipe) == "entity");
}

TEST_CASE("the two-chain shape of the fork scenario") {
    const auto d = run_end_to_end(Scenario::capture_everywhere(), fig4_trace()).document;
    std::map<NodeKind, std::set<std::string>> objects;
    for (const auto &n : d.nodes()) objects[n.kind].insert(n.object.to_string());
    CHECK(objects[NodeKind::task].size() == 2);
    CHECK(objects[NodeKind::pipe].size() == 1);
    CHECK(objects[NodeKind::file].size() == 1);
    const auto json = nlohmann::json::parse(d.to_json());
    CHECK(json["wasDerivedFrom"].size() == 3);
}

TEST_CASE("cycle detection agrees with a DFS") {
    const auto a = node(task_id(1), 1), b = node(task_id(2), 1), c = node(task_id(3), 1);
    ProvDocument d;
    d.add(a);
    d.add(b);
    d.add(c);
    d.add(edge("e1", a, b, Relation::read));
    d.add(edge("e2", b, c, Relation::read));
    CHECK(is_acyclic(d));
    CHECK(cgtest::oracle_acyclic(d));
    d.add(edge("e3", c, a, Relation::read));
    CHECK_FALSE(is_acyclic(d));
    CHECK_FALSE(cgtest::oracle_acyclic(d));
}

TEST_CASE("latest-version reachability matches a backwards search") {
    cgtest::Rng rng(77);
    for (int round = 0; round < 30; ++round) {
        const auto trace = cgtest::random_trace(rng, 400);
        const auto d = run_end_to_end(Scenario::capture_everywhere(), trace).document;
        REQUIRE(latest_version_reachability(d) == cgtest::oracle_flow(d));
    }
}

TEST_CASE("remove_edge and subgraph") {
    auto d = run_end_to_end(Scenario::capture_everywhere(), fig4_trace()).document;
    auto smaller = d;
    REQUIRE(smaller.remove_edge(d.edges().front().id));
    CHECK(is_subgraph(smaller, d));
    CHECK_FALSE(is_subgraph(d, smaller));
    CHECK_FALSE(smaller.remove_edge("nope"));
}

}  // TEST_SUITE
