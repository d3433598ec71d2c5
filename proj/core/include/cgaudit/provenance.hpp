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
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cgaudit/dispatch.hpp"
#include "cgaudit/object_store.hpp"
#include "cgaudit/prov_document.hpp"
#include "cgaudit/ring_buffer.hpp"

namespace cgaudit {

// Fixed when the engine is built; empty sets record everything.
struct CaptureFilter {
    std::set<Relation> relations;
    std::set<NodeKind> node_kinds;
    std::optional<std::set<std::string>> context_allowlist;

    bool records(Relation rel) const { return relations.empty() || relations.count(rel) != 0; }
    bool records(NodeKind kind) const { return node_kinds.empty() || node_kinds.count(kind) != 0; }
};

struct CaptureOptions {
    bool merge = true;
    bool version_avoidance = true;
    CaptureFilter filter;
};

// Where the engine writes elements (normally a ring buffer).
class ElementSink {
public:
    virtual ~ElementSink() = default;
    virtual void push(ProvElement element) = 0;
};

class VectorSink final : public ElementSink {
public:
    void push(ProvElement element) override { elements.push_back(std::move(element)); }
    std::vector<ProvElement> elements;
};

class RingSink final : public ElementSink {
public:
    explicit RingSink(RingBuffer<ProvElement> &ring) : ring_(ring) {}
    void push(ProvElement element) override { ring_.push(std::move(element)); }

private:
    RingBuffer<ProvElement> &ring_;
};

// Per-object capture bookkeeping, kept in the object's local storage.
struct CaptureState {
    struct Inflow {
        KernelObjectId peer;
        std::uint32_t peer_version = 0;
        Relation relation = Relation::read;
        // The edge that carried it, for merging.
        std::string edge_id;
        std::string edge_from;
        std::uint32_t edge_count = 0;
        std::uint64_t edge_first_ts = 0;

        friend bool operator==(const Inflow &, const Inflow &) = default;
    };
    struct Outflow {
        KernelObjectId peer;
        Relation relation = Relation::read;
        friend bool operator==(const Outflow &, const Outflow &) = default;
    };

    std::uint32_t version = 1;
    std::uint32_t emitted_upto = 0;
    bool opaque = false;
    std::optional<Inflow> last_incoming;
    std::optional<Outflow> last_outgoing;

    friend bool operator==(const CaptureState &, const CaptureState &) = default;

    Bytes encode() const;
    static CaptureState decode(const Bytes &bytes);
};

struct CaptureCounters {
    std::uint64_t events = 0;
    std::uint64_t opaque_skips = 0;
    std::uint64_t elements = 0;
    std::uint64_t version_bumps = 0;
    std::uint64_t avoided_versions = 0;
    std::uint64_t merged_edges = 0;
};

// Turns hook events into provenance elements following capture_rule().
class CaptureEngine final : public ProvenanceSink {
public:
    static constexpr std::string_view kStateSlot = "prov.state";
    static constexpr std::string_view kContextSlot = "security.context";

    CaptureEngine(ObjectStore &store, ElementSink &out, CaptureOptions options = {});

    void on_event(const HookEvent &ev) override { capture(ev); }

    // Returns the elements produced for this event (also pushed to the sink).
    // Emits nothing when any participating object is opaque.
    std::vector<ProvElement> capture(const HookEvent &ev);

    // Throws Error(DeadObject).
    void set_opaque(const KernelObjectId &object, bool opaque);
    bool is_opaque(const KernelObjectId &object);

    // Records an inflow into `object` from `peer` and returns the object's
    // version afterwards. The bump is skipped (version avoidance) when the
    // inflow repeats the last one with no other inflow in between.
    std::uint32_t bump_version(const KernelObjectId &object, const KernelObjectId &peer, Relation relation,
                               std::uint64_t ts);

    std::uint32_t current_version(const KernelObjectId &object);
    CaptureCounters counters() const noexcept { return counters_; }
    const CaptureOptions &options() const noexcept { return options_; }

private:
    struct Participant;
    struct Batch;

    CaptureState load(const KernelObjectId &object);
    void store(const KernelObjectId &object, const CaptureState &state);
    std::optional<std::string> context_of(const KernelObjectId &task);
    void ensure_node(Batch &batch, const KernelObjectId &object, CaptureState &state, std::uint32_t version);
    void emit_edge(Batch &batch, ProvEdge edge, NodeKind from_kind, NodeKind to_kind);
    void apply_inflow(Batch &batch, const KernelObjectId &from, CaptureState &from_state, const KernelObjectId &to,
                      CaptureState &to_state, Relation rel, bool spawn, bool known);

    ObjectStore &store_;
    ElementSink &out_;
    CaptureOptions options_;
    SlotKey state_slot_;
    SlotKey context_slot_;
    std::uint64_t next_edge_ = 1;
    CaptureCounters counters_;
};

// Moves every pending element into the serializer; returns how many.
std::size_t drain(RingBuffer<ProvElement> &buffer, Serializer &serializer);

}  // namespace cgaudit
