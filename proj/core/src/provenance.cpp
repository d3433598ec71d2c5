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

#include "cgaudit/provenance.hpp"

#include <algorithm>
#include <cstring>

#include "cgaudit/error.hpp"

namespace cgaudit {

// ---------------------------------------------------------------------------
// CaptureState codec. Little-endian, length-prefixed strings.
// ---------------------------------------------------------------------------

namespace {

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void str(const std::string &s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }
    void id(const KernelObjectId &o) {
        u8(static_cast<std::uint8_t>(o.kind));
        str(o.fs_uuid);
        u64(o.local_id);
        u32(o.generation);
    }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class Reader {
public:
    explicit Reader(const Bytes &in) : in_(in) {}
    std::uint8_t u8() {
        need(1);
        return in_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }
    KernelObjectId id() {
        KernelObjectId o;
        o.kind = static_cast<ObjectKind>(u8());
        o.fs_uuid = str();
        o.local_id = u64();
        o.generation = u32();
        return o;
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > in_.size()) throw Error(Errc::StorageFailure, "truncated capture state");
    }
    const Bytes &in_;
    std::size_t pos_ = 0;
};

}  // namespace

Bytes CaptureState::encode() const {
    Writer w;
    w.u32(version);
    w.u32(emitted_upto);
    w.u8(opaque ? 1 : 0);
    w.u8(last_incoming ? 1 : 0);
    if (last_incoming) {
        w.id(last_incoming->peer);
        w.u32(last_incoming->peer_version);
        w.u8(static_cast<std::uint8_t>(last_incoming->relation));
        w.str(last_incoming->edge_id);
        w.str(last_incoming->edge_from);
        w.u32(last_incoming->edge_count);
        w.u64(last_incoming->edge_first_ts);
    }
    w.u8(last_outgoing ? 1 : 0);
    if (last_outgoing) {
        w.id(last_outgoing->peer);
        w.u8(static_cast<std::uint8_t>(last_outgoing->relation));
    }
    return w.take();
}

CaptureState CaptureState::decode(const Bytes &bytes) {
    Reader r(bytes);
    CaptureState s;
    s.version = r.u32();
    s.emitted_upto = r.u32();
    s.opaque = r.u8() != 0;
    if (r.u8() != 0) {
        Inflow in;
        in.peer = r.id();
        in.peer_version = r.u32();
        in.relation = static_cast<Relation>(r.u8());
        in.edge_id = r.str();
        in.edge_from = r.str();
        in.edge_count = r.u32();
        in.edge_first_ts = r.u64();
        s.last_incoming = std::move(in);
    }
    if (r.u8() != 0) {
        Outflow out;
        out.peer = r.id();
        out.relation = static_cast<Relation>(r.u8());
        s.last_outgoing = std::move(out);
    }
    return s;
}

// ---------------------------------------------------------------------------

struct CaptureEngine::Participant {
    KernelObjectId id;
    CaptureState state;
    bool known = false;
};

struct CaptureEngine::Batch {
    std::vector<ProvElement> produced;
    bool emit_allowed = true;
    std::uint64_t ts = 0;
    std::optional<std::string> subject_context;
    KernelObjectId subject;
};

CaptureEngine::CaptureEngine(ObjectStore &store, ElementSink &out, CaptureOptions options)
    : store_(store),
      out_(out),
      options_(std::move(options)),
      state_slot_(store.slot(kStateSlot)),
      context_slot_(store.slot(kContextSlot)) {}

CaptureState CaptureEngine::load(const KernelObjectId &object) {
    auto handle = store_.storage_get(object, false);
    if (!handle) return {};
    auto bytes = handle->get(state_slot_);
    return bytes ? CaptureState::decode(*bytes) : CaptureState{};
}

void CaptureEngine::store(const KernelObjectId &object, const CaptureState &state) {
    store_.storage_get(object, true)->put(state_slot_, state.encode());
}

std::optional<std::string> CaptureEngine::context_of(const KernelObjectId &task) {
    auto handle = store_.storage_get(cred_of(task), false);
    if (!handle) return std::nullopt;
    auto bytes = handle->get(context_slot_);
    if (!bytes) return std::nullopt;
    return to_text(*bytes);
}

void CaptureEngine::ensure_node(Batch &batch, const KernelObjectId &object, CaptureState &state,
                                std::uint32_t version) {
    // Suppressed batches leave the node pending so a later allowed edge still
    // finds it.
    if (!batch.emit_allowed) return;
    const NodeKind kind = node_kind_of(object.kind);
    while (state.emitted_upto < version) {
        ++state.emitted_upto;
        if (!options_.filter.records(kind)) continue;
        ProvNode node;
        node.id = node_id(object, state.emitted_upto);
        node.object = object;
        node.version = state.emitted_upto;
        node.kind = kind;
        if (object == batch.subject) node.security_context = batch.subject_context;
        batch.produced.emplace_back(std::move(node));
    }
}

void CaptureEngine::emit_edge(Batch &batch, ProvEdge edge, NodeKind from_kind, NodeKind to_kind) {
    if (!batch.emit_allowed) return;
    const auto &f = options_.filter;
    if (!f.records(edge.relation) || !f.records(from_kind) || !f.records(to_kind)) return;
    batch.produced.emplace_back(std::move(edge));
}

void CaptureEngine::apply_inflow(Batch &batch, const KernelObjectId &from, CaptureState &from_state,
                                 const KernelObjectId &to, CaptureState &to_state, Relation rel, bool spawn,
                                 bool known) {
    const NodeKind from_kind = node_kind_of(from.kind);
    const NodeKind to_kind = node_kind_of(to.kind);
    const std::uint32_t from_version = from_state.version;
    ensure_node(batch, from, from_state, from_version);
    const std::string from_node = node_id(from, from_version);

    auto new_edge = [&](std::string to_node) {
        ProvEdge e;
        e.id = "e" + std::to_string(next_edge_++);
        e.from = from_node;
        e.to = std::move(to_node);
        e.relation = rel;
        e.count = 1;
        e.first_ts = e.last_ts = batch.ts;
        return e;
    };
    auto remember = [&](const ProvEdge &e) {
        to_state.last_incoming =
            CaptureState::Inflow{from, from_version, rel, e.id, e.from, e.count, e.first_ts};
    };

    const auto &last = to_state.last_incoming;
    const bool repeat = last && last->peer == from && last->peer_version == from_version && last->relation == rel;

    if (spawn && !known) {
        to_state.version = 1;
        ensure_node(batch, to, to_state, 1);
        ProvEdge e = new_edge(node_id(to, 1));
        remember(e);
        emit_edge(batch, std::move(e), from_kind, to_kind);
    } else if (options_.version_avoidance && repeat) {
        ++counters_.avoided_versions;
        ensure_node(batch, to, to_state, to_state.version);
        if (options_.merge) {
            ++counters_.merged_edges;
            ProvEdge e;
            e.id = last->edge_id;
            e.from = last->edge_from;
            e.to = node_id(to, to_state.version);
            e.relation = rel;
            e.count = last->edge_count + 1;
            e.first_ts = last->edge_first_ts;
            e.last_ts = batch.ts;
            remember(e);
            emit_edge(batch, std::move(e), from_kind, to_kind);
        } else {
            ProvEdge e = new_edge(node_id(to, to_state.version));
            remember(e);
            emit_edge(batch, std::move(e), from_kind, to_kind);
        }
    } else {
        ensure_node(batch, to, to_state, to_state.version);
        const std::uint32_t old_version = to_state.version++;
        ++counters_.version_bumps;
        ensure_node(batch, to, to_state, to_state.version);

        ProvEdge v;
        v.id = "e" + std::to_string(next_edge_++);
        v.from = node_id(to, old_version);
        v.to = node_id(to, to_state.version);
        v.relation = Relation::version;
        v.first_ts = v.last_ts = batch.ts;
        emit_edge(batch, std::move(v), to_kind, to_kind);

        ProvEdge e = new_edge(node_id(to, to_state.version));
        remember(e);
        emit_edge(batch, std::move(e), from_kind, to_kind);
    }
    from_state.last_outgoing = CaptureState::Outflow{to, rel};
}

std::vector<ProvElement> CaptureEngine::capture(const HookEvent &ev) {
    ++counters_.events;
    const auto steps = capture_rule(ev.hook, ev.access);

    std::vector<Participant> parts;
    auto participant = [&](Role role) -> std::size_t {
        KernelObjectId id;
        switch (role) {
            case Role::subject: id = ev.subject; break;
            case Role::object:
                if (!ev.object) throw Error(Errc::StorageFailure, std::string(to_string(ev.hook)) + " event without object");
                id = *ev.object;
                break;
            case Role::child_memory:
                if (!ev.object) throw Error(Errc::StorageFailure, "fork event without child");
                id = memory_of(*ev.object);
                break;
        }
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (parts[i].id == id) return i;
        }
        parts.push_back(Participant{std::move(id), {}, false});
        return parts.size() - 1;
    };

    struct Bound {
        StepKind kind;
        std::size_t from;
        std::size_t to;
        Relation relation;
    };
    std::vector<Bound> bound;
    for (const auto &step : steps) {
        const std::size_t from = participant(step.from);
        const std::size_t to = participant(step.to);
        if (step.kind != StepKind::touch && from == to) {
            throw Error(Errc::StorageFailure, "self-referencing flow on " + parts[from].id.to_string());
        }
        bound.push_back(Bound{step.kind, from, to, step.relation});
    }

    for (auto &p : parts) {
        auto handle = store_.storage_get(p.id, false);
        if (handle) {
            if (auto bytes = handle->get(state_slot_)) {
                p.state = CaptureState::decode(*bytes);
                p.known = true;
            }
        }
        if (p.state.opaque) {
            ++counters_.opaque_skips;
            return {};
        }
    }

    Batch batch;
    batch.ts = ev.origin ? ev.origin->timestamp : 0;
    batch.subject = ev.subject;
    batch.subject_context = context_of(ev.subject);
    if (options_.filter.context_allowlist) {
        batch.emit_allowed =
            batch.subject_context && options_.filter.context_allowlist->count(*batch.subject_context) != 0;
    }

    for (const auto &b : bound) {
        Participant &from = parts[b.from];
        Participant &to = parts[b.to];
        switch (b.kind) {
            case StepKind::touch: ensure_node(batch, from.id, from.state, from.state.version); break;
            case StepKind::flow:
                apply_inflow(batch, from.id, from.state, to.id, to.state, b.relation, false, to.known);
                break;
            case StepKind::spawn:
                apply_inflow(batch, from.id, from.state, to.id, to.state, b.relation, true, to.known);
                break;
        }
        // Later steps of the same event see the object as known.
        from.known = true;
        to.known = true;
    }

    for (const auto &p : parts) store(p.id, p.state);
    counters_.elements += batch.produced.size();
    for (const auto &element : batch.produced) out_.push(element);
    return std::move(batch.produced);
}

void CaptureEngine::set_opaque(const KernelObjectId &object, bool opaque) {
    if (!store_.is_live(object) && store_.is_known(object)) throw Error(Errc::DeadObject, object.to_string());
    auto handle = store_.storage_get(object, true);
    CaptureState state;
    if (auto bytes = handle->get(state_slot_)) state = CaptureState::decode(*bytes);
    state.opaque = opaque;
    handle->put(state_slot_, state.encode());
}

bool CaptureEngine::is_opaque(const KernelObjectId &object) { return load(object).opaque; }

std::uint32_t CaptureEngine::bump_version(const KernelObjectId &object, const KernelObjectId &peer,
                                          Relation relation, std::uint64_t ts) {
    CaptureState to_state = load(object);
    CaptureState from_state = load(peer);
    if (to_state.opaque || from_state.opaque) return to_state.version;
    Batch batch;
    batch.ts = ts;
    batch.subject = peer.kind == ObjectKind::task ? peer : object;
    apply_inflow(batch, peer, from_state, object, to_state, relation, false, true);
    store(peer, from_state);
    store(object, to_state);
    counters_.elements += batch.produced.size();
    for (const auto &element : batch.produced) out_.push(element);
    return to_state.version;
}

std::uint32_t CaptureEngine::current_version(const KernelObjectId &object) { return load(object).version; }

std::size_t drain(RingBuffer<ProvElement> &buffer, Serializer &serializer) {
    std::size_t n = 0;
    while (auto element = buffer.try_pop()) {
        serializer.append(*element);
        ++n;
    }
    return n;
}

}  // namespace cgaudit
