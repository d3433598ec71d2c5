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

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cgaudit/event_model.hpp"
#include "cgaudit/object_store.hpp"

namespace cgaudit {

struct CgroupId {
    std::uint32_t value = 0;
    friend bool operator==(CgroupId, CgroupId) = default;
    friend auto operator<=>(CgroupId, CgroupId) = default;
};

// 0 allows; any other value denies with that code.
class ReturnCode {
public:
    constexpr ReturnCode() = default;
    static constexpr ReturnCode allow() { return ReturnCode(); }
    // Throws std::invalid_argument for code 0.
    static ReturnCode deny(int code);

    constexpr int value() const noexcept { return value_; }
    constexpr bool allowed() const noexcept { return value_ == 0; }
    constexpr bool denied() const noexcept { return value_ != 0; }

    friend bool operator==(ReturnCode, ReturnCode) = default;

private:
    constexpr explicit ReturnCode(int v) : value_(v) {}
    int value_ = 0;
};

// Receives hook events from capture programs.
class ProvenanceSink {
public:
    virtual ~ProvenanceSink() = default;
    virtual void on_event(const HookEvent &ev) = 0;
};

struct ProgramContext {
    ObjectStore &store;
    ProvenanceSink *sink;  // null for programs marked opaque_to_capture
    CgroupId cgroup;
};

struct AuditProgram {
    using Body = std::function<ReturnCode(const HookEvent &, ProgramContext &)>;

    std::string id;
    HookId hook = HookId::file_open;
    Body body;
    bool opaque_to_capture = false;
};

using ProgramPtr = std::shared_ptr<const AuditProgram>;

ProgramPtr make_program(std::string id, HookId hook, AuditProgram::Body body, bool opaque_to_capture = false);

struct AttachmentHandle {
    CgroupId cgroup;
    HookId hook = HookId::file_open;
    std::uint64_t serial = 0;
};

struct ExecutedProgram {
    CgroupId cgroup;
    std::string program;

    friend bool operator==(const ExecutedProgram &, const ExecutedProgram &) = default;
};

struct DispatchResult {
    ReturnCode final;
    std::vector<ExecutedProgram> executed;
};

// Single-rooted cgroup hierarchy with per-(cgroup, hook) FIFO program lists.
//
// Lists are copy-on-write: dispatch takes an immutable snapshot of every list
// on the traversal path, so concurrent attach/detach never changes a dispatch
// already in flight.
class CgroupTree {
public:
    struct Attachment {
        std::uint64_t serial;
        ProgramPtr program;
    };
    using ListSnapshot = std::shared_ptr<const std::vector<Attachment>>;

    CgroupTree();

    CgroupId root() const noexcept { return CgroupId{0}; }
    CgroupId create(CgroupId parent, std::string name);
    std::optional<CgroupId> parent(CgroupId id) const;
    std::string name(CgroupId id) const;
    std::optional<CgroupId> find(std::string_view name) const;
    std::size_t size() const;
    // Inclusive: a node is its own descendant.
    bool is_descendant(CgroupId node, CgroupId ancestor) const;
    // Leaf first, root last.
    std::vector<CgroupId> path_to_root(CgroupId leaf) const;

    // Appends to the FIFO list. Throws Error(HookMismatch) when the program was
    // written for another hook and Error(MultiNotAllowed) when the list is
    // nonempty and either this attach or the list forbids multiple programs.
    AttachmentHandle attach(CgroupId cgroup, HookId hook, ProgramPtr program, bool allow_multi = true);
    // Throws Error(StaleHandle) for unknown or already detached handles.
    void detach(const AttachmentHandle &handle);

    std::vector<ProgramPtr> programs(CgroupId cgroup, HookId hook) const;
    std::size_t attachment_count() const;

    // Snapshots for every cgroup on path_to_root(leaf), taken atomically.
    std::vector<std::pair<CgroupId, ListSnapshot>> snapshot_path(CgroupId leaf, HookId hook) const;

private:
    struct HookList {
        ListSnapshot programs = std::make_shared<const std::vector<Attachment>>();
        bool allow_multi = true;
    };
    struct Node {
        std::string name;
        std::optional<CgroupId> parent;
        std::array<HookList, kHookCount> lists;
    };

    void check(CgroupId id) const;

    mutable std::shared_mutex mutex_;
    std::vector<Node> nodes_;
    std::uint64_t next_serial_ = 1;
};

// Task -> cgroup placement.
class TaskCgroupMap {
public:
    void assign(const KernelObjectId &task, CgroupId cgroup);
    bool contains(const KernelObjectId &task) const;
    // Throws Error(UnknownTask).
    CgroupId cgroup_of(const KernelObjectId &task) const;
    void erase(const KernelObjectId &task);
    std::size_t size() const noexcept { return map_.size(); }

private:
    std::unordered_map<KernelObjectId, CgroupId> map_;
};

// Throws Error(UnknownTask) when the task has no placement.
void migrate_task(const KernelObjectId &task, CgroupId to, TaskCgroupMap &map);

struct DispatchCounters {
    std::uint64_t events = 0;
    std::uint64_t programs_run = 0;
    std::uint64_t critical_sections = 0;
};

// Runs the programs attached along the subject's cgroup path.
class Dispatcher {
public:
    Dispatcher(const CgroupTree &tree, ObjectStore &store, ProvenanceSink *sink = nullptr)
        : tree_(tree), store_(store), sink_(sink) {}

    // Leaf cgroup first, FIFO within a cgroup, then each ancestor up to the
    // root. The first deny ends the traversal and becomes the result.
    DispatchResult dispatch_event(const HookEvent &ev, const TaskCgroupMap &map) const;

    DispatchCounters counters() const;

private:
    const CgroupTree &tree_;
    ObjectStore &store_;
    ProvenanceSink *sink_;
    mutable std::atomic<std::uint64_t> events_{0};
    mutable std::atomic<std::uint64_t> programs_run_{0};
    mutable std::atomic<std::uint64_t> critical_sections_{0};
};

}  // namespace cgaudit
