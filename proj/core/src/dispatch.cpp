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

#include "cgaudit/dispatch.hpp"

#include <mutex>
#include <stdexcept>

#include "cgaudit/error.hpp"

namespace cgaudit {

ReturnCode ReturnCode::deny(int code) {
    if (code == 0) throw std::invalid_argument("deny needs a nonzero code");
    return ReturnCode(code);
}

ProgramPtr make_program(std::string id, HookId hook, AuditProgram::Body body, bool opaque_to_capture) {
    auto prog = std::make_shared<AuditProgram>();
    prog->id = std::move(id);
    prog->hook = hook;
    prog->body = std::move(body);
    prog->opaque_to_capture = opaque_to_capture;
    return prog;
}

// ---------------------------------------------------------------------------

CgroupTree::CgroupTree() { nodes_.push_back(Node{"root", std::nullopt, {}}); }

void CgroupTree::check(CgroupId id) const {
    if (id.value >= nodes_.size()) throw Error(Errc::UnknownCgroup, "cgroup #" + std::to_string(id.value));
}

CgroupId CgroupTree::create(CgroupId parent, std::string name) {
    std::unique_lock lock(mutex_);
    check(parent);
    nodes_.push_back(Node{std::move(name), parent, {}});
    return CgroupId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

std::optional<CgroupId> CgroupTree::parent(CgroupId id) const {
    std::shared_lock lock(mutex_);
    check(id);
    return nodes_[id.value].parent;
}

std::string CgroupTree::name(CgroupId id) const {
    std::shared_lock lock(mutex_);
    check(id);
    return nodes_[id.value].name;
}

std::optional<CgroupId> CgroupTree::find(std::string_view name) const {
    std::shared_lock lock(mutex_);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].name == name) return CgroupId{static_cast<std::uint32_t>(i)};
    }
    return std::nullopt;
}

std::size_t CgroupTree::size() const {
    std::shared_lock lock(mutex_);
    return nodes_.size();
}

bool CgroupTree::is_descendant(CgroupId node, CgroupId ancestor) const {
    std::shared_lock lock(mutex_);
    check(node);
    check(ancestor);
    std::optional<CgroupId> cur = node;
    while (cur) {
        if (*cur == ancestor) return true;
        cur = nodes_[cur->value].parent;
    }
    return false;
}

std::vector<CgroupId> CgroupTree::path_to_root(CgroupId leaf) const {
    std::shared_lock lock(mutex_);
    check(leaf);
    std::vector<CgroupId> path;
    std::optional<CgroupId> cur = leaf;
    while (cur) {
        path.push_back(*cur);
        cur = nodes_[cur->value].parent;
    }
    return path;
}

AttachmentHandle CgroupTree::attach(CgroupId cgroup, HookId hook, ProgramPtr program, bool allow_multi) {
    if (!program) throw std::invalid_argument("attach of a null program");
    if (program->hook != hook) {
        throw Error(Errc::HookMismatch, program->id + " is written for " + std::string(to_string(program->hook)) +
                                            ", not " + std::string(to_string(hook)));
    }
    std::unique_lock lock(mutex_);
    check(cgroup);
    HookList &list = nodes_[cgroup.value].lists[index_of(hook)];
    if (!list.programs->empty() && (!allow_multi || !list.allow_multi)) {
        throw Error(Errc::MultiNotAllowed, nodes_[cgroup.value].name + "/" + std::string(to_string(hook)));
    }
    auto next = std::make_shared<std::vector<Attachment>>(*list.programs);
    const std::uint64_t serial = next_serial_++;
    next->push_back(Attachment{serial, std::move(program)});
    if (list.programs->empty()) list.allow_multi = allow_multi;
    list.programs = std::move(next);
    return AttachmentHandle{cgroup, hook, serial};
}

void CgroupTree::detach(const AttachmentHandle &handle) {
    std::unique_lock lock(mutex_);
    if (handle.cgroup.value >= nodes_.size()) throw Error(Errc::StaleHandle, "unknown cgroup");
    HookList &list = nodes_[handle.cgroup.value].lists[index_of(handle.hook)];
    auto next = std::make_shared<std::vector<Attachment>>();
    next->reserve(list.programs->size());
    bool found = false;
    for (const auto &a : *list.programs) {
        if (a.serial == handle.serial) {
            found = true;
        } else {
            next->push_back(a);
        }
    }
    if (!found) throw Error(Errc::StaleHandle, "attachment #" + std::to_string(handle.serial));
    if (next->empty()) list.allow_multi = true;
    list.programs = std::move(next);
}

std::vector<ProgramPtr> CgroupTree::programs(CgroupId cgroup, HookId hook) const {
    std::shared_lock lock(mutex_);
    check(cgroup);
    std::vector<ProgramPtr> out;
    for (const auto &a : *nodes_[cgroup.value].lists[index_of(hook)].programs) out.push_back(a.program);
    return out;
}

std::size_t CgroupTree::attachment_count() const {
    std::shared_lock lock(mutex_);
    std::size_t n = 0;
    for (const auto &node : nodes_) {
        for (const auto &list : node.lists) n += list.programs->size();
    }
    return n;
}

std::vector<std::pair<CgroupId, CgroupTree::ListSnapshot>> CgroupTree::snapshot_path(CgroupId leaf,
                                                                                     HookId hook) const {
    std::shared_lock lock(mutex_);
    check(leaf);
    std::vector<std::pair<CgroupId, ListSnapshot>> out;
    std::optional<CgroupId> cur = leaf;
    while (cur) {
        const Node &node = nodes_[cur->value];
        out.emplace_back(*cur, node.lists[index_of(hook)].programs);
        cur = node.parent;
    }
    return out;
}

// ---------------------------------------------------------------------------

void TaskCgroupMap::assign(const KernelObjectId &task, CgroupId cgroup) { map_[task] = cgroup; }

bool TaskCgroupMap::contains(const KernelObjectId &task) const { return map_.count(task) != 0; }

CgroupId TaskCgroupMap::cgroup_of(const KernelObjectId &task) const {
    auto it = map_.find(task);
    if (it == map_.end()) throw Error(Errc::UnknownTask, task.to_string());
    return it->second;
}

void TaskCgroupMap::erase(const KernelObjectId &task) { map_.erase(task); }

void migrate_task(const KernelObjectId &task, CgroupId to, TaskCgroupMap &map) {
    if (!map.contains(task)) throw Error(Errc::UnknownTask, task.to_string());
    map.assign(task, to);
}

// ---------------------------------------------------------------------------

DispatchResult Dispatcher::dispatch_event(const HookEvent &ev, const TaskCgroupMap &map) const {
    // The task's cgroup is read once; a migration racing with this event takes
    // effect from the next event on.
    const CgroupId leaf = map.cgroup_of(ev.subject);
    events_.fetch_add(1, std::memory_order_relaxed);

    // migrate_disable + rcu_read_lock: the snapshots below stay immutable until
    // the traversal returns.
    critical_sections_.fetch_add(1, std::memory_order_relaxed);
    const auto path = tree_.snapshot_path(leaf, ev.hook);

    DispatchResult result;
    for (const auto &[cgroup, list] : path) {
        for (const auto &attachment : *list) {
            const AuditProgram &prog = *attachment.program;
            ProgramContext ctx{store_, prog.opaque_to_capture ? nullptr : sink_, cgroup};
            const ReturnCode rc = prog.body ? prog.body(ev, ctx) : ReturnCode::allow();
            result.executed.push_back(ExecutedProgram{cgroup, prog.id});
            programs_run_.fetch_add(1, std::memory_order_relaxed);
            if (rc.denied()) {
                result.final = rc;
                return result;
            }
        }
    }
    return result;
}

DispatchCounters Dispatcher::counters() const {
    return DispatchCounters{events_.load(), programs_run_.load(), critical_sections_.load()};
}

}  // namespace cgaudit
