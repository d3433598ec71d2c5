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
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cgaudit/dispatch.hpp"
#include "cgaudit/event_model.hpp"
#include "cgaudit/object_store.hpp"
#include "cgaudit/ring_buffer.hpp"

namespace cgaudit {

enum class Decision : std::uint8_t { deny, allow };
enum class Perm : std::uint8_t { read, write, exec, map };

std::string_view to_string(Decision d) noexcept;
std::string_view to_string(Perm p) noexcept;

// Rule categories; each one owns a fixed hook family.
enum class Category : std::uint8_t { fs_write, exec, net };
inline constexpr std::array kAllCategories = {Category::fs_write, Category::exec, Category::net};
std::string_view to_string(Category c) noexcept;
std::vector<HookId> hooks_of(Category c);

struct NetRule {
    Direction direction = Direction::outgoing;
    std::vector<std::uint16_t> ports;
    std::vector<std::string> port_names;  // as written, for explain output
};

struct NetPolicy {
    Decision default_decision = Decision::deny;
    std::vector<NetRule> allow;
};

struct FsRule {
    std::string pattern;
    std::set<Perm> perms;
};

struct FsPolicy {
    std::optional<Decision> default_write;  // set when the write category is active
    std::optional<Decision> default_exec;   // set when the exec category is active
    std::vector<FsRule> allow;
};

struct Policy {
    std::string subject;
    std::optional<NetPolicy> net;
    std::optional<FsPolicy> fs;
    std::string source_hash;  // FNV-1a of the document text, hex

    std::set<Category> categories() const;
};

// http -> 80, https -> 443. Throws Error(UnknownService).
std::uint16_t resolve_service(std::string_view name);
const std::map<std::string, std::uint16_t> &service_table();

// `*` and `?` stay inside one path component, `**` crosses components.
bool glob_match(std::string_view pattern, std::string_view path);
// Number of literal characters; larger is more specific.
std::size_t glob_specificity(std::string_view pattern);

// Throws Error(SchemaError) naming the offending field path, or
// Error(UnknownService).
Policy parse_policy(std::string_view document);
Policy parse_policy_file(const std::string &path);

// One access to decide.
struct AccessQuery {
    Category category = Category::fs_write;
    Perm perm = Perm::read;  // filesystem queries
    std::string path;
    Direction direction = Direction::outgoing;  // network queries
    std::optional<std::uint16_t> port;          // absent for socket creation
};

struct RuleDecision {
    Decision decision = Decision::allow;
    std::string rule;  // "filesystem.allow[1]", "network.default", ...
};

// Table lookup shared by compiled programs. Queries for inactive categories
// are allowed.
RuleDecision decide(const Policy &policy, const AccessQuery &q);

struct ViolationRecord {
    std::uint64_t timestamp = 0;
    HookId hook = HookId::file_open;
    std::string subject;
    std::string object;
    std::string path;
    std::optional<NetParams> net;
    std::string rule;
    Decision decision = Decision::deny;
};

std::string violation_to_line(const ViolationRecord &v);

using ViolationRing = RingBuffer<ViolationRecord>;

struct CompileOptions {
    std::size_t violation_capacity = 4096;
    int deny_code = 13;  // EACCES
};

struct CompiledProgramSet {
    std::vector<ProgramPtr> programs;
    std::set<HookId> hooks_covered;
    std::map<HookId, Category> hook_category;  // hooks enforcing a rule category
    std::string context;                       // security context bound to tasks
    std::string source_hash;
    CompileOptions options;
    std::shared_ptr<const Policy> table;
    std::shared_ptr<ViolationRing> violations;

    // Attaches every program to the cgroup.
    std::vector<AttachmentHandle> attach(CgroupTree &tree, CgroupId cgroup) const;
    // Hook -> rule mapping, one line per covered hook.
    std::string explain() const;
    // Program plan as JSON.
    std::string plan_json() const;
};

// One enforcement program per hook of each active category plus task_fork.
CompiledProgramSet compile(const Policy &policy, CompileOptions options = {});

// Monolithic baseline: one program on every hook that scans the raw rules
// for each event.
CompiledProgramSet compile_interpreter(const Policy &policy, CompileOptions options = {});

struct Evaluation {
    ReturnCode code;
    std::optional<ViolationRecord> violation;
};

// Pure decision for one event; tasks without the set's context are allowed.
Evaluation evaluate(const HookEvent &ev, const CompiledProgramSet &set, ObjectStore &store);

inline constexpr std::string_view kContextSlot = "security.context";

// Binds the policy context to a live task (userspace API).
void bind_policy(ObjectStore &store, const CompiledProgramSet &set, std::uint64_t pid);
// Copies the parent's context, if any, onto the child.
void inherit_on_fork(const KernelObjectId &parent, const KernelObjectId &child, ObjectStore &store);
std::optional<std::string> context_of(ObjectStore &store, const KernelObjectId &task);

}  // namespace cgaudit
