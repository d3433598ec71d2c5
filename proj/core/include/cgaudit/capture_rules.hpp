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
#include <span>
#include <string_view>

#include "cgaudit/event_model.hpp"

namespace cgaudit {

enum class Relation : std::uint8_t { read, write, create, fork, version, exec, connect };

inline constexpr std::array kAllRelations = {
    Relation::read, Relation::write, Relation::create, Relation::fork,
    Relation::version, Relation::exec, Relation::connect,
};

std::string_view to_string(Relation rel) noexcept;
Relation parse_relation(std::string_view name);

enum class NodeKind : std::uint8_t { task, memory, file, pipe, socket, msg, cred };

inline constexpr std::array kAllNodeKinds = {
    NodeKind::task, NodeKind::memory, NodeKind::file, NodeKind::pipe,
    NodeKind::socket, NodeKind::msg, NodeKind::cred,
};

std::string_view to_string(NodeKind kind) noexcept;
NodeKind parse_node_kind(std::string_view name);
// inode, file and superblock objects all render as file nodes.
NodeKind node_kind_of(ObjectKind kind) noexcept;

// Which object of a hook event a capture step refers to.
enum class Role : std::uint8_t {
    subject,       // the calling task
    object,        // the event's object (the directory for inode_permission)
    child_memory,  // address space of the forked child (object of task_fork)
};

enum class StepKind : std::uint8_t {
    touch,  // reference the role's current version
    flow,   // information flows from -> to; the target gets a new version
    spawn,  // target comes into existence at version 1 (a flow if already known)
};

struct CaptureStep {
    StepKind kind;
    Role from;  // touch: the touched role
    Role to;
    Relation relation;
};

// Capture template of one hook. This table is the single definition of what
// each hook contributes to the provenance graph; the capture engine executes
// it and the motif verifier derives its motifs from it.
std::span<const CaptureStep> capture_rule(HookId hook, Access access);

}  // namespace cgaudit
