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

#include "cgaudit/capture_rules.hpp"

#include <array>
#include <string>

#include "cgaudit/error.hpp"

namespace cgaudit {

namespace {

constexpr std::array<std::string_view, 7> kRelationNames = {
    "read", "write", "create", "fork", "version", "exec", "connect",
};

constexpr std::array<std::string_view, 7> kNodeKindNames = {
    "task", "memory", "file", "pipe", "socket", "msg", "cred",
};

constexpr CaptureStep touch(Role r) { return {StepKind::touch, r, r, Relation::read}; }
constexpr CaptureStep flow(Role from, Role to, Relation rel) { return {StepKind::flow, from, to, rel}; }
constexpr CaptureStep spawn(Role from, Role to, Relation rel) { return {StepKind::spawn, from, to, rel}; }

constexpr std::array kTouchObject = {touch(Role::object)};
constexpr std::array kTouchBoth = {touch(Role::subject), touch(Role::object)};
constexpr std::array kCreate = {spawn(Role::subject, Role::object, Relation::create)};
constexpr std::array kRead = {flow(Role::object, Role::subject, Relation::read)};
constexpr std::array kWrite = {flow(Role::subject, Role::object, Relation::write)};
constexpr std::array kExec = {flow(Role::object, Role::subject, Relation::exec)};
constexpr std::array kConnect = {flow(Role::subject, Role::object, Relation::connect)};
constexpr std::array kFork = {
    spawn(Role::subject, Role::object, Relation::fork),
    spawn(Role::subject, Role::child_memory, Relation::create),
};

}  // namespace

std::string_view to_string(Relation rel) noexcept { return kRelationNames[static_cast<std::size_t>(rel)]; }

Relation parse_relation(std::string_view name) {
    for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
        if (kRelationNames[i] == name) return static_cast<Relation>(i);
    }
    throw Error(Errc::InvalidDocument, "unknown relation '" + std::string(name) + "'");
}

std::string_view to_string(NodeKind kind) noexcept { return kNodeKindNames[static_cast<std::size_t>(kind)]; }

NodeKind parse_node_kind(std::string_view name) {
    for (std::size_t i = 0; i < kNodeKindNames.size(); ++i) {
        if (kNodeKindNames[i] == name) return static_cast<NodeKind>(i);
    }
    throw Error(Errc::InvalidDocument, "unknown node kind '" + std::string(name) + "'");
}

NodeKind node_kind_of(ObjectKind kind) noexcept {
    switch (kind) {
        case ObjectKind::task: return NodeKind::task;
        case ObjectKind::memory: return NodeKind::memory;
        case ObjectKind::cred: return NodeKind::cred;
        case ObjectKind::socket: return NodeKind::socket;
        case ObjectKind::pipe: return NodeKind::pipe;
        case ObjectKind::msg: return NodeKind::msg;
        case ObjectKind::inode:
        case ObjectKind::file:
        case ObjectKind::superblock: break;
    }
    return NodeKind::file;
}

std::span<const CaptureStep> capture_rule(HookId hook, Access access) {
    switch (hook) {
        case HookId::inode_permission: return kTouchObject;
        case HookId::file_open:
        case HookId::inode_setattr:
        case HookId::inode_post_setxattr:
        case HookId::bprm_check:
        case HookId::socket_bind:
        case HookId::socket_listen: return kTouchBoth;
        case HookId::inode_create:
        case HookId::socket_create: return kCreate;
        case HookId::file_permission:
            if (access == Access::read) return kRead;
            if (access == Access::write) return kWrite;
            return kTouchBoth;
        case HookId::bprm_set_creds: return kExec;
        case HookId::socket_accept: return kRead;
        case HookId::socket_connect: return kConnect;
        case HookId::task_fork: return kFork;
    }
    throw Error(Errc::UnmodeledHook, std::to_string(static_cast<int>(hook)));
}

}  // namespace cgaudit
