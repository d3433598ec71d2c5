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
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cgaudit/rational.hpp"

namespace cgaudit {

// ---------------------------------------------------------------------------
// Kernel objects
// ---------------------------------------------------------------------------

enum class ObjectKind : std::uint8_t {
    task,
    inode,
    file,
    cred,
    socket,
    pipe,
    msg,
    superblock,
    memory,  // a task's address space; only referenced by fork provenance
};

inline constexpr std::array kAllObjectKinds = {
    ObjectKind::task,   ObjectKind::inode, ObjectKind::file,       ObjectKind::cred,   ObjectKind::socket,
    ObjectKind::pipe,   ObjectKind::msg,   ObjectKind::superblock, ObjectKind::memory,
};

std::string_view to_string(ObjectKind kind) noexcept;
ObjectKind parse_object_kind(std::string_view name);

// Identity of a simulated kernel object.
//
// Inode numbers are only unique per file system, so inode identities carry the
// file system uuid. The generation distinguishes reuse of the same local id
// after the previous holder's lifecycle ended.
struct KernelObjectId {
    ObjectKind kind = ObjectKind::task;
    std::string fs_uuid;
    std::uint64_t local_id = 0;
    std::uint32_t generation = 0;

    friend bool operator==(const KernelObjectId &, const KernelObjectId &) = default;
    friend auto operator<=>(const KernelObjectId &, const KernelObjectId &) = default;

    // "kind:fs_uuid:local_id:generation"; the fs part is empty for non-inodes.
    std::string to_string() const;
    static KernelObjectId parse(std::string_view text);

    // Throws ParseError when an inode lacks its file system uuid.
    void validate() const;
};

KernelObjectId task_id(std::uint64_t pid, std::uint32_t generation = 0);
KernelObjectId inode_id(std::string fs_uuid, std::uint64_t ino, std::uint32_t generation = 0);
KernelObjectId object_id(ObjectKind kind, std::uint64_t local_id, std::uint32_t generation = 0);
// The credential and memory objects owned by a task share its pid and generation.
KernelObjectId cred_of(const KernelObjectId &task);
KernelObjectId memory_of(const KernelObjectId &task);

struct KernelObjectIdHash {
    std::size_t operator()(const KernelObjectId &id) const noexcept;
};

// ---------------------------------------------------------------------------
// LSM hooks
// ---------------------------------------------------------------------------

enum class HookId : std::uint8_t {
    file_open,
    inode_create,
    inode_permission,
    inode_setattr,
    inode_post_setxattr,
    file_permission,
    bprm_check,
    bprm_set_creds,
    socket_create,
    socket_bind,
    socket_listen,
    socket_accept,
    socket_connect,
    task_fork,
};

inline constexpr std::size_t kHookCount = 14;

inline constexpr std::array<HookId, kHookCount> kAllHooks = {
    HookId::file_open,     HookId::inode_create,  HookId::inode_permission, HookId::inode_setattr,
    HookId::inode_post_setxattr, HookId::file_permission, HookId::bprm_check, HookId::bprm_set_creds,
    HookId::socket_create, HookId::socket_bind,   HookId::socket_listen,    HookId::socket_accept,
    HookId::socket_connect, HookId::task_fork,
};

std::string_view to_string(HookId hook) noexcept;
// Throws Error(UnknownHook); the hook set is closed.
HookId parse_hook(std::string_view name);

constexpr std::size_t index_of(HookId hook) noexcept { return static_cast<std::size_t>(hook); }

// ---------------------------------------------------------------------------
// Syscall records
// ---------------------------------------------------------------------------

// exit and close are lifecycle markers: they expand to no modeled hook but end
// the lifecycle of the task (exit) or of the object (close).
enum class Syscall : std::uint8_t {
    open,
    read,
    write,
    execve,
    fork,
    socket,
    bind,
    listen,
    accept,
    connect,
    exit,
    close,
};

inline constexpr std::array kAllSyscalls = {
    Syscall::open,   Syscall::read,   Syscall::write,  Syscall::execve,  Syscall::fork, Syscall::socket,
    Syscall::bind,   Syscall::listen, Syscall::accept, Syscall::connect, Syscall::exit, Syscall::close,
};

std::string_view to_string(Syscall syscall) noexcept;
// Throws Error(UnknownSyscall).
Syscall parse_syscall(std::string_view name);

bool requires_path_depth(Syscall syscall) noexcept;
bool requires_object(Syscall syscall) noexcept;
bool requires_net(Syscall syscall) noexcept;

enum class Outcome : std::uint8_t { success, failure };
enum class Direction : std::uint8_t { incoming, outgoing };

std::string_view to_string(Direction direction) noexcept;
Direction parse_direction(std::string_view name);

struct NetParams {
    Direction direction = Direction::outgoing;
    std::uint16_t port = 0;

    friend bool operator==(const NetParams &, const NetParams &) = default;
};

struct SyscallRecord {
    std::uint64_t timestamp = 0;
    Syscall syscall = Syscall::read;
    KernelObjectId subject;
    std::optional<KernelObjectId> object;
    std::optional<std::uint32_t> path_depth;
    std::optional<std::string> path;
    bool creates_new_file = false;
    bool sets_xattr = false;
    Outcome outcome = Outcome::success;
    // For failed calls: ordinal of the hook that failed. Expansion stops after it.
    std::optional<std::uint32_t> fail_at_ordinal;
    std::optional<NetParams> net;

    friend bool operator==(const SyscallRecord &, const SyscallRecord &) = default;

    // Checks the per-field invariants that do not need neighbouring records.
    void validate() const;
};

// Data-flow direction attached to a file_permission check.
enum class Access : std::uint8_t { none, read, write };

std::string_view to_string(Access access) noexcept;

struct HookEvent {
    HookId hook = HookId::file_open;
    KernelObjectId subject;
    // For inode_permission this is the directory being searched.
    std::optional<KernelObjectId> object;
    // Non-owning; the record must outlive the event.
    const SyscallRecord *origin = nullptr;
    std::uint32_t ordinal = 0;
    Access access = Access::none;
};

// Identity of the index-th directory (0 = root) traversed when resolving the
// record's path.
KernelObjectId directory_inode(const SyscallRecord &rec, std::uint32_t index);

// Ordered hook sequence produced by a syscall. Failed calls are truncated
// after the hook at fail_at_ordinal.
std::vector<HookEvent> expand_syscall(const SyscallRecord &rec);

// Only the hook identities, for callers that do not need events.
std::vector<HookId> expand_hooks(const SyscallRecord &rec);

// ---------------------------------------------------------------------------
// Cost model
// ---------------------------------------------------------------------------

class CostModel {
public:
    CostModel() = default;

    static CostModel uniform(Rational cost);

    // Throws std::invalid_argument for negative costs.
    CostModel &set(HookId hook, Rational cost);
    std::optional<Rational> cost(HookId hook) const noexcept;
    CostModel scaled(Rational factor) const;

private:
    std::array<std::optional<Rational>, kHookCount> per_hook_{};
};

// Sum of per-hook costs over expand_syscall(rec). Throws Error(MissingCost).
Rational estimate_cost(const SyscallRecord &rec, const CostModel &model);

// ---------------------------------------------------------------------------
// Trace files
// ---------------------------------------------------------------------------

// One JSON object per line. Blank lines are skipped. Throws ParseError carrying
// the 1-based line number (code ParseError or NonMonotonicTimestamp).
std::vector<SyscallRecord> parse_trace(std::istream &in);
std::vector<SyscallRecord> parse_trace_file(const std::string &path);

std::string to_trace_line(const SyscallRecord &rec);
void write_trace(std::ostream &out, const std::vector<SyscallRecord> &records);

}  // namespace cgaudit

template <>
struct std::hash<cgaudit::KernelObjectId> : cgaudit::KernelObjectIdHash {};
