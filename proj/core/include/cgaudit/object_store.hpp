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
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cgaudit/event_model.hpp"

namespace cgaudit {

using Bytes = std::vector<std::uint8_t>;

Bytes to_bytes(std::string_view text);
std::string to_text(const Bytes &bytes);

// Index of a named storage slot. Slots are registered once per store and
// address a fixed position in every object's storage.
struct SlotKey {
    std::uint32_t index = 0;
    friend bool operator==(SlotKey, SlotKey) = default;
};

struct StorageStats {
    std::uint64_t live_count = 0;
    std::uint64_t created_total = 0;
    std::uint64_t reclaimed_total = 0;
};

namespace detail {
struct ObjectEntry;
}

// Handle to one object's local storage. Handles stay valid C++ objects after
// the storage is reclaimed; every access then fails instead of observing
// stale state.
class StorageHandle {
public:
    StorageHandle() = default;

    const KernelObjectId &owner() const;
    // False once the owner's lifecycle ended or the storage was deleted.
    bool live() const;

    std::optional<Bytes> get(SlotKey slot) const;
    void put(SlotKey slot, Bytes value);
    void erase(SlotKey slot);

    // Read-modify-write under the owner's lock. The callback sees the current
    // slot value (or nullopt) and may replace it.
    void update(SlotKey slot, const std::function<void(std::optional<Bytes> &)> &fn);

private:
    friend class ObjectStore;
    StorageHandle(std::shared_ptr<detail::ObjectEntry> entry, std::uint64_t epoch)
        : entry_(std::move(entry)), epoch_(epoch) {}

    std::shared_ptr<detail::ObjectEntry> entry_;
    std::uint64_t epoch_ = 0;
};

// Reference to a registered kernel object. This is the "local" access path:
// storage hangs directly off the object, no key hashing involved.
class ObjectRef {
public:
    ObjectRef() = default;
    const KernelObjectId &id() const;
    bool live() const;
    explicit operator bool() const noexcept { return entry_ != nullptr; }

private:
    friend class ObjectStore;
    explicit ObjectRef(std::shared_ptr<detail::ObjectEntry> entry) : entry_(std::move(entry)) {}
    std::shared_ptr<detail::ObjectEntry> entry_;
};

// Userspace-style selector, e.g. "the cred of pid 42".
enum class ExternalKind : std::uint8_t { task, cred };

struct ExternalId {
    ExternalKind kind = ExternalKind::task;
    std::uint64_t pid = 0;
};

// Registry of simulated kernel objects plus their local storages.
//
// Objects are born on first reference and die on end_lifecycle; a dead id can
// never be referenced again (reuse must bump the generation). Operations on
// distinct objects proceed concurrently; operations on one object are
// serialized by that object's lock.
class ObjectStore {
public:
    ObjectStore();
    ~ObjectStore();
    ObjectStore(const ObjectStore &) = delete;
    ObjectStore &operator=(const ObjectStore &) = delete;

    SlotKey slot(std::string_view name);

    // Registers the object on first sight. Throws Error(DeadObject) for ids
    // whose lifecycle already ended.
    ObjectRef resolve(const KernelObjectId &id);
    bool is_live(const KernelObjectId &id) const;
    bool is_known(const KernelObjectId &id) const;

    std::optional<StorageHandle> storage_get(const KernelObjectId &id, bool create_if_missing);
    std::optional<StorageHandle> storage_get(const ObjectRef &ref, bool create_if_missing);

    // Throws Error(NoStorage) when the object holds no storage.
    void storage_delete(const KernelObjectId &id);

    // Ends the object's lifecycle and reclaims its storage. Throws
    // Error(DeadObject) on repeat.
    void end_lifecycle(const KernelObjectId &id);

    // Resolves the selector at call time. Throw Error(NoSuchObject) when no
    // live task carries the pid.
    std::optional<Bytes> userspace_lookup(const ExternalId &ext, SlotKey slot);
    void userspace_update(const ExternalId &ext, SlotKey slot, Bytes value);
    void userspace_delete(const ExternalId &ext, SlotKey slot);
    KernelObjectId resolve_external(const ExternalId &ext) const;

    StorageStats stats() const;

    // Counted from the registry, independently of StorageStats.
    std::size_t live_objects_holding_storage() const;
    std::size_t live_object_count() const;
    std::vector<KernelObjectId> live_objects() const;

private:
    std::shared_ptr<detail::ObjectEntry> find(const KernelObjectId &id) const;

    mutable std::shared_mutex registry_mutex_;
    std::unordered_map<KernelObjectId, std::shared_ptr<detail::ObjectEntry>> registry_;
    std::unordered_map<std::uint64_t, KernelObjectId> live_pids_;

    mutable std::mutex slots_mutex_;
    std::vector<std::string> slot_names_;

    mutable std::mutex stats_mutex_;
    StorageStats stats_;
};

}  // namespace cgaudit
