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

#include "cgaudit/object_store.hpp"

#include "cgaudit/error.hpp"

namespace cgaudit {

namespace detail {

struct ObjectEntry {
    explicit ObjectEntry(KernelObjectId object) : id(std::move(object)) {}

    const KernelObjectId id;
    mutable std::mutex mutex;
    bool live = true;
    bool has_storage = false;
    // Incremented every time a storage is created so handles to a deleted
    // storage cannot reach its replacement.
    std::uint64_t epoch = 0;
    std::vector<std::optional<Bytes>> slots;
};

}  // namespace detail

using detail::ObjectEntry;

namespace {

void check_access(const ObjectEntry &e, std::uint64_t epoch) {
    if (!e.live) throw Error(Errc::DeadObject, e.id.to_string());
    if (!e.has_storage || e.epoch != epoch) throw Error(Errc::NoStorage, e.id.to_string());
}

std::optional<Bytes> &slot_ref(ObjectEntry &e, SlotKey slot) {
    if (slot.index >= e.slots.size()) e.slots.resize(slot.index + 1);
    return e.slots[slot.index];
}

}  // namespace

Bytes to_bytes(std::string_view text) { return {text.begin(), text.end()}; }

std::string to_text(const Bytes &bytes) { return {bytes.begin(), bytes.end()}; }

// ---------------------------------------------------------------------------

const KernelObjectId &StorageHandle::owner() const { return entry_->id; }

bool StorageHandle::live() const {
    if (!entry_) return false;
    std::lock_guard lock(entry_->mutex);
    return entry_->live && entry_->has_storage && entry_->epoch == epoch_;
}

std::optional<Bytes> StorageHandle::get(SlotKey slot) const {
    std::lock_guard lock(entry_->mutex);
    check_access(*entry_, epoch_);
    if (slot.index >= entry_->slots.size()) return std::nullopt;
    return entry_->slots[slot.index];
}

void StorageHandle::put(SlotKey slot, Bytes value) {
    std::lock_guard lock(entry_->mutex);
    check_access(*entry_, epoch_);
    slot_ref(*entry_, slot) = std::move(value);
}

void StorageHandle::erase(SlotKey slot) {
    std::lock_guard lock(entry_->mutex);
    check_access(*entry_, epoch_);
    if (slot.index < entry_->slots.size()) entry_->slots[slot.index].reset();
}

void StorageHandle::update(SlotKey slot, const std::function<void(std::optional<Bytes> &)> &fn) {
    std::lock_guard lock(entry_->mutex);
    check_access(*entry_, epoch_);
    fn(slot_ref(*entry_, slot));
}

const KernelObjectId &ObjectRef::id() const { return entry_->id; }

bool ObjectRef::live() const {
    std::lock_guard lock(entry_->mutex);
    return entry_->live;
}

// ---------------------------------------------------------------------------

ObjectStore::ObjectStore() = default;
ObjectStore::~ObjectStore() = default;

SlotKey ObjectStore::slot(std::string_view name) {
    std::lock_guard lock(slots_mutex_);
    for (std::size_t i = 0; i < slot_names_.size(); ++i) {
        if (slot_names_[i] == name) return SlotKey{static_cast<std::uint32_t>(i)};
    }
    slot_names_.emplace_back(name);
    return SlotKey{static_cast<std::uint32_t>(slot_names_.size() - 1)};
}

std::shared_ptr<ObjectEntry> ObjectStore::find(const KernelObjectId &id) const {
    std::shared_lock lock(registry_mutex_);
    auto it = registry_.find(id);
    return it == registry_.end() ? nullptr : it->second;
}

ObjectRef ObjectStore::resolve(const KernelObjectId &id) {
    if (auto entry = find(id)) {
        std::lock_guard lock(entry->mutex);
        if (!entry->live) throw Error(Errc::DeadObject, id.to_string());
        return ObjectRef(entry);
    }
    id.validate();
    std::unique_lock lock(registry_mutex_);
    auto [it, inserted] = registry_.try_emplace(id, nullptr);
    if (inserted) {
        it->second = std::make_shared<ObjectEntry>(id);
        if (id.kind == ObjectKind::task) {
            auto [pit, fresh] = live_pids_.try_emplace(id.local_id, id);
            if (!fresh) {
                registry_.erase(it);
                throw Error(Errc::StorageFailure, "pid " + std::to_string(id.local_id) + " already held by live " +
                                                      pit->second.to_string());
            }
        }
        return ObjectRef(it->second);
    }
    // Lost a registration race; the winner's entry is authoritative.
    auto entry = it->second;
    lock.unlock();
    std::lock_guard elock(entry->mutex);
    if (!entry->live) throw Error(Errc::DeadObject, id.to_string());
    return ObjectRef(entry);
}

bool ObjectStore::is_live(const KernelObjectId &id) const {
    auto entry = find(id);
    if (!entry) return false;
    std::lock_guard lock(entry->mutex);
    return entry->live;
}

bool ObjectStore::is_known(const KernelObjectId &id) const { return find(id) != nullptr; }

std::optional<StorageHandle> ObjectStore::storage_get(const KernelObjectId &id, bool create_if_missing) {
    return storage_get(resolve(id), create_if_missing);
}

std::optional<StorageHandle> ObjectStore::storage_get(const ObjectRef &ref, bool create_if_missing) {
    ObjectEntry &e = *ref.entry_;
    bool created = false;
    std::uint64_t epoch = 0;
    {
        std::lock_guard lock(e.mutex);
        if (!e.live) throw Error(Errc::DeadObject, e.id.to_string());
        if (!e.has_storage) {
            if (!create_if_missing) return std::nullopt;
            e.has_storage = true;
            ++e.epoch;
            e.slots.clear();
            created = true;
        }
        epoch = e.epoch;
    }
    if (created) {
        std::lock_guard lock(stats_mutex_);
        ++stats_.created_total;
        ++stats_.live_count;
    }
    return StorageHandle(ref.entry_, epoch);
}

void ObjectStore::storage_delete(const KernelObjectId &id) {
    auto entry = find(id);
    if (!entry) throw Error(Errc::NoStorage, id.to_string());
    {
        std::lock_guard lock(entry->mutex);
        if (!entry->live) throw Error(Errc::DeadObject, id.to_string());
        if (!entry->has_storage) throw Error(Errc::NoStorage, id.to_string());
        entry->has_storage = false;
        entry->slots.clear();
    }
    std::lock_guard lock(stats_mutex_);
    ++stats_.reclaimed_total;
    --stats_.live_count;
}

void ObjectStore::end_lifecycle(const KernelObjectId &id) {
    auto entry = find(id);
    if (!entry) {
        // Never referenced: register it so the id is retired all the same.
        resolve(id);
        entry = find(id);
    }
    bool reclaimed = false;
    {
        std::lock_guard lock(entry->mutex);
        if (!entry->live) throw Error(Errc::DeadObject, id.to_string());
        entry->live = false;
        if (entry->has_storage) {
            entry->has_storage = false;
            entry->slots.clear();
            entry->slots.shrink_to_fit();
            reclaimed = true;
        }
    }
    if (id.kind == ObjectKind::task) {
        std::unique_lock lock(registry_mutex_);
        auto it = live_pids_.find(id.local_id);
        if (it != live_pids_.end() && it->second == id) live_pids_.erase(it);
    }
    if (reclaimed) {
        std::lock_guard lock(stats_mutex_);
        ++stats_.reclaimed_total;
        --stats_.live_count;
    }
}

KernelObjectId ObjectStore::resolve_external(const ExternalId &ext) const {
    KernelObjectId task;
    {
        std::shared_lock lock(registry_mutex_);
        auto it = live_pids_.find(ext.pid);
        if (it == live_pids_.end()) throw Error(Errc::NoSuchObject, "no live task with pid " + std::to_string(ext.pid));
        task = it->second;
    }
    return ext.kind == ExternalKind::task ? task : cred_of(task);
}

std::optional<Bytes> ObjectStore::userspace_lookup(const ExternalId &ext, SlotKey slot) {
    auto handle = storage_get(resolve_external(ext), false);
    if (!handle) return std::nullopt;
    return handle->get(slot);
}

void ObjectStore::userspace_update(const ExternalId &ext, SlotKey slot, Bytes value) {
    storage_get(resolve_external(ext), true)->put(slot, std::move(value));
}

void ObjectStore::userspace_delete(const ExternalId &ext, SlotKey slot) {
    auto handle = storage_get(resolve_external(ext), false);
    if (!handle) throw Error(Errc::NoStorage, resolve_external(ext).to_string());
    handle->erase(slot);
}

StorageStats ObjectStore::stats() const {
    std::lock_guard lock(stats_mutex_);
    return stats_;
}

std::size_t ObjectStore::live_objects_holding_storage() const {
    std::shared_lock lock(registry_mutex_);
    std::size_t n = 0;
    for (const auto &[_, entry] : registry_) {
        std::lock_guard elock(entry->mutex);
        if (entry->live && entry->has_storage) ++n;
    }
    return n;
}

std::size_t ObjectStore::live_object_count() const {
    std::shared_lock lock(registry_mutex_);
    std::size_t n = 0;
    for (const auto &[_, entry] : registry_) {
        std::lock_guard elock(entry->mutex);
        if (entry->live) ++n;
    }
    return n;
}

std::vector<KernelObjectId> ObjectStore::live_objects() const {
    std::shared_lock lock(registry_mutex_);
    std::vector<KernelObjectId> out;
    for (const auto &[id, entry] : registry_) {
        std::lock_guard elock(entry->mutex);
        if (entry->live) out.push_back(id);
    }
    return out;
}

}  // namespace cgaudit
