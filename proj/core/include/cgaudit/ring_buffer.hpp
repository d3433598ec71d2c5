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

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cgaudit/error.hpp"

namespace cgaudit {

enum class OverflowPolicy : std::uint8_t {
    block,  // producer waits for the consumer
    drop,   // element discarded, dropped counter incremented
    fail,   // push throws Error(BufferOverflow); for single-threaded callers
};

struct RingCounters {
    std::uint64_t pushed = 0;
    std::uint64_t popped = 0;
    std::uint64_t dropped = 0;
    std::uint64_t producer_waits = 0;
};

// Bounded FIFO between one producer and one consumer.
template <typename T>
class RingBuffer {
public:
    explicit RingBuffer(std::size_t capacity, OverflowPolicy policy = OverflowPolicy::block)
        : capacity_(capacity), policy_(policy) {
        if (capacity_ == 0) throw std::invalid_argument("ring buffer capacity must be positive");
    }

    RingBuffer(const RingBuffer &) = delete;
    RingBuffer &operator=(const RingBuffer &) = delete;

    // Returns false when the element was dropped.
    bool push(T item) {
        std::unique_lock lock(mutex_);
        ++counters_.pushed;
        if (pending_.size() >= capacity_) {
            switch (policy_) {
                case OverflowPolicy::drop: ++counters_.dropped; return false;
                case OverflowPolicy::fail:
                    --counters_.pushed;
                    throw Error(Errc::BufferOverflow, "ring buffer full at " + std::to_string(capacity_));
                case OverflowPolicy::block:
                    ++counters_.producer_waits;
                    not_full_.wait(lock, [&] { return pending_.size() < capacity_ || closed_; });
                    if (closed_) {
                        ++counters_.dropped;
                        return false;
                    }
                    break;
            }
        }
        pending_.push_back(std::move(item));
        lock.unlock();
        not_empty_.notify_one();
        return true;
    }

    std::optional<T> try_pop() {
        std::unique_lock lock(mutex_);
        if (pending_.empty()) return std::nullopt;
        return take(lock);
    }

    // Blocks until an element arrives or the buffer is closed and empty.
    std::optional<T> pop() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return !pending_.empty() || closed_; });
        if (pending_.empty()) return std::nullopt;
        return take(lock);
    }

    // Wakes both sides; pending elements remain poppable.
    void close() {
        {
            std::lock_guard lock(mutex_);
            closed_ = true;
        }
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return pending_.size();
    }
    std::size_t capacity() const noexcept { return capacity_; }
    OverflowPolicy policy() const noexcept { return policy_; }

    RingCounters counters() const {
        std::lock_guard lock(mutex_);
        return counters_;
    }

private:
    T take(std::unique_lock<std::mutex> &lock) {
        T item = std::move(pending_.front());
        pending_.pop_front();
        ++counters_.popped;
        lock.unlock();
        not_full_.notify_one();
        return item;
    }

    const std::size_t capacity_;
    const OverflowPolicy policy_;
    mutable std::mutex mutex_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
    std::deque<T> pending_;
    bool closed_ = false;
    RingCounters counters_;
};

}  // namespace cgaudit
