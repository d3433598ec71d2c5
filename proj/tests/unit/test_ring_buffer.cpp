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

#include <doctest.h>

#include <thread>

#include "cgaudit/error.hpp"
#include "cgaudit/ring_buffer.hpp"

using namespace cgaudit;

TEST_SUITE("ring_buffer") {

TEST_CASE("FIFO") {
    RingBuffer<int> rb(8);
    for (int i = 0; i < 5; ++i) rb.push(i);
    for (int i = 0; i < 5; ++i) CHECK(*rb.try_pop() == i);
    CHECK_FALSE(rb.try_pop());
}

TEST_CASE("drop policy counts overflow") {
    RingBuffer<int> rb(2, OverflowPolicy::drop);
    CHECK(rb.push(1));
    CHECK(rb.push(2));
    CHECK_FALSE(rb.push(3));
    const auto c = rb.counters();
    CHECK(c.pushed == 3);
    CHECK(c.dropped == 1);
    CHECK(rb.size() == 2);
}

TEST_CASE("fail policy throws") {
    RingBuffer<int> rb(1, OverflowPolicy::fail);
    rb.push(1);
    try {
        rb.push(2);
        FAIL("expected BufferOverflow");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::BufferOverflow);
    }
}

TEST_CASE("blocked producer is released by the consumer") {
    RingBuffer<int> rb(4, OverflowPolicy::block);
    constexpr int n = 20000;
    std::thread producer([&] {
        for (int i = 0; i < n; ++i) rb.push(i);
        rb.close();
    });
    int expected = 0;
    while (auto v = rb.pop()) {
        REQUIRE(*v == expected);
        ++expected;
    }
    producer.join();
    const auto c = rb.counters();
    CHECK(expected == n);
    CHECK(c.dropped == 0);
    CHECK(c.pushed == c.popped + c.dropped);
}

TEST_CASE("zero capacity is rejected") { CHECK_THROWS(RingBuffer<int>(0)); }

}  // TEST_SUITE
