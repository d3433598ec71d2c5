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

#include <random>
#include <thread>

#include "cgaudit/error.hpp"
#include "cgaudit/object_store.hpp"

using namespace cgaudit;

namespace {

Errc code_of(const std::function<void()> &fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    FAIL("no error thrown");
    return Errc::ParseError;
}

}  // namespace

TEST_SUITE("object_store") {

TEST_CASE("create on first get, absent without create") {
    ObjectStore s;
    const auto f = inode_id("fs1", 7);
    CHECK_FALSE(s.storage_get(f, false).has_value());
    auto h = s.storage_get(f, true);
    REQUIRE(h);
    CHECK(s.stats().created_total == 1);
    CHECK(s.stats().live_count == 1);
    CHECK(s.storage_get(f, false).has_value());
}

TEST_CASE("same inode number on two file systems are distinct storages") {
    ObjectStore s;
    const auto slot = s.slot("x");
    s.storage_get(inode_id("fs1", 7), true)->put(slot, to_bytes("one"));
    s.storage_get(inode_id("fs2", 7), true)->put(slot, to_bytes("two"));
    CHECK(to_text(*s.storage_get(inode_id("fs1", 7), false)->get(slot)) == "one");
    CHECK(to_text(*s.storage_get(inode_id("fs2", 7), false)->get(slot)) == "two");
    CHECK(s.stats().live_count == 2);
}

TEST_CASE("delete") {
    ObjectStore s;
    const auto t = task_id(4);
    const auto slot = s.slot("x");
    s.storage_get(t, true)->put(slot, to_bytes("v"));
    s.storage_delete(t);
    CHECK_FALSE(s.storage_get(t, false).has_value());
    CHECK(s.stats().reclaimed_total == 1);
    CHECK(code_of([&] { s.storage_delete(t); }) == Errc::NoStorage);
    auto fresh = s.storage_get(t, true);
    CHECK_FALSE(fresh->get(slot).has_value());
}

TEST_CASE("end of lifecycle reclaims without a delete") {
    ObjectStore s;
    const auto t = task_id(4);
    auto h = s.storage_get(t, true);
    h->put(s.slot("x"), to_bytes("v"));
    s.end_lifecycle(t);
    CHECK(s.stats().reclaimed_total == 1);
    CHECK(s.stats().live_count == 0);
    CHECK_FALSE(h->live());
    CHECK_THROWS(h->get(s.slot("x")));
    CHECK(code_of([&] { s.end_lifecycle(t); }) == Errc::DeadObject);
    CHECK(code_of([&] { s.storage_get(t, true); }) == Errc::DeadObject);
}

TEST_CASE("end of lifecycle without storage leaves stats alone") {
    ObjectStore s;
    s.resolve(task_id(9));
    s.end_lifecycle(task_id(9));
    CHECK(s.stats().created_total == 0);
    CHECK(s.stats().reclaimed_total == 0);
}

TEST_CASE("a reused id needs a new generation") {
    ObjectStore s;
    s.storage_get(inode_id("fs", 3), true);
    s.end_lifecycle(inode_id("fs", 3));
    auto h = s.storage_get(inode_id("fs", 3, 1), true);
    CHECK(h->live());
}

TEST_CASE("1000 objects, all lifecycles ended, nothing left") {
    ObjectStore s;
    const auto slot = s.slot("x");
    for (std::uint64_t i = 0; i < 1000; ++i) s.storage_get(object_id(ObjectKind::file, i), true)->put(slot, {1});
    CHECK(s.stats().live_count == 1000);
    for (std::uint64_t i = 0; i < 1000; ++i) s.end_lifecycle(object_id(ObjectKind::file, i));
    const auto st = s.stats();
    CHECK(st.live_count == 0);
    CHECK(st.created_total == 1000);
    CHECK(st.reclaimed_total == 1000);
    CHECK(s.live_objects_holding_storage() == 0);
}

TEST_CASE("stats identity under random operations") {
    ObjectStore s;
    std::mt19937_64 rng(3);
    std::vector<bool> dead(200, false);
    for (int i = 0; i < 5000; ++i) {
        const std::uint64_t id = rng() % 200;
        const auto obj = object_id(ObjectKind::pipe, id);
        if (dead[id]) continue;
        switch (rng() % 4) {
            case 0:
            case 1: s.storage_get(obj, true); break;
            case 2:
                if (s.storage_get(obj, false)) s.storage_delete(obj);
                break;
            default:
                s.resolve(obj);
                s.end_lifecycle(obj);
                dead[id] = true;
                break;
        }
        const auto st = s.stats();
        REQUIRE(st.live_count == st.created_total - st.reclaimed_total);
        REQUIRE(st.live_count == s.live_objects_holding_storage());
    }
}

TEST_CASE("userspace lookup by pid reaches the cred") {
    ObjectStore s;
    const auto slot = s.slot("ctx");
    const auto t = task_id(42);
    s.resolve(t);
    s.storage_get(cred_of(t), true)->put(slot, to_bytes("label"));
    CHECK(to_text(*s.userspace_lookup({ExternalKind::cred, 42}, slot)) == "label");

    s.userspace_update({ExternalKind::cred, 42}, slot, to_bytes("new"));
    CHECK(to_text(*s.storage_get(cred_of(t), false)->get(slot)) == "new");

    s.end_lifecycle(t);
    CHECK(code_of([&] { s.userspace_lookup({ExternalKind::cred, 42}, slot); }) == Errc::NoSuchObject);
}

TEST_CASE("concurrent access to distinct objects") {
    ObjectStore s;
    const auto slot = s.slot("n");
    auto worker = [&](std::uint64_t base) {
        for (std::uint64_t i = 0; i < 500; ++i) {
            const auto obj = object_id(ObjectKind::msg, base + i);
            s.storage_get(obj, true)->update(slot, [](std::optional<Bytes> &v) {
                if (!v) v = Bytes{0};
                ++(*v)[0];
            });
        }
    };
    std::thread a(worker, 0), b(worker, 10000);
    a.join();
    b.join();
    CHECK(s.stats().live_count == 1000);
}

TEST_CASE("end of lifecycle racing with access never exposes partial state") {
    ObjectStore s;
    const auto slot = s.slot("n");
    const auto obj = object_id(ObjectKind::socket, 1);
    auto h = *s.storage_get(obj, true);
    h.put(slot, Bytes{1, 2, 3});
    std::thread reader([&] {
        for (int i = 0; i < 10000; ++i) {
            try {
                auto v = h.get(slot);
                REQUIRE((v && *v == Bytes{1, 2, 3}));
            } catch (const Error &e) {
                REQUIRE(e.code() == Errc::DeadObject);
            }
        }
    });
    s.end_lifecycle(obj);
    reader.join();
    CHECK_FALSE(h.live());
}

}  // TEST_SUITE
