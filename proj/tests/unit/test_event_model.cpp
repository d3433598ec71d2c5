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
#include <sstream>

#include "cgaudit/error.hpp"
#include "cgaudit/event_model.hpp"
#include "support.hpp"

using namespace cgaudit;

namespace {

SyscallRecord make(Syscall sc, std::uint32_t depth = 0, bool creates = false) {
    SyscallRecord r;
    r.timestamp = 1;
    r.syscall = sc;
    r.subject = task_id(1);
    if (requires_object(sc)) r.object = sc == Syscall::fork ? task_id(2) : inode_id("rootfs", 9);
    if (requires_path_depth(sc)) r.path_depth = depth;
    r.creates_new_file = creates;
    if (requires_net(sc)) r.net = NetParams{Direction::outgoing, 80};
    return r;
}


}  // namespace

TEST_SUITE("event_model") {

TEST_CASE("open at depth 3 gives three directory checks and file_open") {
    const auto ev = expand_syscall(make(Syscall::open, 3));
    REQUIRE(ev.size() == 4);
    for (int i = 0; i < 3; ++i) CHECK(ev[i].hook == HookId::inode_permission);
    CHECK(ev[3].hook == HookId::file_open);
}

TEST_CASE("read is one file_permission") {
    const auto ev = expand_syscall(make(Syscall::read));
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].hook == HookId::file_permission);
    CHECK(ev[0].access == Access::read);
}

TEST_CASE("execve at depth 2 gives six hooks in order") {
    const auto hooks = expand_hooks(make(Syscall::execve, 2));
    const std::vector<HookId> want = {HookId::inode_permission, HookId::inode_permission, HookId::file_open,
                                      HookId::bprm_check,       HookId::bprm_set_creds,   HookId::file_permission};
    CHECK(hooks == want);
}

TEST_CASE("open with no directories is just file_open") {
    const auto hooks = expand_hooks(make(Syscall::open, 0));
    CHECK(hooks == std::vector<HookId>{HookId::file_open});
}

TEST_CASE("creating a file adds inode_create then inode_setattr; xattr only on request") {
    auto rec = make(Syscall::open, 1, true);
    auto hooks = expand_hooks(rec);
    CHECK(hooks == std::vector<HookId>{HookId::inode_permission, HookId::inode_create, HookId::inode_setattr,
                                       HookId::file_open});
    rec.sets_xattr = true;
    hooks = expand_hooks(rec);
    CHECK(std::count(hooks.begin(), hooks.end(), HookId::inode_post_setxattr) == 1);
}

TEST_CASE("single-hook syscalls") {
    CHECK(expand_hooks(make(Syscall::socket)) == std::vector<HookId>{HookId::socket_create});
    CHECK(expand_hooks(make(Syscall::bind)) == std::vector<HookId>{HookId::socket_bind});
    CHECK(expand_hooks(make(Syscall::listen)) == std::vector<HookId>{HookId::socket_listen});
    CHECK(expand_hooks(make(Syscall::accept)) == std::vector<HookId>{HookId::socket_accept});
    CHECK(expand_hooks(make(Syscall::connect)) == std::vector<HookId>{HookId::socket_connect});
    CHECK(expand_hooks(make(Syscall::fork)) == std::vector<HookId>{HookId::task_fork});
    CHECK(expand_hooks(make(Syscall::exit)).empty());
}

TEST_CASE("hook counts over random depths match the table") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        const Syscall sc = kAllSyscalls[rng() % kAllSyscalls.size()];
        const auto depth = static_cast<std::uint32_t>(rng() % 17);
        const bool creates = sc == Syscall::open && (rng() & 1);
        const auto ev = expand_syscall(make(sc, depth, creates));
        REQUIRE(ev.size() == cgtest::expected_hooks(sc, depth, creates));
        for (std::size_t k = 0; k < ev.size(); ++k) CHECK(ev[k].ordinal == k);
    }
}

TEST_CASE("failure truncates after the failing hook") {
    auto rec = make(Syscall::execve, 3);
    rec.outcome = Outcome::failure;
    rec.fail_at_ordinal = 1;
    CHECK(expand_syscall(rec).size() == 2);
    rec.fail_at_ordinal = 6;
    CHECK(expand_syscall(rec).size() == 7);
}

TEST_CASE("expansion is deterministic") {
    const auto rec = make(Syscall::open, 5, true);
    const auto a = expand_syscall(rec);
    const auto b = expand_syscall(rec);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].hook == b[i].hook);
        CHECK(a[i].object == b[i].object);
    }
}

TEST_CASE("directory inodes differ per depth and live on the file's fs") {
    auto rec = make(Syscall::open, 3);
    const auto d0 = directory_inode(rec, 0);
    const auto d1 = directory_inode(rec, 1);
    CHECK(d0 != d1);
    CHECK(d0.kind == ObjectKind::inode);
    CHECK(d0.fs_uuid == "rootfs");
}

TEST_CASE("missing path depth is rejected") {
    auto rec = make(Syscall::open, 1);
    rec.path_depth.reset();
    CHECK_THROWS_AS(expand_syscall(rec), Error);
    try {
        expand_syscall(rec);
    } catch (const Error &e) {
        CHECK(e.code() == Errc::MissingPathDepth);
    }
}

TEST_CASE("unknown names") {
    CHECK_THROWS_AS(parse_syscall("mmap"), Error);
    CHECK_THROWS_AS(parse_hook("inode_rename"), Error);
    try {
        parse_syscall("mmap");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::UnknownSyscall);
    }
}

TEST_CASE("inode identity needs the fs uuid") {
    KernelObjectId bad{ObjectKind::inode, "", 5, 0};
    CHECK_THROWS(bad.validate());
    CHECK(inode_id("a", 5) != inode_id("b", 5));
    CHECK(inode_id("a", 5) != inode_id("a", 5, 1));
    CHECK(KernelObjectId::parse(inode_id("a", 5, 2).to_string()) == inode_id("a", 5, 2));
}

TEST_CASE("cost of open is C times N+1") {
    const auto model = CostModel::uniform(Rational(3, 2));
    for (std::uint32_t n = 0; n < 50; ++n) {
        CHECK(estimate_cost(make(Syscall::open, n), model) == Rational(3, 2) * Rational(n + 1));
    }
    CHECK(estimate_cost(make(Syscall::open, 10), CostModel::uniform(1)) == Rational(11));
}

TEST_CASE("cost examples") {
    CostModel m;
    m.set(HookId::file_permission, 2);
    CHECK(estimate_cost(make(Syscall::read), m) == Rational(2));
    // execve at depth 3: 3 + file_open + bprm_check + bprm_set_creds + file_permission
    CHECK(estimate_cost(make(Syscall::execve, 3), CostModel::uniform(1)) == Rational(7));
}

TEST_CASE("missing cost entry") {
    CostModel m;
    m.set(HookId::file_open, 1);
    try {
        estimate_cost(make(Syscall::open, 2), m);
        FAIL("expected MissingCost");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::MissingCost);
    }
}

TEST_CASE("cost is linear in the per-hook costs") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        CostModel m;
        for (HookId h : kAllHooks) m.set(h, Rational(static_cast<std::int64_t>(rng() % 100), 1 + rng() % 7));
        const auto rec = make(kAllSyscalls[rng() % 10], static_cast<std::uint32_t>(rng() % 9), false);
        CHECK(estimate_cost(rec, m.scaled(2)) == Rational(2) * estimate_cost(rec, m));
    }
}

TEST_CASE("negative costs are rejected") {
    CostModel m;
    CHECK_THROWS(m.set(HookId::file_open, -1));
}

TEST_CASE("trace parsing") {
    std::istringstream empty("");
    CHECK(parse_trace(empty).empty());

    std::ostringstream out;
    std::vector<SyscallRecord> recs = {make(Syscall::open, 2), make(Syscall::read), make(Syscall::connect)};
    for (std::size_t i = 0; i < recs.size(); ++i) recs[i].timestamp = i + 1;
    write_trace(out, recs);
    std::istringstream in(out.str());
    CHECK(parse_trace(in) == recs);
}

TEST_CASE("non-monotonic timestamp names the line") {
    std::istringstream in(
        "{\"timestamp\":5,\"syscall\":\"read\",\"subject\":{\"kind\":\"task\",\"id\":1},\"object\":{\"kind\":\"pipe\",\"id\":1}}\n"
        "{\"timestamp\":5,\"syscall\":\"read\",\"subject\":{\"kind\":\"task\",\"id\":1},\"object\":{\"kind\":\"pipe\",\"id\":1}}\n");
    try {
        parse_trace(in);
        FAIL("expected NonMonotonicTimestamp");
    } catch (const ParseError &e) {
        CHECK(e.code() == Errc::NonMonotonicTimestamp);
        CHECK(e.line() == 2);
    }
}

TEST_CASE("unknown keys and bad syscalls are parse errors") {
    std::istringstream extra(
        "{\"timestamp\":1,\"syscall\":\"read\",\"subject\":{\"kind\":\"task\",\"id\":1},\"object\":{\"kind\":\"pipe\",\"id\":1},\"bogus\":1}\n");
    CHECK_THROWS_AS(parse_trace(extra), ParseError);
    std::istringstream bad("{\"timestamp\":1,\"syscall\":\"mmap\",\"subject\":{\"kind\":\"task\",\"id\":1}}\n");
    CHECK_THROWS_AS(parse_trace(bad), ParseError);
    std::istringstream nodepth(
        "{\"timestamp\":1,\"syscall\":\"open\",\"subject\":{\"kind\":\"task\",\"id\":1},\"object\":{\"kind\":\"pipe\",\"id\":1}}\n");
    CHECK_THROWS_AS(parse_trace(nodepth), ParseError);
}

}  // TEST_SUITE
