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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cgaudit/error.hpp"
#include "cgaudit/pairing.hpp"
#include "support.hpp"

using namespace cgaudit;

namespace {

ProgramGraph g(const std::string &text) { return ProgramGraph::parse(text); }

Errc malformed(const std::string &text) {
    try {
        ProgramGraph::parse(text);
    } catch (const Error &e) {
        return e.code();
    }
    return Errc::ParseError;
}

// Random loop-free program: jumps only go forward.
std::string random_program(cgtest::Rng &rng, std::size_t n) {
    const std::vector<std::string> res = {"a", "b"};
    std::ostringstream out;
    for (std::size_t i = 0; i < n; ++i) {
        out << "s" << i << ":\n";
        const std::size_t room = n - i - 1;
        const auto r = cgtest::pick(rng, 10);
        if (r < 4) {
            out << "get " << res[cgtest::pick(rng, res.size())] << "\n";
        } else if (r < 7) {
            out << "put " << res[cgtest::pick(rng, res.size())] << "\n";
        } else if (r == 7 && room > 0) {
            out << "goto s" << i + 1 + cgtest::pick(rng, room) << "\n";
        } else if (r == 8 && room > 0) {
            out << "branch";
            for (std::size_t k = 0, m = 2 + cgtest::pick(rng, 2); k < m; ++k) out << " s" << i + 1 + cgtest::pick(rng, room);
            out << "\n";
        } else {
            out << (cgtest::pick(rng, 3) == 0 ? "exit\n" : "get a\n");
        }
    }
    return out.str();
}

}  // namespace

TEST_SUITE("pairing") {

TEST_CASE("straight line balances") {
    CHECK(check_pairing(g("get d\nput d\n")).ok());
}

TEST_CASE("acquire on one path only") {
    const auto r = check_pairing(g("get d\nbranch l r\nl:\nput d\nexit\nr:\nexit\n"));
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == PairingViolation::Kind::leak);
    CHECK(r.violations[0].site == "r");
    CHECK(r.violations[0].resource == "d");
    CHECK(r.violations[0].path == "@0>@1>r");
}

TEST_CASE("get and put on opposite arms is two problems") {
    const auto r = check_pairing(g("branch a b\na:\nget d\ngoto end\nb:\nput d\nend:\nexit\n"));
    CHECK(r.violations.size() == 2);
}

TEST_CASE("nesting and underflow") {
    CHECK(check_pairing(g("get d\nget d\nput d\nput d\n")).ok());
    const auto r = check_pairing(g("get d\nput d\nput d\n"));
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == PairingViolation::Kind::underflow);
    CHECK(r.violations[0].site == "@2");
    CHECK(r.violations[0].unmatched == 1);
}

TEST_CASE("falling off the end is an exit") {
    const auto r = check_pairing(g("get d\n"));
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].site == "@0");
}

TEST_CASE("malformed graphs") {
    CHECK(malformed("") == Errc::MalformedProgramGraph);
    CHECK(malformed("# only a comment\n") == Errc::MalformedProgramGraph);
    CHECK(malformed("fetch d\n") == Errc::MalformedProgramGraph);
    CHECK(malformed("get\n") == Errc::MalformedProgramGraph);
    CHECK(malformed("goto nowhere\n") == Errc::MalformedProgramGraph);
    CHECK(malformed("l:\nget d\nl:\nput d\n") == Errc::MalformedProgramGraph);
    CHECK(malformed("l:\nget d\ngoto l\n") == Errc::MalformedProgramGraph);
    CHECK(malformed("branch\n") == Errc::MalformedProgramGraph);
}

TEST_CASE("corpus agrees with path enumeration") {
    std::size_t files = 0;
    for (const auto &entry : std::filesystem::directory_iterator(std::string(CGAUDIT_TEST_DATA) + "/pairing")) {
        if (entry.path().extension() != ".pg") continue;
        ++files;
        const auto prog = ProgramGraph::load(entry.path().string());
        std::ifstream in(entry.path());
        std::string line;
        int expect = -1;
        while (std::getline(in, line)) {
            if (line.rfind("# expect: ", 0) == 0) expect = std::stoi(line.substr(10));
        }
        CAPTURE(entry.path().filename().string());
        const auto report = check_pairing(prog);
        CHECK(cgtest::keys_of(report) == cgtest::oracle_pairing(prog));
        CHECK(static_cast<int>(report.violations.size()) == expect);
    }
    CHECK(files == 20);
}

TEST_CASE("random loop-free programs agree with path enumeration") {
    cgtest::Rng rng(5);
    for (int i = 0; i < 400; ++i) {
        const auto text = random_program(rng, 2 + cgtest::pick(rng, 18));
        const auto prog = g(text);
        CAPTURE(text);
        REQUIRE(cgtest::keys_of(check_pairing(prog)) == cgtest::oracle_pairing(prog));
    }
}

TEST_CASE("many paths stay cheap") {
    // 40 chained diamonds: 2^40 paths, each balanced except through the last arm.
    std::ostringstream out;
    for (int i = 0; i < 40; ++i) {
        out << "branch a" << i << " b" << i << "\na" << i << ":\nget d\nput d\ngoto j" << i << "\nb" << i
            << ":\nget d\n" << (i == 39 ? "" : "put d\n") << "j" << i << ":\n";
    }
    out << "exit\n";
    const auto start = std::chrono::steady_clock::now();
    const auto r = check_pairing(g(out.str()));
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(1));
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].site == "j39");
}

}  // TEST_SUITE
