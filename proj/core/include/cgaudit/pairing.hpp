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
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cgaudit {

// Control-flow description of a program that takes and drops references.
//
//   program <name>          optional, names the program
//   <label>:                marks the next statement
//   get <res> | acquire <res>
//   put <res> | release <res>
//   goto <label>
//   branch <label> <label>...
//   exit
//
// '#' starts a comment. Running off the last statement is an exit. Graphs
// must be loop free.
struct PairingStmt {
    enum class Op : std::uint8_t { acquire, release, jump, branch, exit };
    Op op = Op::exit;
    std::string resource;             // acquire / release
    std::vector<std::size_t> targets;  // jump / branch: statement indices
    std::size_t line = 0;
};

struct ProgramGraph {
    std::string name;
    std::vector<PairingStmt> stmts;
    std::map<std::string, std::size_t> labels;

    // Throws Error(MalformedProgramGraph): unknown statement or label,
    // duplicate label, empty program, or a cycle.
    static ProgramGraph parse(std::string_view text, std::string name = "program");
    static ProgramGraph load(const std::string &path);

    // Label of the statement, or "@<index>" when unlabeled.
    std::string site(std::size_t stmt) const;
};

struct PairingViolation {
    enum class Kind : std::uint8_t {
        leak,       // exit with references still held
        underflow,  // release without a matching acquisition
    };
    std::string program;
    std::string path;  // witness path: visited sites joined by '>'
    std::string site;  // where the imbalance shows (the exit or the release)
    std::string resource;
    Kind kind = Kind::leak;
    std::uint32_t unmatched = 0;

    friend bool operator==(const PairingViolation &, const PairingViolation &) = default;
};

std::string_view to_string(PairingViolation::Kind kind) noexcept;

struct PairingCheckReport {
    std::vector<PairingViolation> violations;
    bool ok() const noexcept { return violations.empty(); }
};

// Explores (statement, held-count) states once each, so distinct paths that
// reach the same state are not re-walked. One violation per distinct
// (site, resource, kind, unmatched), with the first path found as witness.
PairingCheckReport check_pairing(const ProgramGraph &program);

}  // namespace cgaudit
