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

#include <stdexcept>
#include <string>
#include <string_view>

namespace cgaudit {

enum class Errc {
    UnknownSyscall,
    UnknownHook,
    MissingPathDepth,
    MissingCost,
    ParseError,
    NonMonotonicTimestamp,
    MultiNotAllowed,
    HookMismatch,
    StaleHandle,
    UnknownTask,
    UnknownCgroup,
    DeadObject,
    NoStorage,
    NoSuchObject,
    BufferOverflow,
    StorageFailure,
    SinkError,
    DanglingEdge,
    SchemaError,
    UnknownService,
    MalformedProgramGraph,
    UnmodeledHook,
    InvalidDocument,
    UnknownWorkload,
    ScenarioError,
};

std::string_view errc_name(Errc code) noexcept;

// All library failures are reported as cgaudit::Error carrying a code that
// tests and the CLI can branch on.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string &what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

// Line-anchored parse failure (trace files, program-graph DSL).
class ParseError : public Error {
public:
    ParseError(Errc code, std::size_t line, const std::string &what)
        : Error(code, "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace cgaudit
