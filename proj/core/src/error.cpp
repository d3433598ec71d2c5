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

#include "cgaudit/error.hpp"

namespace cgaudit {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::UnknownSyscall: return "UnknownSyscall";
        case Errc::UnknownHook: return "UnknownHook";
        case Errc::MissingPathDepth: return "MissingPathDepth";
        case Errc::MissingCost: return "MissingCost";
        case Errc::ParseError: return "ParseError";
        case Errc::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
        case Errc::MultiNotAllowed: return "MultiNotAllowed";
        case Errc::HookMismatch: return "HookMismatch";
        case Errc::StaleHandle: return "StaleHandle";
        case Errc::UnknownTask: return "UnknownTask";
        case Errc::UnknownCgroup: return "UnknownCgroup";
        case Errc::DeadObject: return "DeadObject";
        case Errc::NoStorage: return "NoStorage";
        case Errc::NoSuchObject: return "NoSuchObject";
        case Errc::BufferOverflow: return "BufferOverflow";
        case Errc::StorageFailure: return "StorageFailure";
        case Errc::SinkError: return "SinkError";
        case Errc::DanglingEdge: return "DanglingEdge";
        case Errc::SchemaError: return "SchemaError";
        case Errc::UnknownService: return "UnknownService";
        case Errc::MalformedProgramGraph: return "MalformedProgramGraph";
        case Errc::UnmodeledHook: return "UnmodeledHook";
        case Errc::InvalidDocument: return "InvalidDocument";
        case Errc::UnknownWorkload: return "UnknownWorkload";
        case Errc::ScenarioError: return "ScenarioError";
    }
    return "Unknown";
}

}  // namespace cgaudit
