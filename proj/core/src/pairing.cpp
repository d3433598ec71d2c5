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

#include "cgaudit/pairing.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <tuple>

#include "cgaudit/error.hpp"

namespace cgaudit {

namespace {

[[noreturn]] void malformed(const std::string &name, std::size_t line, const std::string &what) {
    throw Error(Errc::MalformedProgramGraph, name + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> words(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream in{std::string(line)};
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

std::vector<std::size_t> successors(const ProgramGraph &g, std::size_t i) {
    const auto &s = g.stmts[i];
    switch (s.op) {
        case PairingStmt::Op::acquire:
        case PairingStmt::Op::release:
            if (i + 1 < g.stmts.size()) return {i + 1};
            return {};
        case PairingStmt::Op::jump:
        case PairingStmt::Op::branch: return s.targets;
        case PairingStmt::Op::exit: return {};
    }
    return {};
}

}  // namespace

std::string_view to_string(PairingViolation::Kind kind) noexcept {
    return kind == PairingViolation::Kind::leak ? "leak" : "underflow";
}

ProgramGraph ProgramGraph::parse(std::string_view text, std::string name) {
    ProgramGraph g;
    g.name = std::move(name);
    struct Pending {
        std::size_t stmt;
        std::vector<std::string> labels;
        std::size_t line;
    };
    std::vector<Pending> pending;
    std::vector<std::string> waiting_labels;

    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        auto w = words(raw);
        while (!w.empty() && w.front().size() > 1 && w.front().back() == ':') {
            std::string label = w.front().substr(0, w.front().size() - 1);
            if (g.labels.count(label) || std::find(waiting_labels.begin(), waiting_labels.end(), label) !=
                                             waiting_labels.end()) {
                malformed(g.name, lineno, "duplicate label '" + label + "'");
            }
            waiting_labels.push_back(label);
            w.erase(w.begin());
        }
        if (w.empty()) continue;
        const std::string &op = w.front();
        if (op == "program") {
            if (w.size() != 2) malformed(g.name, lineno, "program takes one name");
            g.name = w[1];
            continue;
        }
        PairingStmt s;
        s.line = lineno;
        if (op == "get" || op == "acquire" || op == "put" || op == "release") {
            if (w.size() != 2) malformed(g.name, lineno, op + " takes one resource");
            s.op = (op == "get" || op == "acquire") ? PairingStmt::Op::acquire : PairingStmt::Op::release;
            s.resource = w[1];
        } else if (op == "goto") {
            if (w.size() != 2) malformed(g.name, lineno, "goto takes one label");
            s.op = PairingStmt::Op::jump;
            pending.push_back({g.stmts.size(), {w[1]}, lineno});
        } else if (op == "branch") {
            if (w.size() < 3) malformed(g.name, lineno, "branch takes at least two labels");
            s.op = PairingStmt::Op::branch;
            pending.push_back({g.stmts.size(), {w.begin() + 1, w.end()}, lineno});
        } else if (op == "exit") {
            if (w.size() != 1) malformed(g.name, lineno, "exit takes no operand");
            s.op = PairingStmt::Op::exit;
        } else {
            malformed(g.name, lineno, "unknown statement '" + op + "'");
        }
        for (auto &label : waiting_labels) g.labels[label] = g.stmts.size();
        waiting_labels.clear();
        g.stmts.push_back(std::move(s));
    }
    if (!waiting_labels.empty()) {
        // A trailing label marks the implicit exit.
        PairingStmt s;
        s.op = PairingStmt::Op::exit;
        s.line = lineno;
        for (auto &label : waiting_labels) g.labels[label] = g.stmts.size();
        g.stmts.push_back(std::move(s));
    }
    if (g.stmts.empty()) malformed(g.name, lineno, "empty program");
    for (const auto &p : pending) {
        for (const auto &label : p.labels) {
            auto it = g.labels.find(label);
            if (it == g.labels.end()) malformed(g.name, p.line, "unknown label '" + label + "'");
            g.stmts[p.stmt].targets.push_back(it->second);
        }
    }

    // Reject cycles (white/grey/black DFS from every statement).
    std::vector<int> colour(g.stmts.size(), 0);
    std::function<void(std::size_t)> visit = [&](std::size_t i) {
        colour[i] = 1;
        for (std::size_t n : successors(g, i)) {
            if (colour[n] == 1) malformed(g.name, g.stmts[n].line, "loop through '" + g.site(n) + "'");
            if (colour[n] == 0) visit(n);
        }
        colour[i] = 2;
    };
    for (std::size_t i = 0; i < g.stmts.size(); ++i) {
        if (colour[i] == 0) visit(i);
    }
    return g;
}

ProgramGraph ProgramGraph::load(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::MalformedProgramGraph, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string name = path;
    if (auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
    if (auto dot = name.find_last_of('.'); dot != std::string::npos) name = name.substr(0, dot);
    return parse(ss.str(), name);
}

std::string ProgramGraph::site(std::size_t stmt) const {
    for (const auto &[label, idx] : labels) {
        if (idx == stmt) return label;
    }
    return "@" + std::to_string(stmt);
}

PairingCheckReport check_pairing(const ProgramGraph &g) {
    PairingCheckReport report;
    using Counts = std::map<std::string, std::uint32_t>;
    std::set<std::pair<std::size_t, Counts>> seen;
    std::set<std::tuple<std::string, std::string, PairingViolation::Kind, std::uint32_t>> reported;
    std::vector<std::string> path;

    auto record = [&](std::size_t stmt, const std::string &res, PairingViolation::Kind kind, std::uint32_t n) {
        const std::string site = g.site(stmt);
        if (!reported.emplace(site, res, kind, n).second) return;
        std::string p;
        for (std::size_t i = 0; i < path.size(); ++i) p += (i ? ">" : "") + path[i];
        report.violations.push_back(PairingViolation{g.name, p, site, res, kind, n});
    };

    std::function<void(std::size_t, Counts)> walk;
    auto leaks = [&](std::size_t pc, const Counts &held) {
        for (const auto &[res, n] : held) {
            if (n > 0) record(pc, res, PairingViolation::Kind::leak, n);
        }
    };
    auto next = [&](std::size_t pc, const Counts &held) {
        if (pc + 1 < g.stmts.size()) {
            walk(pc + 1, held);
        } else {
            leaks(pc, held);
        }
    };
    walk = [&](std::size_t pc, Counts held) {
        if (!seen.emplace(pc, held).second) return;
        const PairingStmt &s = g.stmts[pc];
        path.push_back(g.site(pc));
        switch (s.op) {
            case PairingStmt::Op::acquire:
                ++held[s.resource];
                next(pc, held);
                break;
            case PairingStmt::Op::release:
                if (held[s.resource] == 0) record(pc, s.resource, PairingViolation::Kind::underflow, 1);
                if (held[s.resource] > 0) --held[s.resource];
                if (held[s.resource] == 0) held.erase(s.resource);
                next(pc, held);
                break;
            case PairingStmt::Op::jump:
            case PairingStmt::Op::branch:
                for (std::size_t t : s.targets) walk(t, held);
                break;
            case PairingStmt::Op::exit: leaks(pc, held); break;
        }
        path.pop_back();
    };
    walk(0, {});
    return report;
}

}  // namespace cgaudit
