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

#include "cgaudit/policy.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cgaudit/error.hpp"

namespace cgaudit {

using json = nlohmann::ordered_json;

std::string_view to_string(Decision d) noexcept { return d == Decision::allow ? "allow" : "deny"; }

std::string_view to_string(Perm p) noexcept {
    switch (p) {
        case Perm::read: return "read";
        case Perm::write: return "write";
        case Perm::exec: return "exec";
        case Perm::map: return "map";
    }
    return "?";
}

std::string_view to_string(Category c) noexcept {
    switch (c) {
        case Category::fs_write: return "fs_write";
        case Category::exec: return "exec";
        case Category::net: return "net";
    }
    return "?";
}

std::vector<HookId> hooks_of(Category c) {
    switch (c) {
        case Category::fs_write: return {HookId::file_open, HookId::file_permission, HookId::inode_permission};
        case Category::exec: return {HookId::bprm_check};
        case Category::net:
            return {HookId::socket_create, HookId::socket_connect, HookId::socket_bind, HookId::socket_listen,
                    HookId::socket_accept};
    }
    return {};
}

std::set<Category> Policy::categories() const {
    std::set<Category> out;
    if (net) out.insert(Category::net);
    if (fs && fs->default_write) out.insert(Category::fs_write);
    if (fs && fs->default_exec) out.insert(Category::exec);
    return out;
}

const std::map<std::string, std::uint16_t> &service_table() {
    static const std::map<std::string, std::uint16_t> table = {{"http", 80}, {"https", 443}};
    return table;
}

std::uint16_t resolve_service(std::string_view name) {
    auto it = service_table().find(std::string(name));
    if (it == service_table().end()) throw Error(Errc::UnknownService, "unknown service '" + std::string(name) + "'");
    return it->second;
}

// ---------------------------------------------------------------------------
// Globs
// ---------------------------------------------------------------------------

namespace {

bool glob_at(std::string_view p, std::string_view s) {
    while (!p.empty()) {
        if (p.substr(0, 2) == "**") {
            std::string_view rest = p.substr(2);
            for (std::size_t i = 0; i <= s.size(); ++i) {
                if (glob_at(rest, s.substr(i))) return true;
            }
            return false;
        }
        if (p.front() == '*') {
            std::string_view rest = p.substr(1);
            for (std::size_t i = 0; i <= s.size(); ++i) {
                if (glob_at(rest, s.substr(i))) return true;
                if (i < s.size() && s[i] == '/') break;
            }
            return false;
        }
        if (s.empty()) return false;
        if (p.front() == '?') {
            if (s.front() == '/') return false;
        } else if (p.front() != s.front()) {
            return false;
        }
        p.remove_prefix(1);
        s.remove_prefix(1);
    }
    return s.empty();
}

}  // namespace

bool glob_match(std::string_view pattern, std::string_view path) { return glob_at(pattern, path); }

std::size_t glob_specificity(std::string_view pattern) {
    std::size_t n = 0;
    for (char c : pattern) {
        if (c != '*' && c != '?') ++n;
    }
    return n;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void schema(const std::string &where, const std::string &what) {
    throw Error(Errc::SchemaError, where + ": " + what);
}

void only_keys(const json &obj, const std::string &where, std::initializer_list<std::string_view> keys) {
    if (!obj.is_object()) schema(where, "expected an object");
    for (const auto &[k, _] : obj.items()) {
        bool ok = false;
        for (auto allowed : keys) ok = ok || k == allowed;
        if (!ok) schema(where + "." + k, "unknown field");
    }
}

Decision parse_decision(const json &v, const std::string &where) {
    if (v == "deny") return Decision::deny;
    if (v == "allow") return Decision::allow;
    schema(where, "expected \"allow\" or \"deny\"");
}

Perm parse_perm(const json &v, const std::string &where) {
    if (v == "read") return Perm::read;
    if (v == "write") return Perm::write;
    if (v == "exec") return Perm::exec;
    if (v == "map") return Perm::map;
    schema(where, "unknown permission");
}

std::string fnv_hex(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

NetPolicy parse_net(const json &n) {
    only_keys(n, "rules.network", {"default", "allow"});
    NetPolicy net;
    if (n.contains("default")) net.default_decision = parse_decision(n["default"], "rules.network.default");
    if (!n.contains("allow")) return net;
    if (!n["allow"].is_array()) schema("rules.network.allow", "expected a list");
    for (std::size_t i = 0; i < n["allow"].size(); ++i) {
        const std::string where = "rules.network.allow[" + std::to_string(i) + "]";
        const json &r = n["allow"][i];
        only_keys(r, where, {"direction", "ports"});
        NetRule rule;
        if (!r.contains("direction") || !r["direction"].is_string()) schema(where + ".direction", "required string");
        try {
            rule.direction = parse_direction(r["direction"].get<std::string>());
        } catch (const Error &) {
            schema(where + ".direction", "expected \"incoming\" or \"outgoing\"");
        }
        if (!r.contains("ports") || !r["ports"].is_array() || r["ports"].empty()) {
            schema(where + ".ports", "required non-empty list");
        }
        for (std::size_t j = 0; j < r["ports"].size(); ++j) {
            const json &p = r["ports"][j];
            if (p.is_string()) {
                rule.ports.push_back(resolve_service(p.get<std::string>()));
                rule.port_names.push_back(p.get<std::string>());
            } else if (p.is_number_unsigned() && p.get<std::uint64_t>() >= 1 && p.get<std::uint64_t>() <= 65535) {
                rule.ports.push_back(static_cast<std::uint16_t>(p.get<std::uint64_t>()));
                rule.port_names.push_back(std::to_string(p.get<std::uint64_t>()));
            } else {
                schema(where + ".ports[" + std::to_string(j) + "]", "expected a service name or a port 1..65535");
            }
        }
        net.allow.push_back(std::move(rule));
    }
    return net;
}

FsPolicy parse_fs(const json &f) {
    only_keys(f, "rules.filesystem", {"default", "allow"});
    FsPolicy fs;
    if (!f.contains("default")) {
        fs.default_write = Decision::deny;
        fs.default_exec = Decision::deny;
    } else {
        only_keys(f["default"], "rules.filesystem.default", {"write", "exec"});
        if (f["default"].contains("write")) {
            fs.default_write = parse_decision(f["default"]["write"], "rules.filesystem.default.write");
        }
        if (f["default"].contains("exec")) {
            fs.default_exec = parse_decision(f["default"]["exec"], "rules.filesystem.default.exec");
        }
    }
    if (!f.contains("allow")) return fs;
    if (!f["allow"].is_array()) schema("rules.filesystem.allow", "expected a list");
    for (std::size_t i = 0; i < f["allow"].size(); ++i) {
        const std::string where = "rules.filesystem.allow[" + std::to_string(i) + "]";
        const json &r = f["allow"][i];
        only_keys(r, where, {"path", "perms"});
        FsRule rule;
        if (!r.contains("path") || !r["path"].is_string()) schema(where + ".path", "required string");
        rule.pattern = r["path"].get<std::string>();
        if (rule.pattern.empty() || rule.pattern.front() != '/') schema(where + ".path", "must be an absolute path");
        if (!r.contains("perms") || !r["perms"].is_array() || r["perms"].empty()) {
            schema(where + ".perms", "required non-empty list");
        }
        for (std::size_t j = 0; j < r["perms"].size(); ++j) {
            rule.perms.insert(parse_perm(r["perms"][j], where + ".perms[" + std::to_string(j) + "]"));
        }
        fs.allow.push_back(std::move(rule));
    }
    return fs;
}

}  // namespace

Policy parse_policy(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error &e) {
        throw Error(Errc::SchemaError, std::string("policy is not valid JSON: ") + e.what());
    }
    only_keys(doc, "policy", {"subject", "rules"});
    Policy policy;
    if (!doc.contains("subject") || !doc["subject"].is_string()) schema("subject", "required string");
    policy.subject = doc["subject"].get<std::string>();
    if (policy.subject.empty() || policy.subject.front() != '/') schema("subject", "must be an absolute path");
    if (!doc.contains("rules")) schema("rules", "required object");
    const json &rules = doc["rules"];
    only_keys(rules, "rules", {"network", "filesystem"});
    if (rules.contains("network")) policy.net = parse_net(rules["network"]);
    if (rules.contains("filesystem")) policy.fs = parse_fs(rules["filesystem"]);
    policy.source_hash = fnv_hex(document);
    return policy;
}

Policy parse_policy_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::SchemaError, "cannot open policy file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_policy(ss.str());
}

// ---------------------------------------------------------------------------
// Decisions
// ---------------------------------------------------------------------------

RuleDecision decide(const Policy &policy, const AccessQuery &q) {
    if (q.category == Category::net) {
        if (!policy.net) return {Decision::allow, "unconstrained"};
        const NetPolicy &net = *policy.net;
        if (!q.port) {
            // Creating a socket is needed by any allowed connection.
            if (!net.allow.empty()) return {Decision::allow, "network.allow[0]"};
            return {net.default_decision, "network.default"};
        }
        for (std::size_t i = 0; i < net.allow.size(); ++i) {
            const NetRule &r = net.allow[i];
            if (r.direction != q.direction) continue;
            for (auto p : r.ports) {
                if (p == *q.port) return {Decision::allow, "network.allow[" + std::to_string(i) + "]"};
            }
        }
        return {net.default_decision, "network.default"};
    }

    if (!policy.fs) return {Decision::allow, "unconstrained"};
    const FsPolicy &fs = *policy.fs;
    std::optional<Decision> fallback;
    std::string fallback_rule;
    if (q.perm == Perm::read) {
        return {Decision::allow, "filesystem.read"};
    } else if (q.perm == Perm::write) {
        fallback = fs.default_write;
        fallback_rule = "filesystem.default.write";
    } else {
        fallback = fs.default_exec;
        fallback_rule = "filesystem.default.exec";
    }
    if (!fallback) return {Decision::allow, "unconstrained"};

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < fs.allow.size(); ++i) {
        if (!glob_match(fs.allow[i].pattern, q.path)) continue;
        if (!best || glob_specificity(fs.allow[i].pattern) > glob_specificity(fs.allow[best.value()].pattern)) {
            best = i;
        }
    }
    if (best && fs.allow[*best].perms.count(q.perm) != 0) {
        return {Decision::allow, "filesystem.allow[" + std::to_string(*best) + "]"};
    }
    return {*fallback, fallback_rule};
}

std::string violation_to_line(const ViolationRecord &v) {
    json j;
    j["timestamp"] = v.timestamp;
    j["hook"] = std::string(to_string(v.hook));
    j["subject"] = v.subject;
    j["object"] = v.object;
    if (!v.path.empty()) j["path"] = v.path;
    if (v.net) j["net"] = {{"direction", std::string(to_string(v.net->direction))}, {"port", v.net->port}};
    j["rule"] = v.rule;
    j["decision"] = std::string(to_string(v.decision));
    return j.dump();
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

namespace {

struct Shared {
    std::shared_ptr<const Policy> table;
    std::string context;
    std::shared_ptr<ViolationRing> violations;
    CompileOptions options;
};

std::optional<AccessQuery> query_for(const HookEvent &ev) {
    const SyscallRecord *rec = ev.origin;
    const std::string path = rec && rec->path ? *rec->path : std::string();
    AccessQuery q;
    q.path = path;
    switch (ev.hook) {
        case HookId::file_open:
            if (!rec || !rec->creates_new_file) return std::nullopt;
            q.category = Category::fs_write;
            q.perm = Perm::write;
            return q;
        case HookId::file_permission:
            if (ev.access != Access::write) return std::nullopt;
            q.category = Category::fs_write;
            q.perm = Perm::write;
            return q;
        case HookId::inode_permission:
            // Creating needs write access to the last directory on the path.
            if (!rec || !rec->creates_new_file || !rec->path_depth || ev.ordinal + 1 != *rec->path_depth) {
                return std::nullopt;
            }
            q.category = Category::fs_write;
            q.perm = Perm::write;
            return q;
        case HookId::bprm_check:
            q.category = Category::exec;
            q.perm = Perm::exec;
            return q;
        case HookId::socket_create:
            q.category = Category::net;
            return q;
        case HookId::socket_connect:
        case HookId::socket_bind:
        case HookId::socket_listen:
        case HookId::socket_accept:
            q.category = Category::net;
            q.direction = ev.hook == HookId::socket_connect ? Direction::outgoing : Direction::incoming;
            if (rec && rec->net) q.port = rec->net->port;
            if (!q.port) q.port = 0;
            return q;
        default: return std::nullopt;
    }
}

Evaluation evaluate_with(const HookEvent &ev, const Shared &shared, ObjectStore &store) {
    if (context_of(store, ev.subject) != shared.context) return {ReturnCode::allow(), std::nullopt};
    const auto q = query_for(ev);
    if (!q) return {ReturnCode::allow(), std::nullopt};
    const RuleDecision d = decide(*shared.table, *q);
    if (d.decision == Decision::allow) return {ReturnCode::allow(), std::nullopt};
    ViolationRecord v;
    v.timestamp = ev.origin ? ev.origin->timestamp : 0;
    v.hook = ev.hook;
    v.subject = ev.subject.to_string();
    v.object = ev.object ? ev.object->to_string() : std::string();
    v.path = q->path;
    if (q->category == Category::net && q->port) v.net = NetParams{q->direction, *q->port};
    v.rule = d.rule;
    v.decision = d.decision;
    return {ReturnCode::deny(shared.options.deny_code), std::move(v)};
}

ProgramPtr enforcement_program(const std::string &prefix, HookId hook, std::shared_ptr<const Shared> shared) {
    return make_program(
        prefix + std::string(to_string(hook)), hook,
        [shared](const HookEvent &ev, ProgramContext &ctx) -> ReturnCode {
            if (ev.hook == HookId::task_fork) {
                if (ev.object && context_of(ctx.store, ev.subject) == shared->context) {
                    inherit_on_fork(ev.subject, *ev.object, ctx.store);
                }
                return ReturnCode::allow();
            }
            Evaluation e = evaluate_with(ev, *shared, ctx.store);
            if (e.violation) shared->violations->push(std::move(*e.violation));
            return e.code;
        },
        true);
}

CompiledProgramSet make_set(const Policy &policy, CompileOptions options) {
    CompiledProgramSet set;
    set.table = std::make_shared<const Policy>(policy);
    set.context = "policy:" + policy.subject + "@" + policy.source_hash;
    set.source_hash = policy.source_hash;
    set.options = options;
    set.violations = std::make_shared<ViolationRing>(options.violation_capacity, OverflowPolicy::drop);
    return set;
}

std::shared_ptr<const Shared> shared_of(const CompiledProgramSet &set) {
    return std::make_shared<const Shared>(Shared{set.table, set.context, set.violations, set.options});
}

}  // namespace

CompiledProgramSet compile(const Policy &policy, CompileOptions options) {
    CompiledProgramSet set = make_set(policy, options);
    auto shared = shared_of(set);
    for (Category c : policy.categories()) {
        for (HookId h : hooks_of(c)) {
            set.hook_category[h] = c;
            set.hooks_covered.insert(h);
        }
    }
    set.hooks_covered.insert(HookId::task_fork);
    for (HookId h : kAllHooks) {
        if (set.hooks_covered.count(h)) set.programs.push_back(enforcement_program("policy:", h, shared));
    }
    return set;
}

CompiledProgramSet compile_interpreter(const Policy &policy, CompileOptions options) {
    CompiledProgramSet set = make_set(policy, options);
    auto shared = shared_of(set);
    for (HookId h : kAllHooks) {
        set.hooks_covered.insert(h);
        set.programs.push_back(enforcement_program("interp:", h, shared));
    }
    return set;
}

Evaluation evaluate(const HookEvent &ev, const CompiledProgramSet &set, ObjectStore &store) {
    Shared shared{set.table, set.context, set.violations, set.options};
    return evaluate_with(ev, shared, store);
}

std::vector<AttachmentHandle> CompiledProgramSet::attach(CgroupTree &tree, CgroupId cgroup) const {
    std::vector<AttachmentHandle> handles;
    for (const auto &p : programs) handles.push_back(tree.attach(cgroup, p->hook, p));
    return handles;
}

namespace {

std::string describe_rules(const Policy &policy, Category c) {
    std::ostringstream out;
    if (c == Category::net) {
        out << "default " << to_string(policy.net->default_decision);
        for (std::size_t i = 0; i < policy.net->allow.size(); ++i) {
            const auto &r = policy.net->allow[i];
            out << "; allow[" << i << "] " << to_string(r.direction);
            for (std::size_t j = 0; j < r.ports.size(); ++j) {
                out << (j ? "," : " ") << r.port_names[j] << "(" << r.ports[j] << ")";
            }
        }
        return out.str();
    }
    const auto &fs = *policy.fs;
    const bool write = c == Category::fs_write;
    out << "default " << (write ? "write " : "exec ") << to_string(write ? *fs.default_write : *fs.default_exec);
    for (std::size_t i = 0; i < fs.allow.size(); ++i) {
        const auto &r = fs.allow[i];
        const bool relevant = write ? r.perms.count(Perm::write) != 0
                                    : (r.perms.count(Perm::exec) != 0 || r.perms.count(Perm::map) != 0);
        if (!relevant) continue;
        out << "; allow[" << i << "] " << r.pattern << " [";
        bool first = true;
        for (Perm p : r.perms) {
            out << (first ? "" : ",") << to_string(p);
            first = false;
        }
        out << "]";
    }
    return out.str();
}

}  // namespace

std::string CompiledProgramSet::explain() const {
    std::ostringstream out;
    out << "subject " << table->subject << " context " << context << "\n";
    for (HookId h : kAllHooks) {
        if (!hooks_covered.count(h)) continue;
        out << to_string(h) << " -> ";
        auto it = hook_category.find(h);
        if (it != hook_category.end()) {
            out << to_string(it->second) << ": " << describe_rules(*table, it->second);
        } else if (h == HookId::task_fork) {
            out << "inherit context on fork";
        } else {
            out << "runtime rule scan";
        }
        out << "\n";
    }
    return out.str();
}

std::string CompiledProgramSet::plan_json() const {
    json j;
    j["subject"] = table->subject;
    j["context"] = context;
    j["source_hash"] = source_hash;
    j["categories"] = json::array();
    for (Category c : table->categories()) j["categories"].push_back(std::string(to_string(c)));
    j["programs"] = json::array();
    for (const auto &p : programs) {
        json pj;
        pj["id"] = p->id;
        pj["hook"] = std::string(to_string(p->hook));
        auto it = hook_category.find(p->hook);
        pj["category"] = it != hook_category.end() ? std::string(to_string(it->second))
                         : p->hook == HookId::task_fork ? "inherit"
                                                        : "interpreter";
        j["programs"].push_back(pj);
    }
    json table_json;
    if (table->net) {
        json n;
        n["default"] = std::string(to_string(table->net->default_decision));
        n["allow"] = json::array();
        for (const auto &r : table->net->allow) {
            n["allow"].push_back({{"direction", std::string(to_string(r.direction))}, {"ports", r.ports}});
        }
        table_json["network"] = n;
    }
    if (table->fs) {
        json f;
        if (table->fs->default_write) f["default_write"] = std::string(to_string(*table->fs->default_write));
        if (table->fs->default_exec) f["default_exec"] = std::string(to_string(*table->fs->default_exec));
        f["allow"] = json::array();
        for (const auto &r : table->fs->allow) {
            json perms = json::array();
            for (Perm p : r.perms) perms.push_back(std::string(to_string(p)));
            f["allow"].push_back({{"path", r.pattern}, {"perms", perms}});
        }
        table_json["filesystem"] = f;
    }
    j["table"] = table_json;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Contexts
// ---------------------------------------------------------------------------

void bind_policy(ObjectStore &store, const CompiledProgramSet &set, std::uint64_t pid) {
    store.userspace_update(ExternalId{ExternalKind::cred, pid}, store.slot(kContextSlot), to_bytes(set.context));
}

void inherit_on_fork(const KernelObjectId &parent, const KernelObjectId &child, ObjectStore &store) {
    const auto ctx = context_of(store, parent);
    if (!ctx) return;
    store.storage_get(cred_of(child), true)->put(store.slot(kContextSlot), to_bytes(*ctx));
}

std::optional<std::string> context_of(ObjectStore &store, const KernelObjectId &task) {
    auto handle = store.storage_get(cred_of(task), false);
    if (!handle) return std::nullopt;
    auto bytes = handle->get(store.slot(kContextSlot));
    if (!bytes) return std::nullopt;
    return to_text(*bytes);
}

}  // namespace cgaudit
