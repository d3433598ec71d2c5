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

#include "cgaudit/event_model.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "cgaudit/error.hpp"

namespace cgaudit {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::string_view, 9> kObjectKindNames = {
    "task", "inode", "file", "cred", "socket", "pipe", "msg", "superblock", "memory",
};

constexpr std::array<std::string_view, kHookCount> kHookNames = {
    "file_open",     "inode_create",  "inode_permission", "inode_setattr", "inode_post_setxattr",
    "file_permission", "bprm_check",  "bprm_set_creds",   "socket_create", "socket_bind",
    "socket_listen", "socket_accept", "socket_connect",   "task_fork",
};

constexpr std::array<std::string_view, 12> kSyscallNames = {
    "open", "read", "write", "execve", "fork", "socket", "bind", "listen", "accept", "connect", "exit", "close",
};

std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename T>
bool parse_number(std::string_view text, T &out) {
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

[[noreturn]] void bad_record(const std::string &what) { throw Error(Errc::ParseError, what); }

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(ObjectKind kind) noexcept { return kObjectKindNames[static_cast<std::size_t>(kind)]; }

ObjectKind parse_object_kind(std::string_view name) {
    for (std::size_t i = 0; i < kObjectKindNames.size(); ++i) {
        if (kObjectKindNames[i] == name) return static_cast<ObjectKind>(i);
    }
    bad_record("unknown object kind '" + std::string(name) + "'");
}

std::string KernelObjectId::to_string() const {
    std::string out(cgaudit::to_string(kind));
    out += ':';
    out += fs_uuid;
    out += ':';
    out += std::to_string(local_id);
    out += ':';
    out += std::to_string(generation);
    return out;
}

KernelObjectId KernelObjectId::parse(std::string_view text) {
    // fs uuids may not contain ':'; kind and numbers never do.
    std::array<std::string_view, 4> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto pos = text.find(':', start);
        if (pos == std::string_view::npos) bad_record("malformed object id '" + std::string(text) + "'");
        parts[i] = text.substr(start, pos - start);
        start = pos + 1;
    }
    parts[3] = text.substr(start);
    KernelObjectId id;
    id.kind = parse_object_kind(parts[0]);
    id.fs_uuid = std::string(parts[1]);
    if (!parse_number(parts[2], id.local_id) || !parse_number(parts[3], id.generation)) {
        bad_record("malformed object id '" + std::string(text) + "'");
    }
    id.validate();
    return id;
}

void KernelObjectId::validate() const {
    if (kind == ObjectKind::inode && fs_uuid.empty()) {
        bad_record("inode " + std::to_string(local_id) + " has no file system uuid");
    }
}

KernelObjectId task_id(std::uint64_t pid, std::uint32_t generation) {
    return {ObjectKind::task, {}, pid, generation};
}

KernelObjectId inode_id(std::string fs_uuid, std::uint64_t ino, std::uint32_t generation) {
    return {ObjectKind::inode, std::move(fs_uuid), ino, generation};
}

KernelObjectId object_id(ObjectKind kind, std::uint64_t local_id, std::uint32_t generation) {
    return {kind, {}, local_id, generation};
}

KernelObjectId cred_of(const KernelObjectId &task) { return {ObjectKind::cred, {}, task.local_id, task.generation}; }

KernelObjectId memory_of(const KernelObjectId &task) {
    return {ObjectKind::memory, {}, task.local_id, task.generation};
}

std::size_t KernelObjectIdHash::operator()(const KernelObjectId &id) const noexcept {
    std::uint64_t h = fnv1a(id.fs_uuid);
    h ^= id.local_id + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= (static_cast<std::uint64_t>(id.generation) << 8 | static_cast<std::uint64_t>(id.kind)) + 0x9e3779b97f4a7c15ULL +
         (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
}

// ---------------------------------------------------------------------------

std::string_view to_string(HookId hook) noexcept { return kHookNames[index_of(hook)]; }

HookId parse_hook(std::string_view name) {
    for (std::size_t i = 0; i < kHookNames.size(); ++i) {
        if (kHookNames[i] == name) return static_cast<HookId>(i);
    }
    throw Error(Errc::UnknownHook, "'" + std::string(name) + "'");
}

std::string_view to_string(Syscall syscall) noexcept { return kSyscallNames[static_cast<std::size_t>(syscall)]; }

Syscall parse_syscall(std::string_view name) {
    for (std::size_t i = 0; i < kSyscallNames.size(); ++i) {
        if (kSyscallNames[i] == name) return static_cast<Syscall>(i);
    }
    throw Error(Errc::UnknownSyscall, "'" + std::string(name) + "'");
}

bool requires_path_depth(Syscall syscall) noexcept {
    return syscall == Syscall::open || syscall == Syscall::execve;
}

bool requires_object(Syscall syscall) noexcept { return syscall != Syscall::exit; }

bool requires_net(Syscall syscall) noexcept {
    return syscall == Syscall::bind || syscall == Syscall::listen || syscall == Syscall::accept ||
           syscall == Syscall::connect;
}

std::string_view to_string(Direction direction) noexcept {
    return direction == Direction::incoming ? "incoming" : "outgoing";
}

Direction parse_direction(std::string_view name) {
    if (name == "incoming") return Direction::incoming;
    if (name == "outgoing") return Direction::outgoing;
    bad_record("unknown direction '" + std::string(name) + "'");
}

std::string_view to_string(Access access) noexcept {
    switch (access) {
        case Access::read: return "read";
        case Access::write: return "write";
        case Access::none: break;
    }
    return "none";
}

void SyscallRecord::validate() const {
    subject.validate();
    if (subject.kind != ObjectKind::task) bad_record("subject must be a task");
    if (requires_path_depth(syscall) != path_depth.has_value()) {
        if (!path_depth) throw Error(Errc::MissingPathDepth, std::string(to_string(syscall)) + " needs path_depth");
        bad_record(std::string(to_string(syscall)) + " does not take path_depth");
    }
    if (requires_object(syscall) && !object) bad_record(std::string(to_string(syscall)) + " needs an object");
    if (object) object->validate();
    if (syscall == Syscall::fork && object->kind != ObjectKind::task) bad_record("fork object must be the child task");
    if (requires_net(syscall) && !net) bad_record(std::string(to_string(syscall)) + " needs net parameters");
    if (creates_new_file && syscall != Syscall::open) bad_record("creates_new_file only applies to open");
    if (outcome == Outcome::failure && !fail_at_ordinal) bad_record("failed call needs fail_at_ordinal");
    if (outcome == Outcome::success && fail_at_ordinal) bad_record("fail_at_ordinal on a successful call");
}

KernelObjectId directory_inode(const SyscallRecord &rec, std::uint32_t index) {
    std::string fs = "rootfs";
    if (rec.object && rec.object->kind == ObjectKind::inode) fs = rec.object->fs_uuid;

    // Directory prefixes of an absolute path: "/", "/a", "/a/b", ...
    std::string key;
    if (rec.path && !rec.path->empty() && rec.path->front() == '/') {
        const std::string &p = *rec.path;
        std::uint32_t seen = 0;
        std::size_t pos = 0;
        while (seen < index) {
            pos = p.find('/', pos + 1);
            if (pos == std::string::npos) break;
            ++seen;
        }
        if (seen == index && (index == 0 || pos != std::string::npos)) key = index == 0 ? "/" : p.substr(0, pos);
    }
    if (key.empty()) key = "#dir/" + std::to_string(index);

    KernelObjectId dir;
    dir.kind = ObjectKind::inode;
    dir.fs_uuid = std::move(fs);
    dir.local_id = (1ULL << 63) | (fnv1a(key) >> 1);
    return dir;
}

std::vector<HookEvent> expand_syscall(const SyscallRecord &rec) {
    if (requires_path_depth(rec.syscall) && !rec.path_depth) {
        throw Error(Errc::MissingPathDepth, std::string(to_string(rec.syscall)) + " needs path_depth");
    }

    std::vector<HookEvent> events;
    auto emit = [&](HookId hook, std::optional<KernelObjectId> object, Access access = Access::none) {
        HookEvent ev;
        ev.hook = hook;
        ev.subject = rec.subject;
        ev.object = std::move(object);
        ev.origin = &rec;
        ev.ordinal = static_cast<std::uint32_t>(events.size());
        ev.access = access;
        events.push_back(std::move(ev));
    };
    auto path_walk = [&] {
        for (std::uint32_t i = 0; i < *rec.path_depth; ++i) emit(HookId::inode_permission, directory_inode(rec, i));
    };

    switch (rec.syscall) {
        case Syscall::open:
            path_walk();
            if (rec.creates_new_file) {
                emit(HookId::inode_create, rec.object);
                emit(HookId::inode_setattr, rec.object);
            }
            if (rec.sets_xattr) emit(HookId::inode_post_setxattr, rec.object);
            emit(HookId::file_open, rec.object);
            break;
        case Syscall::read: emit(HookId::file_permission, rec.object, Access::read); break;
        case Syscall::write: emit(HookId::file_permission, rec.object, Access::write); break;
        case Syscall::execve:
            path_walk();
            emit(HookId::file_open, rec.object);
            emit(HookId::bprm_check, rec.object);
            emit(HookId::bprm_set_creds, rec.object);
            emit(HookId::file_permission, rec.object, Access::read);
            break;
        case Syscall::fork: emit(HookId::task_fork, rec.object); break;
        case Syscall::socket: emit(HookId::socket_create, rec.object); break;
        case Syscall::bind: emit(HookId::socket_bind, rec.object); break;
        case Syscall::listen: emit(HookId::socket_listen, rec.object); break;
        case Syscall::accept: emit(HookId::socket_accept, rec.object); break;
        case Syscall::connect: emit(HookId::socket_connect, rec.object); break;
        case Syscall::exit:
        case Syscall::close: break;
    }

    if (rec.outcome == Outcome::failure) {
        const std::uint32_t at = rec.fail_at_ordinal.value_or(0);
        if (at >= events.size()) {
            bad_record("fail_at_ordinal " + std::to_string(at) + " beyond " + std::to_string(events.size()) + " hooks");
        }
        events.resize(at + 1);
    }
    return events;
}

std::vector<HookId> expand_hooks(const SyscallRecord &rec) {
    std::vector<HookId> hooks;
    for (const auto &ev : expand_syscall(rec)) hooks.push_back(ev.hook);
    return hooks;
}

// ---------------------------------------------------------------------------

CostModel CostModel::uniform(Rational cost) {
    CostModel model;
    for (HookId hook : kAllHooks) model.set(hook, cost);
    return model;
}

CostModel &CostModel::set(HookId hook, Rational cost) {
    if (cost < Rational(0)) throw std::invalid_argument("hook cost must be nonnegative");
    per_hook_[index_of(hook)] = cost;
    return *this;
}

std::optional<Rational> CostModel::cost(HookId hook) const noexcept { return per_hook_[index_of(hook)]; }

CostModel CostModel::scaled(Rational factor) const {
    CostModel out;
    for (HookId hook : kAllHooks) {
        if (auto c = cost(hook)) out.set(hook, *c * factor);
    }
    return out;
}

Rational estimate_cost(const SyscallRecord &rec, const CostModel &model) {
    Rational total;
    for (HookId hook : expand_hooks(rec)) {
        const auto c = model.cost(hook);
        if (!c) throw Error(Errc::MissingCost, "no cost for hook " + std::string(to_string(hook)));
        total += *c;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Trace format
// ---------------------------------------------------------------------------

namespace {

ordered_json object_to_json(const KernelObjectId &id) {
    ordered_json j;
    j["kind"] = std::string(to_string(id.kind));
    if (!id.fs_uuid.empty()) j["fs"] = id.fs_uuid;
    j["id"] = id.local_id;
    if (id.generation != 0) j["gen"] = id.generation;
    return j;
}

void reject_unknown_keys(const nlohmann::json &j, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
    for (const auto &[key, _] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || a == key;
        if (!ok) bad_record("unknown key '" + key + "' in " + std::string(where));
    }
}

KernelObjectId object_from_json(const nlohmann::json &j, std::string_view where) {
    if (!j.is_object()) bad_record(std::string(where) + " must be an object");
    reject_unknown_keys(j, {"kind", "fs", "id", "gen"}, where);
    KernelObjectId id;
    id.kind = parse_object_kind(j.at("kind").get<std::string>());
    if (j.contains("fs")) id.fs_uuid = j.at("fs").get<std::string>();
    id.local_id = j.at("id").get<std::uint64_t>();
    if (j.contains("gen")) id.generation = j.at("gen").get<std::uint32_t>();
    id.validate();
    return id;
}

SyscallRecord record_from_json(const nlohmann::json &j) {
    if (!j.is_object()) bad_record("record must be a JSON object");
    reject_unknown_keys(j, {"timestamp", "syscall", "subject", "object", "path_depth", "path", "flags", "net"},
                        "record");
    SyscallRecord rec;
    rec.timestamp = j.at("timestamp").get<std::uint64_t>();
    rec.syscall = parse_syscall(j.at("syscall").get<std::string>());
    rec.subject = object_from_json(j.at("subject"), "subject");
    if (j.contains("object")) rec.object = object_from_json(j.at("object"), "object");
    if (j.contains("path_depth")) rec.path_depth = j.at("path_depth").get<std::uint32_t>();
    if (j.contains("path")) rec.path = j.at("path").get<std::string>();
    if (j.contains("flags")) {
        const auto &f = j.at("flags");
        if (!f.is_object()) bad_record("flags must be an object");
        reject_unknown_keys(f, {"creates_new_file", "sets_xattr", "outcome", "fail_at_ordinal"}, "flags");
        rec.creates_new_file = f.value("creates_new_file", false);
        rec.sets_xattr = f.value("sets_xattr", false);
        const auto outcome = f.value("outcome", std::string("success"));
        if (outcome == "success") {
            rec.outcome = Outcome::success;
        } else if (outcome == "failure") {
            rec.outcome = Outcome::failure;
        } else {
            bad_record("unknown outcome '" + outcome + "'");
        }
        if (f.contains("fail_at_ordinal")) rec.fail_at_ordinal = f.at("fail_at_ordinal").get<std::uint32_t>();
    }
    if (j.contains("net")) {
        const auto &n = j.at("net");
        if (!n.is_object()) bad_record("net must be an object");
        reject_unknown_keys(n, {"direction", "port"}, "net");
        NetParams net;
        net.direction = parse_direction(n.at("direction").get<std::string>());
        net.port = n.at("port").get<std::uint16_t>();
        rec.net = net;
    }
    rec.validate();
    return rec;
}

}  // namespace

std::string to_trace_line(const SyscallRecord &rec) {
    ordered_json j;
    j["timestamp"] = rec.timestamp;
    j["syscall"] = std::string(to_string(rec.syscall));
    j["subject"] = object_to_json(rec.subject);
    if (rec.object) j["object"] = object_to_json(*rec.object);
    if (rec.path_depth) j["path_depth"] = *rec.path_depth;
    if (rec.path) j["path"] = *rec.path;
    if (rec.creates_new_file || rec.sets_xattr || rec.outcome == Outcome::failure) {
        ordered_json f;
        if (rec.creates_new_file) f["creates_new_file"] = true;
        if (rec.sets_xattr) f["sets_xattr"] = true;
        f["outcome"] = rec.outcome == Outcome::success ? "success" : "failure";
        if (rec.fail_at_ordinal) f["fail_at_ordinal"] = *rec.fail_at_ordinal;
        j["flags"] = std::move(f);
    }
    if (rec.net) {
        ordered_json n;
        n["direction"] = std::string(to_string(rec.net->direction));
        n["port"] = rec.net->port;
        j["net"] = std::move(n);
    }
    return j.dump();
}

void write_trace(std::ostream &out, const std::vector<SyscallRecord> &records) {
    for (const auto &rec : records) out << to_trace_line(rec) << '\n';
}

std::vector<SyscallRecord> parse_trace(std::istream &in) {
    std::vector<SyscallRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        SyscallRecord rec;
        try {
            rec = record_from_json(nlohmann::json::parse(line));
        } catch (const Error &e) {
            throw ParseError(e.code(), lineno, e.what());
        } catch (const nlohmann::json::exception &e) {
            throw ParseError(Errc::ParseError, lineno, e.what());
        }
        if (!records.empty() && rec.timestamp <= records.back().timestamp) {
            throw ParseError(Errc::NonMonotonicTimestamp, lineno,
                             "timestamp " + std::to_string(rec.timestamp) + " does not increase");
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<SyscallRecord> parse_trace_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ParseError, "cannot open trace '" + path + "'");
    return parse_trace(in);
}

}  // namespace cgaudit
