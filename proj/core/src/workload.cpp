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

#include <algorithm>
#include <random>

#include "cgaudit/error.hpp"
#include "cgaudit/harness.hpp"
#include "cgaudit/motif.hpp"

namespace cgaudit {

namespace {

const std::vector<std::string> kDirs = {
    "/tmp", "/etc", "/srv/data", "/srv/data/a", "/srv/data/b/c", "/usr/lib", "/usr/bin", "/var/www/html", "/home/u",
};

const std::vector<std::uint16_t> kPorts = {22, 53, 80, 443, 8080};

struct File {
    KernelObjectId id;
    std::string path;
};

struct Sock {
    KernelObjectId id;
    bool bound = false;
    bool listening = false;
};

// Keeps track of what is alive so every record references live objects.
class Generator {
public:
    explicit Generator(std::uint64_t seed) : rng_(seed) {}

    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
    bool chance(unsigned percent) { return pick(100) < percent; }

    std::vector<SyscallRecord> take() { return std::move(out_); }
    std::size_t emitted() const { return out_.size(); }

    KernelObjectId new_task() {
        tasks_.push_back(task_id(next_pid_++));
        return tasks_.back();
    }
    const KernelObjectId &any_task() {
        if (tasks_.empty()) new_task();
        return tasks_[pick(tasks_.size())];
    }

    File &any_file(const std::vector<std::string> &dirs) {
        if (files_.empty() || chance(10)) {
            const std::string dir = dirs[pick(dirs.size())];
            files_.push_back(File{inode_id("rootfs", next_ino_++), dir + "/f" + std::to_string(next_ino_)});
            fresh_file_ = true;
        } else {
            fresh_file_ = false;
        }
        return fresh_file_ ? files_.back() : files_[pick(files_.size())];
    }

    void open(const std::vector<std::string> &dirs) {
        const KernelObjectId subject = any_task();
        const File file = any_file(dirs);
        SyscallRecord rec = base(Syscall::open, subject);
        rec.object = file.id;
        rec.path = file.path;
        rec.path_depth = depth_of(file.path);
        rec.creates_new_file = fresh_file_;
        rec.sets_xattr = fresh_file_ && chance(20);
        emit(std::move(rec));
    }

    void open_pipe() {
        const KernelObjectId subject = any_task();
        pipes_.push_back(object_id(ObjectKind::pipe, next_obj_++));
        SyscallRecord rec = base(Syscall::open, subject);
        rec.object = pipes_.back();
        rec.path_depth = 0;
        rec.creates_new_file = true;
        emit(std::move(rec));
    }

    // Reads or writes a file, pipe or socket.
    void io(Syscall sc, const std::vector<std::string> &dirs, unsigned pipe_pct, unsigned sock_pct) {
        const KernelObjectId subject = any_task();
        SyscallRecord rec = base(sc, subject);
        if (!pipes_.empty() && chance(pipe_pct)) {
            rec.object = pipes_[pick(pipes_.size())];
        } else if (!sockets_.empty() && chance(sock_pct)) {
            rec.object = sockets_[pick(sockets_.size())].id;
        } else {
            const File file = any_file(dirs);
            rec.object = file.id;
            rec.path = file.path;
        }
        emit(std::move(rec));
    }

    void execve(const std::vector<std::string> &dirs) {
        const KernelObjectId subject = any_task();
        const File file = any_file(dirs);
        SyscallRecord rec = base(Syscall::execve, subject);
        rec.object = file.id;
        rec.path = file.path;
        rec.path_depth = depth_of(file.path);
        emit(std::move(rec));
    }

    void fork() {
        const KernelObjectId parent = any_task();
        const KernelObjectId child = task_id(next_pid_++);
        SyscallRecord rec = base(Syscall::fork, parent);
        rec.object = child;
        // task_fork is the only hook, so even a failed fork has announced
        // the child; keep it so teardown retires it.
        emit(std::move(rec));
        tasks_.push_back(child);
    }

    void exit_task() {
        if (tasks_.size() < 2) return;
        const std::size_t i = pick(tasks_.size());
        SyscallRecord rec = base(Syscall::exit, tasks_[i]);
        out_.push_back(std::move(rec));
        tasks_.erase(tasks_.begin() + static_cast<std::ptrdiff_t>(i));
    }

    void close_something() {
        const KernelObjectId subject = any_task();
        SyscallRecord rec = base(Syscall::close, subject);
        const std::size_t total = files_.size() + pipes_.size() + sockets_.size();
        if (total == 0) return;
        std::size_t i = pick(total);
        if (i < files_.size()) {
            rec.object = files_[i].id;
            files_.erase(files_.begin() + static_cast<std::ptrdiff_t>(i));
        } else if ((i -= files_.size()) < pipes_.size()) {
            rec.object = pipes_[i];
            pipes_.erase(pipes_.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            i -= pipes_.size();
            rec.object = sockets_[i].id;
            sockets_.erase(sockets_.begin() + static_cast<std::ptrdiff_t>(i));
        }
        out_.push_back(std::move(rec));
    }

    void socket() {
        const KernelObjectId subject = any_task();
        sockets_.push_back(Sock{object_id(ObjectKind::socket, next_obj_++)});
        SyscallRecord rec = base(Syscall::socket, subject);
        rec.object = sockets_.back().id;
        emit(std::move(rec));
    }

    void net(Syscall sc) {
        if (sockets_.empty()) socket();
        const KernelObjectId subject = any_task();
        Sock &s = sockets_[pick(sockets_.size())];
        SyscallRecord rec = base(sc, subject);
        rec.object = s.id;
        const bool incoming = sc != Syscall::connect;
        rec.net = NetParams{incoming ? Direction::incoming : Direction::outgoing, kPorts[pick(kPorts.size())]};
        if (sc == Syscall::bind) s.bound = true;
        if (sc == Syscall::listen) s.listening = true;
        emit(std::move(rec));
    }

    void teardown() {
        for (const auto &f : files_) close_object(f.id);
        for (const auto &p : pipes_) close_object(p);
        for (const auto &s : sockets_) close_object(s.id);
        files_.clear();
        pipes_.clear();
        sockets_.clear();
        for (const auto &t : tasks_) out_.push_back(base(Syscall::exit, t));
        tasks_.clear();
    }

private:
    static std::uint32_t depth_of(const std::string &path) {
        return static_cast<std::uint32_t>(std::count(path.begin(), path.end(), '/'));
    }

    SyscallRecord base(Syscall sc, const KernelObjectId &subject) {
        SyscallRecord rec;
        rec.timestamp = ++ts_;
        rec.syscall = sc;
        rec.subject = subject;
        return rec;
    }

    void close_object(const KernelObjectId &id) {
        SyscallRecord rec = base(Syscall::close, tasks_.empty() ? new_task() : tasks_.front());
        rec.object = id;
        out_.push_back(std::move(rec));
    }

    // Occasionally fails the call part way.
    void emit(SyscallRecord rec) {
        if (chance(4)) {
            const auto hooks = expand_hooks(rec);
            if (!hooks.empty()) {
                rec.outcome = Outcome::failure;
                rec.fail_at_ordinal = static_cast<std::uint32_t>(pick(hooks.size()));
            }
        }
        out_.push_back(std::move(rec));
    }

    std::mt19937_64 rng_;
    std::uint64_t ts_ = 0;
    std::uint64_t next_pid_ = 100;
    std::uint64_t next_ino_ = 1000;
    std::uint64_t next_obj_ = 1;
    bool fresh_file_ = false;
    std::vector<KernelObjectId> tasks_;
    std::vector<File> files_;
    std::vector<KernelObjectId> pipes_;
    std::vector<Sock> sockets_;
    std::vector<SyscallRecord> out_;
};

void fileserver(Generator &g, std::size_t size) {
    static const std::vector<std::string> dirs = {"/srv/data", "/srv/data/a", "/srv/data/b/c", "/tmp"};
    for (int i = 0; i < 4; ++i) g.new_task();
    while (g.emitted() < size) {
        const std::size_t r = g.pick(100);
        if (r < 35) {
            g.io(Syscall::read, dirs, 0, 0);
        } else if (r < 60) {
            g.io(Syscall::write, dirs, 0, 0);
        } else if (r < 80) {
            g.open(dirs);
        } else if (r < 85) {
            g.close_something();
        } else if (r < 90) {
            g.execve({"/usr/bin"});
        } else if (r < 95) {
            g.fork();
        } else {
            g.exit_task();
        }
    }
}

void webserver(Generator &g, std::size_t size) {
    static const std::vector<std::string> dirs = {"/var/www/html", "/etc", "/tmp"};
    for (int i = 0; i < 2; ++i) g.new_task();
    while (g.emitted() < size) {
        const std::size_t r = g.pick(100);
        if (r < 10) {
            g.socket();
        } else if (r < 18) {
            g.net(Syscall::bind);
        } else if (r < 24) {
            g.net(Syscall::listen);
        } else if (r < 36) {
            g.net(Syscall::accept);
        } else if (r < 46) {
            g.net(Syscall::connect);
        } else if (r < 62) {
            g.io(Syscall::read, dirs, 0, 60);
        } else if (r < 76) {
            g.io(Syscall::write, dirs, 0, 70);
        } else if (r < 86) {
            g.open(dirs);
        } else if (r < 91) {
            g.fork();
        } else if (r < 95) {
            g.close_something();
        } else {
            g.exit_task();
        }
    }
}

void fork_tree(Generator &g, std::size_t size) {
    static const std::vector<std::string> dirs = {"/tmp", "/home/u"};
    g.new_task();
    while (g.emitted() < size) {
        const std::size_t r = g.pick(100);
        if (r < 65) {
            g.fork();
        } else if (r < 85) {
            g.exit_task();
        } else {
            g.io(Syscall::read, dirs, 0, 0);
        }
    }
}

void random_mix(Generator &g, std::size_t size) {
    for (int i = 0; i < 3; ++i) g.new_task();
    while (g.emitted() < size) {
        switch (g.pick(14)) {
            case 0: g.open(kDirs); break;
            case 1: g.open_pipe(); break;
            case 2:
            case 3: g.io(Syscall::read, kDirs, 30, 20); break;
            case 4:
            case 5: g.io(Syscall::write, kDirs, 30, 20); break;
            case 6: g.execve(kDirs); break;
            case 7: g.fork(); break;
            case 8: g.socket(); break;
            case 9: g.net(g.chance(50) ? Syscall::bind : Syscall::listen); break;
            case 10: g.net(Syscall::accept); break;
            case 11: g.net(Syscall::connect); break;
            case 12: g.close_something(); break;
            default: g.exit_task(); break;
        }
    }
}

}  // namespace

std::vector<std::string> workload_names() { return {"fileserver", "webserver", "fork-tree", "fig4-scenario", "random"}; }

std::vector<SyscallRecord> generate_trace(const WorkloadSpec &spec) {
    if (spec.name == "fig4-scenario") return fig4_trace();
    Generator g(spec.seed);
    if (spec.name == "fileserver") {
        fileserver(g, spec.size);
    } else if (spec.name == "webserver") {
        webserver(g, spec.size);
    } else if (spec.name == "fork-tree") {
        fork_tree(g, spec.size);
    } else if (spec.name == "random") {
        random_mix(g, spec.size);
    } else {
        throw Error(Errc::UnknownWorkload, "unknown workload '" + spec.name + "'");
    }
    if (spec.size == 0) return {};
    if (spec.teardown) g.teardown();
    return g.take();
}

}  // namespace cgaudit
