#include "mdms/ingest.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "mdms/error.hpp"
#include "mdms/log.hpp"

namespace mdms::ingest {

namespace {
constexpr std::size_t kMaxLineBytes = 64 * 1024;
constexpr int kStoreRetries = 5;
}  // namespace

IngestPipeline::IngestPipeline(store::Store& store, PipelineOptions options)
    : store_(store), options_(options), queue_(options.queue_capacity) {
    writer_ = std::thread([this] { writer_loop(); });
}

IngestPipeline::~IngestPipeline() { stop(); }

void IngestPipeline::submit_line(std::string_view line) {
    lines_.fetch_add(1, std::memory_order_relaxed);
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    MeterFrame frame;
    try {
        frame = parse_frame(line);
    } catch (const Error& e) {
        malformed_.fetch_add(1, std::memory_order_relaxed);
        log::debug("dropped frame", {{"reason", e.what()}});
        return;
    }
    {
        std::lock_guard lock(progress_mutex_);
        if (stopped_) {
            return;
        }
        ++enqueued_;
    }
    if (!queue_.push(std::move(frame))) {
        std::lock_guard lock(progress_mutex_);
        --enqueued_;
        progress_cv_.notify_all();
    }
}

void IngestPipeline::flush() {
    std::unique_lock lock(progress_mutex_);
    const std::uint64_t target = enqueued_;
    progress_cv_.wait(lock, [&] { return written_ >= target || stopped_; });
}

void IngestPipeline::stop() {
    {
        std::lock_guard lock(progress_mutex_);
        if (stopped_) {
            return;
        }
    }
    queue_.close();
    if (writer_.joinable()) {
        writer_.join();
    }
    std::lock_guard lock(progress_mutex_);
    stopped_ = true;
    progress_cv_.notify_all();
}

IngestStats IngestPipeline::stats() const {
    IngestStats s;
    s.lines = lines_.load();
    s.stored = stored_.load();
    s.malformed = malformed_.load();
    s.duplicate = duplicate_.load();
    s.unknown_meter = unknown_meter_.load();
    return s;
}

void IngestPipeline::writer_loop() {
    while (true) {
        auto batch = queue_.pop_batch(options_.batch_size);
        if (batch.empty()) {
            return;
        }
        if (options_.auto_register) {
            for (const auto& f : batch) {
                if (known_meters_.count(f.meter_id) != 0) {
                    continue;
                }
                if (!store_.has_meter(f.meter_id)) {
                    try {
                        store_.register_meter(f.meter_id);
                        log::info("auto-registered meter", {{"meter_id", f.meter_id}});
                    } catch (const Error& e) {
                        if (e.code() != ErrorCode::DuplicateMeter) {
                            log::error("auto-register failed", {{"meter_id", f.meter_id}, {"reason", e.what()}});
                            continue;
                        }
                    }
                }
                known_meters_.insert(f.meter_id);
            }
        }

        store::InsertCounts counts;
        for (int attempt = 1;; ++attempt) {
            try {
                counts = store_.insert_readings(batch);
                break;
            } catch (const Error& e) {
                if (attempt >= kStoreRetries) {
                    log::error("store write failed; batch lost", {{"frames", std::to_string(batch.size())},
                                                                  {"reason", e.what()}});
                    break;
                }
                std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
            }
        }
        stored_.fetch_add(counts.inserted);
        duplicate_.fetch_add(counts.duplicate);
        unknown_meter_.fetch_add(counts.unknown_meter);

        std::lock_guard lock(progress_mutex_);
        written_ += batch.size();
        progress_cv_.notify_all();
    }
}

std::uint64_t run_ingest_loop(std::istream& in, IngestPipeline& pipeline) {
    std::uint64_t n = 0;
    for (std::string line; std::getline(in, line);) {
        pipeline.submit_line(line);
        ++n;
    }
    return n;
}

FrameListener::FrameListener(IngestPipeline& pipeline, const std::string& host, int port)
    : pipeline_(pipeline) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
        throw Error(ErrorCode::InvalidConfig, "cannot resolve frame listen address " + host);
    }
    listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (listen_fd_ < 0) {
        freeaddrinfo(res);
        throw Error(ErrorCode::InvalidConfig, std::string("socket: ") + std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const int bound = ::bind(listen_fd_, res->ai_addr, res->ai_addrlen);
    freeaddrinfo(res);
    if (bound != 0 || ::listen(listen_fd_, 64) != 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd_);
        throw Error(ErrorCode::InvalidConfig, "cannot listen on " + host + ":" + service + ": " + why);
    }
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
}

FrameListener::~FrameListener() { stop(); }

void FrameListener::stop() {
    if (!running_.exchange(false)) {
        return;
    }
    if (acceptor_.joinable()) {
        acceptor_.join();
    }
    ::close(listen_fd_);
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(conn_mutex_);
        for (const int fd : open_fds_) {
            ::shutdown(fd, SHUT_RDWR);
        }
        threads.swap(connections_);
    }
    for (auto& t : threads) {
        t.join();
    }
}

void FrameListener::accept_loop() {
    while (running_) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        if (::poll(&pfd, 1, 100) <= 0) {
            continue;
        }
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            continue;
        }
        std::lock_guard lock(conn_mutex_);
        open_fds_.push_back(fd);
        connections_.emplace_back([this, fd] { serve(fd); });
    }
}

void FrameListener::serve(int fd) {
    std::string pending;
    bool overlong = false;
    char buf[8192];
    while (true) {
        const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) {
                continue;
            }
            break;
        }
        std::size_t start = 0;
        for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
            if (buf[k] != '\n') {
                continue;
            }
            if (overlong) {
                pipeline_.submit_line("#");  // counted as malformed
                overlong = false;
                pending.clear();
            } else {
                pending.append(buf + start, k - start);
                pipeline_.submit_line(pending);
                pending.clear();
            }
            start = k + 1;
        }
        if (!overlong) {
            pending.append(buf + start, static_cast<std::size_t>(n) - start);
            if (pending.size() > kMaxLineBytes) {
                overlong = true;
                pending.clear();
            }
        }
    }
    if (!pending.empty() && !overlong) {
        pipeline_.submit_line(pending);
    }
    std::lock_guard lock(conn_mutex_);
    std::erase(open_fds_, fd);
    ::close(fd);
}

}  // namespace mdms::ingest
