#pragma once

// Frame intake: lines from sockets or files are parsed, queued and written by a single
// writer thread, so every meter's readings go through one sequential path.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <istream>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mdms/bounded_queue.hpp"
#include "mdms/frame.hpp"
#include "mdms/store.hpp"

namespace mdms::ingest {

struct IngestStats {
    std::uint64_t lines = 0;
    std::uint64_t stored = 0;
    std::uint64_t malformed = 0;
    std::uint64_t duplicate = 0;
    std::uint64_t unknown_meter = 0;
};

struct PipelineOptions {
    std::size_t queue_capacity = 4096;
    std::size_t batch_size = 1024;
    bool auto_register = false;  // register unseen meter ids instead of rejecting their frames
};

class IngestPipeline {
public:
    IngestPipeline(store::Store& store, PipelineOptions options = {});
    ~IngestPipeline();

    IngestPipeline(const IngestPipeline&) = delete;
    IngestPipeline& operator=(const IngestPipeline&) = delete;

    /// Parses one line (trailing '\r' tolerated). Blocks while the write queue is full.
    void submit_line(std::string_view line);

    /// Returns once every frame submitted so far has been written.
    void flush();

    /// Drains outstanding frames and joins the writer.
    void stop();

    IngestStats stats() const;

private:
    void writer_loop();

    store::Store& store_;
    PipelineOptions options_;
    BoundedQueue<MeterFrame> queue_;
    std::thread writer_;

    std::atomic<std::uint64_t> lines_{0};
    std::atomic<std::uint64_t> malformed_{0};
    std::atomic<std::uint64_t> stored_{0};
    std::atomic<std::uint64_t> duplicate_{0};
    std::atomic<std::uint64_t> unknown_meter_{0};

    std::mutex progress_mutex_;
    std::condition_variable progress_cv_;
    std::uint64_t enqueued_ = 0;
    std::uint64_t written_ = 0;
    bool stopped_ = false;

    std::set<std::string> known_meters_;  // writer thread only
};

/// Feeds every line of `in` to the pipeline until EOF. Returns the number of lines read.
std::uint64_t run_ingest_loop(std::istream& in, IngestPipeline& pipeline);

/// TCP server accepting newline-delimited frame streams, one reader thread per connection.
class FrameListener {
public:
    FrameListener(IngestPipeline& pipeline, const std::string& host, int port);
    ~FrameListener();

    FrameListener(const FrameListener&) = delete;
    FrameListener& operator=(const FrameListener&) = delete;

    /// Bound port (useful when constructed with port 0).
    int port() const noexcept { return port_; }
    void stop();

private:
    void accept_loop();
    void serve(int fd);

    IngestPipeline& pipeline_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> running_{true};
    std::thread acceptor_;
    std::mutex conn_mutex_;
    std::vector<std::thread> connections_;
    std::vector<int> open_fds_;
};

}  // namespace mdms::ingest
