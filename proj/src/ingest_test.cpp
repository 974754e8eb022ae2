#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <sstream>

#include "mdms/ingest.hpp"

using namespace mdms;
using namespace mdms::ingest;

namespace {

int connect_local(int port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    return fd;
}

void send_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        const auto n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        REQUIRE(n > 0);
        off += static_cast<std::size_t>(n);
    }
}

}  // namespace

TEST_CASE("bounded queue hands out batches and drains after close") {
    BoundedQueue<int> q(2);
    CHECK(q.push(1));
    CHECK(q.push(2));
    std::thread producer([&] { CHECK(q.push(3)); });
    auto first = q.pop_batch(10);
    producer.join();
    auto second = q.pop_batch(10);
    CHECK(first.size() + second.size() == 3);
    q.close();
    CHECK_FALSE(q.push(4));
    CHECK(q.pop_batch(10).empty());
}

TEST_CASE("ingest loop stores valid lines and counts the rest") {
    store::Store s(":memory:");
    s.register_meter("MTR001");
    IngestPipeline p(s, {.queue_capacity = 2, .batch_size = 2, .auto_register = false});
    std::istringstream in(
        "MTR001#2024-03-05T10:00:00Z#230.0#250.0\n"
        "MTR001#2024-03-05T10:00:01Z#230.0#250.0\r\n"
        "MTR001#2024-03-05T10:00:02Z#230.0\n"
        "MTR001#2024-03-05T10:00:02Z#230.0#0.0\n"
        "MTR001#2024-03-05T10:00:00Z#230.0#250.0\n"
        "OTHER#2024-03-05T10:00:00Z#230.0#1.0\n");
    CHECK(run_ingest_loop(in, p) == 6);
    p.flush();
    const auto st = p.stats();
    CHECK(st.lines == 6);
    CHECK(st.stored == 3);
    CHECK(st.malformed == 1);
    CHECK(st.duplicate == 1);
    CHECK(st.unknown_meter == 1);
    CHECK(s.reading_count("MTR001") == 3);
}

TEST_CASE("auto-registration admits new meters") {
    store::Store s(":memory:");
    IngestPipeline p(s, {.queue_capacity = 16, .batch_size = 16, .auto_register = true});
    p.submit_line("NEW1#2024-03-05T10:00:00Z#230.0#1.0");
    p.submit_line("NEW1#2024-03-05T10:00:01Z#230.0#1.0");
    p.flush();
    CHECK(s.has_meter("NEW1"));
    CHECK(s.reading_count("NEW1") == 2);
}

TEST_CASE("a slow consumer never loses frames") {
    store::Store s(":memory:");
    s.register_meter("M");
    IngestPipeline p(s, {.queue_capacity = 4, .batch_size = 3, .auto_register = false});
    const Timestamp t0 = *parse_timestamp("2024-03-05T00:00:00Z");
    for (int k = 0; k < 5000; ++k) {
        p.submit_line(serialize_frame({"M", t0 + std::chrono::seconds{k}, 230.0, 1.0}));
    }
    p.stop();
    CHECK(s.reading_count("M") == 5000);
    CHECK(p.stats().stored == 5000);
}

TEST_CASE("frame listener ingests concurrent TCP streams") {
    store::Store s(":memory:");
    s.register_meter("A");
    s.register_meter("B");
    IngestPipeline p(s);
    FrameListener listener(p, "127.0.0.1", 0);
    REQUIRE(listener.port() > 0);
    const Timestamp t0 = *parse_timestamp("2024-03-05T00:00:00Z");
    auto stream = [&](const std::string& meter) {
        const int fd = connect_local(listener.port());
        std::string data;
        for (int k = 0; k < 500; ++k) {
            data += serialize_frame({meter, t0 + std::chrono::seconds{k}, 230.0, 5.0}) + "\n";
        }
        // Split mid-line so reassembly across reads is exercised.
        send_all(fd, data.substr(0, 1001));
        send_all(fd, data.substr(1001));
        ::close(fd);
    };
    std::thread a(stream, "A");
    std::thread b(stream, "B");
    a.join();
    b.join();
    for (int spin = 0; spin < 200 && p.stats().lines < 1000; ++spin) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    p.flush();
    CHECK(s.reading_count("A") == 500);
    CHECK(s.reading_count("B") == 500);
    listener.stop();
}
