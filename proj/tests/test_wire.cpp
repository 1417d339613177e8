#include <doctest.h>

#include <cstring>
#include <future>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "fednilm/checkpoint.hpp"
#include "fednilm/error.hpp"
#include "fednilm/wire.hpp"
#include "test_support.hpp"

using namespace fednilm;
using namespace fednilm::wire;

namespace {

Message roundtrip(const Message& m) {
  const auto frame = encode(m);
  REQUIRE(frame.size() >= kFrameHeader);
  const std::uint32_t len = (std::uint32_t{frame[0]} << 24) | (std::uint32_t{frame[1]} << 16) |
                            (std::uint32_t{frame[2]} << 8) | frame[3];
  REQUIRE(len == frame.size() - kFrameHeader);
  return decode(frame[4], std::span<const std::uint8_t>(frame).subspan(kFrameHeader));
}

FederationConfig wire_config() {
  FederationConfig c;
  c.clients = 3;
  c.global_rounds = 2;
  c.local_epochs = 1;
  c.local_batch = 8;
  c.eta = 1e-3f;
  c.global_seed = 77;
  return c;
}

const PreparedDataset& dataset() {
  static const PreparedDataset ds = testing::synthetic_dataset(31, 1.0, 3);
  return ds;
}

std::vector<WindowSample> client_windows(std::size_t n, std::size_t count = 16) {
  const auto& t = dataset().households.at(n).train;
  return {t.begin(), t.begin() + static_cast<std::ptrdiff_t>(std::min(count, t.size()))};
}

bool bit_equal(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

// Starts serve() on an ephemeral port and returns the port once listening.
struct ServerRun {
  std::future<TrainingResult> result;
  std::uint16_t port = 0;

  ServerRun(const FederationConfig& cfg, ServeOptions opts) {
    std::promise<std::uint16_t> ready;
    auto port_future = ready.get_future();
    opts.registration_timeout = std::chrono::seconds(60);
    opts.on_listening = [p = std::make_shared<std::promise<std::uint16_t>>(std::move(ready))](
                            std::uint16_t port) { p->set_value(port); };
    result = std::async(std::launch::async, [cfg, opts] { return serve(cfg, opts); });
    port = port_future.get();
  }
};

JoinOptions at(std::uint16_t port) {
  JoinOptions o;
  o.port = port;
  return o;
}

}  // namespace

TEST_SUITE("wire messages") {
  TEST_CASE("every message survives a round trip") {
    const std::vector<Message> msgs{
        Hello{1, 2, 0xDEADBEEFCAFEF00DULL},
        Welcome{2, 3, 10, 10},
        GlobalParams{4, {1.5f, -2.25f, 0.0f}},
        LocalUpdateMsg{4, 1, {3.0f, 1e-7f}, 0.25f},
        RoundAbort{7, "client 1 failed: out of memory"},
        Done{10},
    };
    for (const auto& m : msgs) CHECK(roundtrip(m) == m);
  }

  TEST_CASE("frame sizes match the byte budget") {
    const std::vector<float> p(1000, 1.0f);
    CHECK(encode(GlobalParams{1, p}).size() == kFrameHeader + 8 + 4000);
    CHECK(encode(LocalUpdateMsg{1, 0, p, 0}).size() == kFrameHeader + 16 + 4000);
    CHECK(round_bytes_per_client(370246) == 8 * 370246ull + 34);
  }

  TEST_CASE("malformed payloads are rejected") {
    auto frame = encode(Hello{});
    frame[kFrameHeader] = 'X';
    CHECK_THROWS_AS(decode(frame[4], std::span<const std::uint8_t>(frame).subspan(kFrameHeader)),
                    ProtocolError);
    const std::vector<std::uint8_t> empty;
    CHECK_THROWS_AS(decode(0x07, empty), ProtocolError);
    CHECK_THROWS_AS(decode(0x00, empty), ProtocolError);
    CHECK_THROWS_AS(decode(0x06, empty), ProtocolError);
    // A parameter message whose count disagrees with its size.
    auto g = encode(GlobalParams{1, {1, 2, 3}});
    g.push_back(0);
    CHECK_THROWS_AS(decode(g[4], std::span<const std::uint8_t>(g).subspan(kFrameHeader)), ProtocolError);
    auto u = encode(LocalUpdateMsg{1, 0, {1, 2}, 0});
    u.pop_back();
    CHECK_THROWS_AS(decode(u[4], std::span<const std::uint8_t>(u).subspan(kFrameHeader)), ProtocolError);
  }

  TEST_CASE("only the six message types exist") {
    const std::vector<std::uint8_t> junk(64, 0);
    int accepted = 0;
    for (int t = 0; t < 256; ++t) {
      try {
        decode(static_cast<std::uint8_t>(t), junk);
        ++accepted;
      } catch (const ProtocolError&) {
      }
      // A type is known iff it names itself.
      if (t >= 1 && t <= 6) CHECK(type_name(static_cast<MessageType>(t)).find("0x") == std::string::npos);
    }
    // No type accepts 64 zero bytes: fixed layouts disagree in size, vector
    // counts disagree with the remainder, and reasons must be printable.
    CHECK(accepted == 0);
  }

  TEST_CASE("abort reasons are short printable text") {
    const std::string binary("\x01\x02ok\xff", 5);
    const auto m = roundtrip(RoundAbort{3, binary});
    CHECK(std::get<RoundAbort>(m).reason == "??ok?");
    const auto long_reason = roundtrip(RoundAbort{3, std::string(1000, 'x')});
    CHECK(std::get<RoundAbort>(long_reason).reason.size() == kMaxReason);

    std::vector<std::uint8_t> payload{1, 0, 0, 0, 'o', 'k', 0x00};
    CHECK_THROWS_AS(decode(0x05, payload), ProtocolError);
    payload.assign(4 + kMaxReason + 1, 'a');
    CHECK_THROWS_AS(decode(0x05, payload), ProtocolError);
  }
}

TEST_SUITE("wire federation") {
  TEST_CASE("loopback run matches in-process training bit for bit") {
    const auto cfg = wire_config();
    std::vector<std::vector<WindowSample>> ds;
    for (std::size_t n = 0; n < 3; ++n) ds.push_back(client_windows(n));
    const auto local = run_federated(cfg, ds);

    ServerRun server(cfg, ServeOptions{});
    std::vector<std::future<JoinResult>> joins;
    for (std::uint32_t n = 0; n < 3; ++n) {
      auto data = std::make_shared<const std::vector<WindowSample>>(ds[n]);
      joins.push_back(std::async(std::launch::async,
                                 [&, n, data] { return join(cfg, n, data, at(server.port)); }));
    }
    std::vector<JoinResult> jr;
    for (auto& j : joins) jr.push_back(j.get());
    const auto remote = server.result.get();

    CHECK(bit_equal(remote.params.values, local.params.values));
    REQUIRE(remote.rounds.size() == 2);
    const std::uint64_t p = remote.params.size();
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t n = 0; n < 3; ++n) {
        const auto& c = remote.rounds[r].clients[n];
        CHECK(c.loss == local.rounds[r].clients[n].loss);
        CHECK(c.loss == jr[n].losses[r]);
        CHECK(c.bytes_sent + c.bytes_received == round_bytes_per_client(p));
      }
    }
    for (const auto& j : jr) CHECK(j.rounds == 2);
  }

  TEST_CASE("traffic never carries a slice of any client's data") {
    const auto cfg = wire_config();
    std::mutex mu;
    std::vector<std::uint8_t> traffic;
    auto tap = [&](Direction, std::span<const std::uint8_t> b) {
      std::lock_guard<std::mutex> lock(mu);
      traffic.insert(traffic.end(), b.begin(), b.end());
    };
    ServeOptions so;
    so.tap = tap;
    ServerRun server(cfg, so);
    std::vector<std::future<JoinResult>> joins;
    std::vector<std::vector<std::uint8_t>> raw;
    for (std::uint32_t n = 0; n < 3; ++n) {
      auto data = std::make_shared<const std::vector<WindowSample>>(client_windows(n));
      raw.push_back(encode_dataset({dataset().appliance_names, 126, *data}));
      JoinOptions jo = at(server.port);
      jo.tap = tap;
      joins.push_back(std::async(std::launch::async, [&, n, data, jo] { return join(cfg, n, data, jo); }));
    }
    for (auto& j : joins) j.get();
    server.result.get();
    REQUIRE(traffic.size() > 0);

    // Index every 64-byte slice of the serialized datasets (header skipped),
    // then scan the captured stream with a rolling hash.
    constexpr std::size_t kSlice = 64;
    constexpr std::uint64_t kBase = 1000003;
    std::uint64_t top = 1;
    for (std::size_t i = 1; i < kSlice; ++i) top *= kBase;
    auto hash_of = [&](const std::uint8_t* p) {
      std::uint64_t h = 0;
      for (std::size_t i = 0; i < kSlice; ++i) h = h * kBase + p[i];
      return h;
    };
    std::unordered_set<std::uint64_t> index;
    for (const auto& r : raw) {
      const std::size_t header = 64;
      for (std::size_t i = header; i + kSlice <= r.size(); ++i) index.insert(hash_of(r.data() + i));
    }
    std::size_t hits = 0;
    if (traffic.size() >= kSlice) {
      std::uint64_t h = hash_of(traffic.data());
      for (std::size_t i = 0;; ++i) {
        if (index.count(h)) {
          for (const auto& r : raw) {
            for (std::size_t j = 64; j + kSlice <= r.size(); ++j) {
              if (std::memcmp(r.data() + j, traffic.data() + i, kSlice) == 0) ++hits;
            }
          }
        }
        if (i + kSlice >= traffic.size()) break;
        h = (h - traffic[i] * top) * kBase + traffic[i + kSlice];
      }
    }
    CHECK(hits == 0);
  }

  TEST_CASE("registration is guarded") {
    auto cfg = wire_config();
    cfg.clients = 1;
    cfg.global_rounds = 1;
    ServerRun server(cfg, ServeOptions{});

    // Wrong magic.
    {
      Connection c = connect_to("127.0.0.1", server.port);
      auto frame = encode(Hello{1, 0, cfg.hash()});
      frame[kFrameHeader] = 'Z';
      c.send_raw(frame);
      const auto reply = c.receive();
      REQUIRE(std::holds_alternative<RoundAbort>(reply));
      CHECK(std::get<RoundAbort>(reply).reason.find("handshake rejected") != std::string::npos);
      CHECK_THROWS_AS(c.receive(), ProtocolError);
    }
    // Different hyperparameters.
    {
      auto other = cfg;
      other.eta = 5e-4f;
      auto data = std::make_shared<const std::vector<WindowSample>>(client_windows(0, 8));
      try {
        join(other, 0, data, at(server.port));
        FAIL("join should have been rejected");
      } catch (const ProtocolError& e) {
        CHECK(std::string(e.what()).find("config mismatch") != std::string::npos);
      }
    }
    // Out-of-range id is caught before connecting.
    CHECK_THROWS_AS(join(cfg, 3, std::make_shared<const std::vector<WindowSample>>(), at(server.port)),
                    ConfigError);

    // The rightful client registers by hand so the knock lands while it is
    // still mid-round.
    Connection good = connect_to("127.0.0.1", server.port);
    good.send(Hello{kProtocolVersion, 0, cfg.hash()});
    REQUIRE(std::holds_alternative<Welcome>(good.receive()));
    {
      Connection c = connect_to("127.0.0.1", server.port);
      c.send(Hello{kProtocolVersion, 0, cfg.hash()});
      const auto reply = c.receive();
      REQUIRE(std::holds_alternative<RoundAbort>(reply));
      CHECK(std::get<RoundAbort>(reply).reason == "federation full");
    }
    const auto g = good.receive();
    REQUIRE(std::holds_alternative<GlobalParams>(g));
    const auto& gp = std::get<GlobalParams>(g);
    good.send(LocalUpdateMsg{gp.round, 0, gp.values, 0.5f});
    const auto done = good.receive();
    REQUIRE(std::holds_alternative<Done>(done));
    CHECK(std::get<Done>(done).total_rounds == 1);
    CHECK(server.result.get().rounds.size() == 1);
  }

  TEST_CASE("a client that vanishes mid-round aborts everyone") {
    auto cfg = wire_config();
    cfg.clients = 2;
    ServerRun server(cfg, ServeOptions{});
    auto data = std::make_shared<const std::vector<WindowSample>>(client_windows(0, 32));
    auto survivor = std::async(std::launch::async, [&] { return join(cfg, 0, data, at(server.port)); });
    {
      Connection c = connect_to("127.0.0.1", server.port);
      c.send(Hello{kProtocolVersion, 1, cfg.hash()});
      REQUIRE(std::holds_alternative<Welcome>(c.receive()));
      REQUIRE(std::holds_alternative<GlobalParams>(c.receive()));
    }  // closed without answering
    try {
      survivor.get();
      FAIL("survivor should see the abort");
    } catch (const ProtocolError& e) {
      MESSAGE("survivor saw: " << e.what());
    }
    CHECK_THROWS_AS(server.result.get(), ProtocolError);
  }
}

TEST_SUITE("wire sessions") {
  TEST_CASE("an update of the wrong size aborts the round") {
    auto cfg = wire_config();
    cfg.clients = 1;
    ServerRun server(cfg, ServeOptions{});
    Connection c = connect_to("127.0.0.1", server.port);
    c.send(Hello{kProtocolVersion, 0, cfg.hash()});
    REQUIRE(std::holds_alternative<Welcome>(c.receive()));
    const auto g = c.receive();
    REQUIRE(std::holds_alternative<GlobalParams>(g));
    // A window-shaped payload instead of the model's parameters.
    c.send(LocalUpdateMsg{1, 0, std::vector<float>(126, 0.5f), 0.0f});
    const auto reply = c.receive();
    REQUIRE(std::holds_alternative<RoundAbort>(reply));
    CHECK(std::get<RoundAbort>(reply).reason.find("126 values") != std::string::npos);
    CHECK_THROWS_AS(server.result.get(), ProtocolError);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip and corruption") {
    FederationConfig cfg;
    NilmModel<float> m(cfg.initial_model());
    const Checkpoint ck{m.config(), m.flatten_params(), 431.25};
    const auto bytes = encode_checkpoint(ck);
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back.model == ck.model);
    CHECK(back.mean_w == 431.25);
    CHECK(bit_equal(back.params.values, ck.params.values));
    CHECK(*back.params.layout == *ck.params.layout);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), DataError);
    auto short_ = bytes;
    short_.resize(bytes.size() - 1);
    CHECK_THROWS_AS(decode_checkpoint(short_), DataError);
  }
}
