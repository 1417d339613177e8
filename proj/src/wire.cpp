#include "fednilm/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <optional>
#include <thread>

#include "fednilm/bytes.hpp"
#include "fednilm/error.hpp"
#include "fednilm/log.hpp"

namespace fednilm::wire {

namespace {

std::string errno_text() { return std::strerror(errno); }

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> v) {
  const std::size_t at = out.size();
  out.resize(at + 4 * v.size());
  std::uint8_t* p = out.data() + at;
  for (float f : v) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    p[0] = static_cast<std::uint8_t>(u);
    p[1] = static_cast<std::uint8_t>(u >> 8);
    p[2] = static_cast<std::uint8_t>(u >> 16);
    p[3] = static_cast<std::uint8_t>(u >> 24);
    p += 4;
  }
}

std::vector<float> take_floats(bytes::Reader<ProtocolError>& in, std::size_t n) {
  const auto raw = in.take(4 * n);
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = raw.data() + 4 * i;
    v[i] = std::bit_cast<float>(static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
                                static_cast<std::uint32_t>(p[2]) << 16 |
                                static_cast<std::uint32_t>(p[3]) << 24);
  }
  return v;
}

void expect_exact(const bytes::Reader<ProtocolError>& in, MessageType t) {
  if (in.remaining() != 0) {
    throw ProtocolError(type_name(t) + " payload has " + std::to_string(in.remaining()) +
                        " trailing bytes");
  }
}

}  // namespace

std::string printable_reason(std::string_view reason) {
  std::string out(reason.substr(0, kMaxReason));
  for (char& c : out) {
    if (c < 0x20 || c > 0x7e) c = '?';
  }
  return out;
}

MessageType type_of(const Message& m) {
  return std::visit(Overloaded{[](const Hello&) { return MessageType::kHello; },
                               [](const Welcome&) { return MessageType::kWelcome; },
                               [](const GlobalParams&) { return MessageType::kGlobalParams; },
                               [](const LocalUpdateMsg&) { return MessageType::kLocalUpdate; },
                               [](const RoundAbort&) { return MessageType::kRoundAbort; },
                               [](const Done&) { return MessageType::kDone; }},
                    m);
}

std::string type_name(MessageType t) {
  switch (t) {
    case MessageType::kHello: return "HELLO";
    case MessageType::kWelcome: return "WELCOME";
    case MessageType::kGlobalParams: return "GLOBAL_PARAMS";
    case MessageType::kLocalUpdate: return "LOCAL_UPDATE";
    case MessageType::kRoundAbort: return "ROUND_ABORT";
    case MessageType::kDone: return "DONE";
  }
  return "type 0x" + std::to_string(static_cast<int>(t));
}

std::vector<std::uint8_t> encode(const Message& m) {
  std::vector<std::uint8_t> out(kFrameHeader, 0);
  std::visit(Overloaded{[&](const Hello& h) {
                          bytes::put_raw(out, std::string_view(kMagic, 4));
                          bytes::put_le(out, h.version);
                          bytes::put_le(out, h.client_id);
                          bytes::put_le(out, h.config_hash);
                        },
                        [&](const Welcome& w) {
                          bytes::put_le(out, w.client_index);
                          bytes::put_le(out, w.clients);
                          bytes::put_le(out, w.global_rounds);
                          bytes::put_le(out, w.local_epochs);
                        },
                        [&](const GlobalParams& g) {
                          bytes::put_le(out, g.round);
                          bytes::put_le(out, static_cast<std::uint32_t>(g.values.size()));
                          put_floats(out, g.values);
                        },
                        [&](const LocalUpdateMsg& u) {
                          bytes::put_le(out, u.round);
                          bytes::put_le(out, u.client_id);
                          bytes::put_le(out, static_cast<std::uint32_t>(u.values.size()));
                          put_floats(out, u.values);
                          bytes::put_f32(out, u.loss);
                        },
                        [&](const RoundAbort& a) {
                          bytes::put_le(out, a.round);
                          bytes::put_raw(out, printable_reason(a.reason));
                        },
                        [&](const Done& d) { bytes::put_le(out, d.total_rounds); }},
             m);
  const std::size_t payload = out.size() - kFrameHeader;
  if (payload > kMaxPayload) throw ProtocolError("message exceeds the maximum frame size");
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(payload >> (8 * (3 - i)));
  out[4] = static_cast<std::uint8_t>(type_of(m));
  return out;
}

Message decode(std::uint8_t type, std::span<const std::uint8_t> payload) {
  bytes::Reader<ProtocolError> in(payload);
  const auto t = static_cast<MessageType>(type);
  switch (t) {
    case MessageType::kHello: {
      if (in.str(4) != std::string_view(kMagic, 4)) throw ProtocolError("bad magic in HELLO");
      Hello h;
      h.version = in.le<std::uint16_t>();
      h.client_id = in.le<std::uint32_t>();
      h.config_hash = in.le<std::uint64_t>();
      expect_exact(in, t);
      return h;
    }
    case MessageType::kWelcome: {
      Welcome w;
      w.client_index = in.le<std::uint32_t>();
      w.clients = in.le<std::uint32_t>();
      w.global_rounds = in.le<std::uint32_t>();
      w.local_epochs = in.le<std::uint32_t>();
      expect_exact(in, t);
      return w;
    }
    case MessageType::kGlobalParams: {
      GlobalParams g;
      g.round = in.le<std::uint32_t>();
      const std::uint32_t n = in.le<std::uint32_t>();
      if (in.remaining() != 4ull * n) throw ProtocolError("GLOBAL_PARAMS count disagrees with its size");
      g.values = take_floats(in, n);
      return g;
    }
    case MessageType::kLocalUpdate: {
      LocalUpdateMsg u;
      u.round = in.le<std::uint32_t>();
      u.client_id = in.le<std::uint32_t>();
      const std::uint32_t n = in.le<std::uint32_t>();
      if (in.remaining() != 4ull * n + 4) throw ProtocolError("LOCAL_UPDATE count disagrees with its size");
      u.values = take_floats(in, n);
      u.loss = in.f32();
      return u;
    }
    case MessageType::kRoundAbort: {
      RoundAbort a;
      a.round = in.le<std::uint32_t>();
      if (in.remaining() > kMaxReason) throw ProtocolError("ROUND_ABORT reason exceeds the length limit");
      a.reason = in.str(in.remaining());
      for (char c : a.reason) {
        if (c < 0x20 || c > 0x7e) throw ProtocolError("ROUND_ABORT reason is not printable text");
      }
      return a;
    }
    case MessageType::kDone: {
      Done d;
      d.total_rounds = in.le<std::uint32_t>();
      expect_exact(in, t);
      return d;
    }
  }
  throw ProtocolError("unknown message type 0x" + std::to_string(type));
}

// --- sockets -------------------------------------------------------------------

Connection::Connection(int fd, TrafficTap tap) : fd_(fd), tap_(std::move(tap)) {
  if (fd_ >= 0) {
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
}

Connection::Connection(Connection&& other) noexcept : fd_(other.fd_), tap_(std::move(other.tap_)) {
  other.fd_ = -1;
}

Connection& Connection::operator=(Connection&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    tap_ = std::move(other.tap_);
    other.fd_ = -1;
  }
  return *this;
}

Connection::~Connection() { close(); }

void Connection::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Connection::send_raw(std::span<const std::uint8_t> data) {
  if (fd_ < 0) throw ProtocolError("send on a closed connection");
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + done, data.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError("send failed: " + errno_text());
    }
    done += static_cast<std::size_t>(n);
  }
  if (tap_) tap_(Direction::kSent, data);
}

std::size_t Connection::send(const Message& m) {
  const auto frame = encode(m);
  send_raw(frame);
  return frame.size();
}

void Connection::read_exact(std::uint8_t* dst, std::size_t n) {
  std::size_t done = 0;
  while (done < n) {
    const ssize_t r = ::recv(fd_, dst + done, n - done, 0);
    if (r == 0) throw ProtocolError("peer closed the connection");
    if (r < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw ProtocolError("receive timed out");
      throw ProtocolError("receive failed: " + errno_text());
    }
    done += static_cast<std::size_t>(r);
  }
}

Message Connection::receive(std::size_t* frame_bytes) {
  if (fd_ < 0) throw ProtocolError("receive on a closed connection");
  std::vector<std::uint8_t> frame(kFrameHeader);
  read_exact(frame.data(), kFrameHeader);
  const std::uint32_t len = static_cast<std::uint32_t>(frame[0]) << 24 |
                            static_cast<std::uint32_t>(frame[1]) << 16 |
                            static_cast<std::uint32_t>(frame[2]) << 8 | frame[3];
  if (len > kMaxPayload) throw ProtocolError("frame length " + std::to_string(len) + " exceeds the limit");
  frame.resize(kFrameHeader + len);
  read_exact(frame.data() + kFrameHeader, len);
  if (tap_) tap_(Direction::kReceived, frame);
  if (frame_bytes) *frame_bytes = frame.size();
  return decode(frame[4], std::span<const std::uint8_t>(frame).subspan(kFrameHeader));
}

namespace {

void set_receive_timeout(int fd, std::chrono::milliseconds t) {
  timeval tv{};
  if (t.count() > 0) {
    tv.tv_sec = static_cast<time_t>(t.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((t.count() % 1000) * 1000);
  }
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res);
  if (rc != 0) throw ProtocolError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  return res;
}

}  // namespace

Listener::Listener(const std::string& host, std::uint16_t port) {
  addrinfo* res = resolve(host, port, true);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    ::freeaddrinfo(res);
    throw ProtocolError("socket failed: " + errno_text());
  }
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd_, 64) != 0) {
    const std::string why = errno_text();
    ::freeaddrinfo(res);
    close();
    throw ProtocolError("cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
  }
  ::freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

Listener::Listener(Listener&& o) noexcept : fd_(o.fd_), port_(o.port_) { o.fd_ = -1; }

Listener& Listener::operator=(Listener&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    port_ = o.port_;
    o.fd_ = -1;
  }
  return *this;
}

Listener::~Listener() { close(); }

void Listener::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

int Listener::accept_fd(std::chrono::milliseconds timeout) {
  pollfd p{fd_, POLLIN, 0};
  const int rc = ::poll(&p, 1, timeout.count() < 0 ? -1 : static_cast<int>(timeout.count()));
  if (rc <= 0) return -1;
  return ::accept(fd_, nullptr, nullptr);
}

Connection connect_to(const std::string& host, std::uint16_t port, TrafficTap tap,
                      std::chrono::milliseconds retry_for) {
  const auto deadline = std::chrono::steady_clock::now() + retry_for;
  while (true) {
    addrinfo* res = resolve(host, port, false);
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
      ::freeaddrinfo(res);
      throw ProtocolError("socket failed: " + errno_text());
    }
    const int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
    const int err = errno;
    ::freeaddrinfo(res);
    if (rc == 0) return Connection(fd, std::move(tap));
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      throw ProtocolError("cannot connect to " + host + ":" + std::to_string(port) + ": " +
                          std::strerror(err));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

// --- server --------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

void reject(Connection& c, std::uint32_t round, const std::string& reason) {
  try {
    c.send(RoundAbort{round, reason});
  } catch (const ProtocolError&) {
  }
  c.close();
}

// Answers every late registration with ROUND_ABORT until stopped.
class LateRejector {
 public:
  LateRejector(Listener& l, TrafficTap tap) : listener_(l), tap_(std::move(tap)) {
    thread_ = std::thread([this] {
      while (!stop_) {
        const int fd = listener_.accept_fd(std::chrono::milliseconds(100));
        if (fd < 0) continue;
        Connection c(fd, tap_);
        logger().warn("rejecting registration: federation already full");
        reject(c, 0, "federation full");
      }
    });
  }
  ~LateRejector() {
    stop_ = true;
    thread_.join();
  }

 private:
  Listener& listener_;
  TrafficTap tap_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

std::vector<Connection> register_clients(const FederationConfig& config, Listener& listener,
                                         const ServeOptions& options) {
  std::vector<std::optional<Connection>> slots(config.clients);
  std::size_t registered = 0;
  const auto deadline = Clock::now() + options.registration_timeout;
  const std::uint64_t hash = config.hash();
  while (registered < config.clients) {
    std::chrono::milliseconds wait(-1);
    if (options.registration_timeout.count() >= 0) {
      wait = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (wait.count() <= 0) {
        throw ProtocolError("only " + std::to_string(registered) + " of " +
                            std::to_string(config.clients) + " clients registered before the timeout");
      }
    }
    const int fd = listener.accept_fd(wait);
    if (fd < 0) continue;
    Connection c(fd, options.tap);
    set_receive_timeout(fd, std::chrono::seconds(10));
    Hello hello;
    try {
      const Message m = c.receive();
      if (!std::holds_alternative<Hello>(m)) {
        reject(c, 0, "expected HELLO, got " + type_name(type_of(m)));
        continue;
      }
      hello = std::get<Hello>(m);
    } catch (const ProtocolError& e) {
      logger().warn("handshake rejected: {}", e.what());
      reject(c, 0, std::string("handshake rejected: ") + e.what());
      continue;
    }
    if (hello.version != kProtocolVersion) {
      reject(c, 0, "version mismatch: server speaks " + std::to_string(kProtocolVersion) +
                       ", client " + std::to_string(hello.version));
      continue;
    }
    if (hello.config_hash != hash) {
      logger().warn("client {} rejected: config mismatch", hello.client_id);
      reject(c, 0, "config mismatch");
      continue;
    }
    if (hello.client_id >= config.clients) {
      reject(c, 0, "client id " + std::to_string(hello.client_id) + " outside [0, " +
                       std::to_string(config.clients) + ")");
      continue;
    }
    if (slots[hello.client_id]) {
      reject(c, 0, "client id " + std::to_string(hello.client_id) + " already registered");
      continue;
    }
    c.send(Welcome{hello.client_id, static_cast<std::uint32_t>(config.clients),
                   static_cast<std::uint32_t>(config.global_rounds),
                   static_cast<std::uint32_t>(config.local_epochs)});
    set_receive_timeout(fd, std::chrono::milliseconds(0));
    slots[hello.client_id] = std::move(c);
    ++registered;
    logger().info("client {} registered ({}/{})", hello.client_id, registered, config.clients);
  }
  std::vector<Connection> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

[[noreturn]] void abort_round(std::vector<Connection>& clients, std::uint32_t round,
                              const std::string& reason) {
  logger().error("round {} aborted: {}", round, reason);
  for (auto& c : clients) {
    if (c.open()) reject(c, round, reason);
  }
  throw ProtocolError("round " + std::to_string(round) + " aborted: " + reason);
}

}  // namespace

TrainingResult serve(const FederationConfig& config, const ServeOptions& options) {
  config.validate();
  Listener listener(options.host, options.port);
  if (options.on_listening) options.on_listening(listener.port());
  std::vector<Connection> clients = register_clients(config, listener, options);
  LateRejector rejector(listener, options.tap);

  NilmModel<float> evaluator(config.initial_model());
  TrainingResult result{evaluator.flatten_params(), {}};
  const std::size_t param_count = result.params.size();
  const auto start = Clock::now();

  for (std::size_t r = 1; r <= config.global_rounds; ++r) {
    const auto round = static_cast<std::uint32_t>(r);
    RoundReport report;
    report.round = r;
    const auto round_start = Clock::now();
    const auto frame = encode(GlobalParams{round, result.params.values});
    report.clients.resize(clients.size());
    for (std::size_t n = 0; n < clients.size(); ++n) {
      report.clients[n].client_id = static_cast<std::uint32_t>(n);
      try {
        clients[n].send_raw(frame);
      } catch (const ProtocolError& e) {
        clients[n].close();
        abort_round(clients, round, "client " + std::to_string(n) + ": " + e.what());
      }
      report.clients[n].bytes_sent = frame.size();
    }

    // Server-side buffer of received updates; its capacity is B_G >= N.
    std::vector<LocalUpdate> buffer;
    buffer.reserve(config.global_batch);
    std::vector<bool> pending(clients.size(), true);
    std::size_t remaining = clients.size();
    while (remaining > 0) {
      std::vector<pollfd> fds;
      std::vector<std::size_t> owner;
      for (std::size_t n = 0; n < clients.size(); ++n) {
        if (!pending[n]) continue;
        fds.push_back({clients[n].fd(), POLLIN, 0});
        owner.push_back(n);
      }
      if (::poll(fds.data(), fds.size(), -1) < 0) {
        if (errno == EINTR) continue;
        abort_round(clients, round, "poll failed: " + errno_text());
      }
      for (std::size_t k = 0; k < fds.size(); ++k) {
        if (fds[k].revents == 0) continue;
        const std::size_t n = owner[k];
        std::size_t got = 0;
        Message m;
        try {
          m = clients[n].receive(&got);
        } catch (const ProtocolError& e) {
          clients[n].close();
          abort_round(clients, round, "client " + std::to_string(n) + ": " + e.what());
        }
        if (const auto* a = std::get_if<RoundAbort>(&m)) {
          clients[n].close();
          abort_round(clients, round, "client " + std::to_string(n) + " failed: " + a->reason);
        }
        const auto* u = std::get_if<LocalUpdateMsg>(&m);
        if (!u) {
          abort_round(clients, round, "client " + std::to_string(n) + " sent " +
                                          type_name(type_of(m)) + " instead of LOCAL_UPDATE");
        }
        if (u->round != round || u->client_id != n || u->values.size() != param_count) {
          abort_round(clients, round, "client " + std::to_string(n) + " sent an update for round " +
                                          std::to_string(u->round) + " as client " +
                                          std::to_string(u->client_id) + " with " +
                                          std::to_string(u->values.size()) + " values");
        }
        report.clients[n].loss = u->loss;
        report.clients[n].bytes_received = got;
        buffer.push_back({u->client_id, ParamVector<float>{result.params.layout, u->values}, u->loss, 0});
        pending[n] = false;
        --remaining;
      }
    }
    report.train_seconds = seconds_since(round_start);
    const auto agg_start = Clock::now();
    result.params = fedavg(std::span<const LocalUpdate>(buffer));
    report.aggregation_seconds = seconds_since(agg_start);
    report.elapsed_seconds = seconds_since(start);
    if (!options.training.validation.empty()) {
      evaluator.load_params(result.params);
      report.validation = score_windows(evaluator, options.training.validation);
    }
    logger().info("round {}/{} aggregated", r, config.global_rounds);
    if (options.training.on_round) options.training.on_round(report, result.params);
    result.rounds.push_back(std::move(report));
  }
  for (auto& c : clients) {
    try {
      c.send(Done{static_cast<std::uint32_t>(config.global_rounds)});
    } catch (const ProtocolError& e) {
      logger().warn("DONE not delivered: {}", e.what());
    }
  }
  return result;
}

// --- client --------------------------------------------------------------------

JoinResult join(const FederationConfig& config, std::uint32_t client_id,
                std::shared_ptr<const std::vector<WindowSample>> data, const JoinOptions& options) {
  config.validate();
  if (client_id >= config.clients) {
    throw ConfigError("client id " + std::to_string(client_id) + " outside [0, " +
                      std::to_string(config.clients) + ")");
  }
  Connection conn = connect_to(options.host, options.port, options.tap, options.connect_retry_for);
  conn.send(Hello{kProtocolVersion, client_id, config.hash()});
  const Message first = conn.receive();
  if (const auto* a = std::get_if<RoundAbort>(&first)) throw ProtocolError("server rejected registration: " + a->reason);
  const auto* w = std::get_if<Welcome>(&first);
  if (!w) throw ProtocolError("expected WELCOME, got " + type_name(type_of(first)));
  if (w->client_index != client_id || w->clients != config.clients ||
      w->global_rounds != config.global_rounds || w->local_epochs != config.local_epochs) {
    throw ProtocolError("WELCOME disagrees with the local configuration");
  }

  ClientState state(config, client_id, std::move(data));
  const auto layout = state.model.layout();
  JoinResult result;
  while (true) {
    const Message m = conn.receive();
    if (const auto* g = std::get_if<GlobalParams>(&m)) {
      if (g->values.size() != layout->total_size()) {
        throw ProtocolError("GLOBAL_PARAMS carries " + std::to_string(g->values.size()) +
                            " values, model has " + std::to_string(layout->total_size()));
      }
      LocalUpdate u;
      try {
        u = households_update(state, ParamVector<float>{layout, g->values}, config);
      } catch (const Error& e) {
        conn.send(RoundAbort{g->round, e.what()});
        throw;
      }
      conn.send(LocalUpdateMsg{g->round, client_id, std::move(u.params.values), u.mean_loss});
      result.losses.push_back(u.mean_loss);
      ++result.rounds;
      continue;
    }
    if (const auto* d = std::get_if<Done>(&m)) {
      if (d->total_rounds != result.rounds) {
        throw ProtocolError("DONE after " + std::to_string(d->total_rounds) + " rounds, client ran " +
                            std::to_string(result.rounds));
      }
      return result;
    }
    if (const auto* a = std::get_if<RoundAbort>(&m)) {
      throw ProtocolError("server aborted round " + std::to_string(a->round) + ": " + a->reason);
    }
    throw ProtocolError("unexpected " + type_name(type_of(m)) + " from server");
  }
}

}  // namespace fednilm::wire
