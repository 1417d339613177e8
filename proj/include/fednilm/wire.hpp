#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fednilm/federation.hpp"

namespace fednilm::wire {

// Frame: [u32 BE payload length][u8 type][payload]. The length excludes the
// type byte. Parameter and loss values travel as little-endian f32.

inline constexpr char kMagic[4] = {'F', 'N', 'L', 'M'};
inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::size_t kFrameHeader = 5;
inline constexpr std::uint32_t kMaxPayload = 1u << 30;
/// ROUND_ABORT carries at most this many printable ASCII bytes of diagnostics.
inline constexpr std::size_t kMaxReason = 256;

enum class MessageType : std::uint8_t {
  kHello = 0x01,
  kWelcome = 0x02,
  kGlobalParams = 0x03,
  kLocalUpdate = 0x04,
  kRoundAbort = 0x05,
  kDone = 0x06,
};

struct Hello {
  std::uint16_t version = kProtocolVersion;
  std::uint32_t client_id = 0;
  std::uint64_t config_hash = 0;
  bool operator==(const Hello&) const = default;
};

struct Welcome {
  std::uint32_t client_index = 0;
  std::uint32_t clients = 0;
  std::uint32_t global_rounds = 0;
  std::uint32_t local_epochs = 0;
  bool operator==(const Welcome&) const = default;
};

struct GlobalParams {
  std::uint32_t round = 0;
  std::vector<float> values;
  bool operator==(const GlobalParams&) const = default;
};

struct LocalUpdateMsg {
  std::uint32_t round = 0;
  std::uint32_t client_id = 0;
  std::vector<float> values;
  float loss = 0;
  bool operator==(const LocalUpdateMsg&) const = default;
};

struct RoundAbort {
  std::uint32_t round = 0;
  std::string reason;
  bool operator==(const RoundAbort&) const = default;
};

struct Done {
  std::uint32_t total_rounds = 0;
  bool operator==(const Done&) const = default;
};

using Message = std::variant<Hello, Welcome, GlobalParams, LocalUpdateMsg, RoundAbort, Done>;

MessageType type_of(const Message& m);
/// Truncates to kMaxReason and replaces non-printable bytes with '?'.
std::string printable_reason(std::string_view reason);
std::string type_name(MessageType t);

/// Whole frame, header included.
std::vector<std::uint8_t> encode(const Message& m);
/// Payload of one frame. Throws ProtocolError on an unknown type, a bad
/// magic, or a size that disagrees with the type's grammar.
Message decode(std::uint8_t type, std::span<const std::uint8_t> payload);

/// Bytes one client exchanges per round: one GLOBAL_PARAMS frame down and one
/// LOCAL_UPDATE frame up.
constexpr std::uint64_t round_bytes_per_client(std::uint64_t param_count) {
  return (kFrameHeader + 8 + 4 * param_count) + (kFrameHeader + 16 + 4 * param_count);
}

enum class Direction { kSent, kReceived };
/// Observes every byte written to or read from a connection.
using TrafficTap = std::function<void(Direction, std::span<const std::uint8_t>)>;

/// A connected, blocking TCP stream carrying frames.
class Connection {
 public:
  explicit Connection(int fd, TrafficTap tap = {});
  Connection(Connection&& other) noexcept;
  Connection& operator=(Connection&& other) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;
  ~Connection();

  /// Returns the frame size in bytes.
  std::size_t send(const Message& m);
  /// Blocks for one frame. Throws ProtocolError on EOF or a malformed frame.
  Message receive(std::size_t* frame_bytes = nullptr);
  void send_raw(std::span<const std::uint8_t> bytes);

  int fd() const noexcept { return fd_; }
  bool open() const noexcept { return fd_ >= 0; }
  void close() noexcept;

 private:
  void read_exact(std::uint8_t* dst, std::size_t n);
  int fd_ = -1;
  TrafficTap tap_;
};

class Listener {
 public:
  /// Port 0 binds an ephemeral port; see port().
  Listener(const std::string& host, std::uint16_t port);
  Listener(Listener&&) noexcept;
  Listener& operator=(Listener&&) noexcept;
  ~Listener();

  std::uint16_t port() const noexcept { return port_; }
  int fd() const noexcept { return fd_; }
  /// Waits up to `timeout` (negative: forever); returns an invalid fd on timeout.
  int accept_fd(std::chrono::milliseconds timeout);
  void close() noexcept;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

Connection connect_to(const std::string& host, std::uint16_t port, TrafficTap tap = {},
                      std::chrono::milliseconds retry_for = std::chrono::seconds(10));

struct ServeOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  /// Called once the socket is listening, with the bound port.
  std::function<void(std::uint16_t)> on_listening;
  /// How long to wait for all N registrations (negative: forever).
  std::chrono::milliseconds registration_timeout{std::chrono::minutes(5)};
  TrafficTap tap;
  TrainingOptions training;
};

/// Server side of the federation: registers exactly N clients, then runs R_G
/// synchronous rounds. Any client failure aborts the round for everyone and
/// raises ProtocolError.
TrainingResult serve(const FederationConfig& config, const ServeOptions& options);

struct JoinOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::chrono::milliseconds connect_retry_for{std::chrono::seconds(30)};
  TrafficTap tap;
};

struct JoinResult {
  std::uint32_t rounds = 0;
  std::vector<float> losses;  // one per round
};

/// Client side: registers as `client_id`, answers every GLOBAL_PARAMS with a
/// local update, and returns on DONE. ROUND_ABORT raises ProtocolError.
JoinResult join(const FederationConfig& config, std::uint32_t client_id,
                std::shared_ptr<const std::vector<WindowSample>> data, const JoinOptions& options);

}  // namespace fednilm::wire
