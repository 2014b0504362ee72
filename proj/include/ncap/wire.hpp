#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace ncap::wire {

/// Schema version shared by the planner and render bridges.
constexpr int kProtocolVersion = 1;
constexpr std::size_t kMaxFrameBytes = 64u << 20;

using Clock = std::chrono::steady_clock;

/// Bidirectional, ordered byte stream.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void write_all(std::span<const std::uint8_t> data) = 0;
  /// Fills `out` completely or throws TransportError at `deadline`.
  virtual void read_exact(std::span<std::uint8_t> out, Clock::time_point deadline) = 0;
  virtual void close() = 0;
};

class TcpStream : public ByteStream {
 public:
  explicit TcpStream(int fd);
  ~TcpStream() override;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  static std::unique_ptr<TcpStream> connect(const std::string& host, std::uint16_t port,
                                            std::chrono::milliseconds timeout);

  void write_all(std::span<const std::uint8_t> data) override;
  void read_exact(std::span<std::uint8_t> out, Clock::time_point deadline) override;
  void close() override;

 private:
  int fd_;
};

class TcpListener {
 public:
  /// Binds to 127.0.0.1 or the given host; port 0 picks an ephemeral port.
  explicit TcpListener(std::uint16_t port = 0, const std::string& host = "127.0.0.1");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<TcpStream> accept(std::chrono::milliseconds timeout);
  void close();

 private:
  int fd_;
  std::uint16_t port_{0};
};

/// Connected in-process stream pair.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_pipe();

/// 4-byte big-endian length followed by the payload.
std::vector<std::uint8_t> encode_frame(const std::string& payload);

void send_frame(ByteStream& stream, const std::string& payload);
std::string recv_frame(ByteStream& stream, std::chrono::milliseconds timeout);

/// Compact JSON body with sorted keys; the byte representation is stable.
std::string dump_message(const nlohmann::json& msg);

void send_message(ByteStream& stream, const nlohmann::json& msg);
/// Throws ProtocolError on undecodable JSON or a missing "type" field.
nlohmann::json recv_message(ByteStream& stream, std::chrono::milliseconds timeout);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Parses "tcp://host:port" or "host:port".
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint);

}  // namespace ncap::wire
