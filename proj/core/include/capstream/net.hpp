#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace capstream {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7171;

  std::string to_string() const { return host + ":" + std::to_string(port); }
  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

/// Parses "host:port"; throws a config error on malformed input.
Endpoint parse_endpoint(std::string_view text);

/// Connected TCP stream socket with buffered line reads.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  bool valid() const noexcept { return fd_ >= 0; }
  int fd() const noexcept { return fd_; }
  void close() noexcept;

  /// Writes every byte; throws an I/O error when the peer is gone.
  void send_all(std::string_view data);

  /// Reads up to the next '\n' (stripped, along with a trailing '\r').
  /// Returns false at end of stream; a final unterminated line is returned first.
  bool read_line(std::string& line);

 private:
  int fd_ = -1;
  std::string buffer_;
  bool eof_ = false;
};

/// Throws an I/O error when the endpoint cannot be reached within `timeout`.
Socket connect_to(const Endpoint& ep, std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

/// Listening TCP socket. Port 0 binds an ephemeral port, reported by port().
class Listener {
 public:
  explicit Listener(const Endpoint& ep);
  Listener(Listener&& other) noexcept;
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;
  ~Listener();

  std::uint16_t port() const noexcept { return port_; }

  /// Blocks until a client connects; returns nothing after `timeout` when given.
  std::optional<Socket> accept(std::optional<std::chrono::milliseconds> timeout = std::nullopt);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace capstream
