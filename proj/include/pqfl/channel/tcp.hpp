#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string>

#include "pqfl/bytes.hpp"
#include "pqfl/codec/codec.hpp"

namespace pqfl::channel {

inline constexpr std::size_t kDefaultMaxFrame = std::size_t{256} << 20;

// Owning POSIX socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release();
  void close();
  // Half-closes both directions so that a peer blocked in recv wakes up.
  void shutdown();

 private:
  int fd_ = -1;
};

class Listener {
 public:
  Listener(Socket socket, std::uint16_t port) : socket_(std::move(socket)), port_(port) {}
  std::uint16_t port() const { return port_; }
  // Throws kConnectionFailed if nobody connects within `timeout`.
  Socket accept(std::chrono::milliseconds timeout = std::chrono::seconds(30));

 private:
  Socket socket_;
  std::uint16_t port_;
};

// Port 0 binds an ephemeral port; see Listener::port().
Listener tcp_listen(const std::string& host, std::uint16_t port);
// Retries refused connections until `timeout` expires, then throws
// kConnectionFailed.
Socket tcp_connect(const std::string& host, std::uint16_t port,
                   std::chrono::milliseconds timeout = std::chrono::seconds(10));

// Frame: 4-byte big-endian length, then the bytes. A zero-length frame is
// legal and carries no payload.
void tcp_send_frame(Socket& socket, ByteView frame);
// Throws kFrameTooLarge when the announced length exceeds max_frame and
// kPeerClosed on end of stream.
Bytes tcp_recv_frame(Socket& socket, std::size_t max_frame = kDefaultMaxFrame);
// As tcp_recv_frame, then decodes; throws kDecodeError on a bad envelope.
codec::SignedEnvelope tcp_recv_envelope(Socket& socket, std::size_t max_frame = kDefaultMaxFrame);

// "host:port" -> parts. Throws kConfigError.
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint);

}  // namespace pqfl::channel
