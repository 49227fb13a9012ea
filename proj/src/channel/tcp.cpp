#include "pqfl/channel/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <thread>

#include "pqfl/error.hpp"

namespace pqfl::channel {
namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what + ": " + std::strerror(errno));
}

struct AddrInfo {
  addrinfo* head = nullptr;
  ~AddrInfo() {
    if (head != nullptr) freeaddrinfo(head);
  }
};

AddrInfo resolve(const std::string& host, std::uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = passive ? AI_PASSIVE : 0;
  AddrInfo info;
  const std::string service = std::to_string(port);
  const int rc = getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints,
                             &info.head);
  if (rc != 0) {
    throw Error(ErrorCode::kConnectionFailed,
                "cannot resolve " + host + ": " + gai_strerror(rc));
  }
  return info;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

void write_all(Socket& s, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(s.fd(), data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE || errno == ECONNRESET) throw Error(ErrorCode::kPeerClosed, "peer closed");
      fail(ErrorCode::kConnectionFailed, "send");
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

void read_all(Socket& s, std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(s.fd(), data, n, 0);
    if (r == 0) throw Error(ErrorCode::kPeerClosed, "connection closed by peer");
    if (r < 0) {
      if (errno == EINTR) continue;
      if (errno == ECONNRESET) throw Error(ErrorCode::kPeerClosed, "connection reset by peer");
      fail(ErrorCode::kConnectionFailed, "recv");
    }
    data += r;
    n -= static_cast<std::size_t>(r);
  }
}

}  // namespace

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.release();
  }
  return *this;
}

int Socket::release() {
  const int fd = fd_;
  fd_ = -1;
  return fd;
}

void Socket::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Socket Listener::accept(std::chrono::milliseconds timeout) {
  pollfd pfd{socket_.fd(), POLLIN, 0};
  const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (ready == 0) throw Error(ErrorCode::kConnectionFailed, "timed out waiting for a connection");
  if (ready < 0) fail(ErrorCode::kConnectionFailed, "poll");
  Socket s(::accept(socket_.fd(), nullptr, nullptr));
  if (!s.valid()) fail(ErrorCode::kConnectionFailed, "accept");
  set_nodelay(s.fd());
  return s;
}

Listener tcp_listen(const std::string& host, std::uint16_t port) {
  const AddrInfo info = resolve(host, port, true);
  for (addrinfo* ai = info.head; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) continue;
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(s.fd(), ai->ai_addr, ai->ai_addrlen) != 0) continue;
    if (::listen(s.fd(), SOMAXCONN) != 0) continue;
    sockaddr_storage bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
    const std::uint16_t actual =
        bound.ss_family == AF_INET6
            ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
            : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
    return Listener(std::move(s), actual);
  }
  fail(ErrorCode::kConnectionFailed, "cannot listen on " + host + ":" + std::to_string(port));
}

Socket tcp_connect(const std::string& host, std::uint16_t port,
                   std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const AddrInfo info = resolve(host, port, false);
    for (addrinfo* ai = info.head; ai != nullptr; ai = ai->ai_next) {
      Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
      if (!s.valid()) continue;
      if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
        set_nodelay(s.fd());
        return s;
      }
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      fail(ErrorCode::kConnectionFailed, "cannot connect to " + host + ":" + std::to_string(port));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

void tcp_send_frame(Socket& socket, ByteView frame) {
  if (frame.size() > 0xFFFFFFFFu) throw Error(ErrorCode::kFrameTooLarge, "frame exceeds 4 GiB");
  const auto n = static_cast<std::uint32_t>(frame.size());
  const std::uint8_t prefix[4] = {static_cast<std::uint8_t>(n >> 24),
                                  static_cast<std::uint8_t>(n >> 16),
                                  static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
  write_all(socket, prefix, 4);
  write_all(socket, frame.data(), frame.size());
}

Bytes tcp_recv_frame(Socket& socket, std::size_t max_frame) {
  std::uint8_t prefix[4];
  read_all(socket, prefix, 4);
  const std::uint32_t n = (std::uint32_t{prefix[0]} << 24) | (std::uint32_t{prefix[1]} << 16) |
                          (std::uint32_t{prefix[2]} << 8) | std::uint32_t{prefix[3]};
  if (n > max_frame) {
    throw Error(ErrorCode::kFrameTooLarge, "frame of " + std::to_string(n) +
                                               " bytes exceeds the cap of " +
                                               std::to_string(max_frame));
  }
  Bytes frame(n);
  read_all(socket, frame.data(), frame.size());
  return frame;
}

codec::SignedEnvelope tcp_recv_envelope(Socket& socket, std::size_t max_frame) {
  const Bytes frame = tcp_recv_frame(socket, max_frame);
  try {
    return codec::decode_envelope(frame);
  } catch (const Error& e) {
    throw Error(ErrorCode::kDecodeError, e.what());
  }
}

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint) {
  const std::size_t colon = endpoint.rfind(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::kConfigError, "expected host:port, got '" + endpoint + "'");
  }
  std::string host = endpoint.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') {
    host = host.substr(1, host.size() - 2);
  }
  const std::string_view port_text(endpoint.data() + colon + 1, endpoint.size() - colon - 1);
  std::uint16_t port = 0;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size()) {
    throw Error(ErrorCode::kConfigError, "bad port in '" + endpoint + "'");
  }
  return {host, port};
}

}  // namespace pqfl::channel
