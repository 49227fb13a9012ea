#pragma once

#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "pqfl/channel/channel.hpp"
#include "pqfl/channel/tcp.hpp"
#include "pqfl/protocol/runner.hpp"

namespace pqfl::protocol {

struct TcpOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 = ephemeral
  std::size_t max_frame = channel::kDefaultMaxFrame;
};

// Server and clients talk over loopback TCP, one connection and one thread per
// client. On connect each client sends a signed key announcement that must
// match the registry. Each round the server writes the broadcast frames and an
// empty end marker to every client; clients answer with their update frames
// and an end marker. Channel attacks apply on the server side, downlink before
// sending and uplink after receiving, in ascending client order.
class TcpTransport final : public Transport {
 public:
  TcpTransport(std::vector<ClientState>& clients, channel::Channel& channel,
               std::shared_ptr<const KeyRegistry> registry, TcpOptions options = {});
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  Exchange exchange(std::uint32_t round, const Bytes& model_envelope) override;
  std::uint16_t port() const { return port_; }

 private:
  void client_main(std::size_t index);
  void shutdown();
  [[noreturn]] void rethrow_client_failure(const std::exception_ptr& fallback);

  std::vector<ClientState>& clients_;
  channel::Channel& channel_;
  TcpOptions options_;
  std::uint16_t port_ = 0;
  std::vector<channel::Socket> connections_;  // indexed like clients_
  std::vector<std::thread> threads_;

  std::mutex mu_;
  std::vector<ClientReport> reports_;
  std::exception_ptr client_error_;
};

}  // namespace pqfl::protocol
