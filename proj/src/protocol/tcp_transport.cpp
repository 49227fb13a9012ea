#include "pqfl/protocol/tcp_transport.hpp"

#include <utility>

#include "pqfl/error.hpp"

namespace pqfl::protocol {

using channel::Direction;

TcpTransport::TcpTransport(std::vector<ClientState>& clients, channel::Channel& channel,
                           std::shared_ptr<const KeyRegistry> registry, TcpOptions options)
    : clients_(clients), channel_(channel), options_(std::move(options)) {
  channel::Listener listener = channel::tcp_listen(options_.host, options_.port);
  port_ = listener.port();
  reports_.resize(clients_.size());
  connections_.resize(clients_.size());
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    threads_.emplace_back([this, i] { client_main(i); });
  }

  try {
    for (std::size_t n = 0; n < clients_.size(); ++n) {
      channel::Socket conn = listener.accept();
      const codec::SignedEnvelope hello = channel::tcp_recv_envelope(conn, options_.max_frame);
      const std::uint32_t id = hello.header.sender_id;
      const KeyRegistry::Entry* entry = registry->find(id);
      const bool ok = hello.header.msg_type == codec::MsgType::kPublicKeyAnnounce &&
                      id != codec::kServerId && entry != nullptr &&
                      hello.payload == entry->public_key &&
                      codec::verify_envelope(hello, entry->public_key, entry->params);
      if (!ok) {
        throw Error(ErrorCode::kConnectionFailed,
                    "client " + std::to_string(id) + " failed the key announcement");
      }
      std::size_t slot = clients_.size();
      for (std::size_t i = 0; i < clients_.size(); ++i) {
        if (clients_[i].id == id) slot = i;
      }
      if (slot == clients_.size() || connections_[slot].valid()) {
        throw Error(ErrorCode::kConnectionFailed, "unexpected connection from client " +
                                                      std::to_string(id));
      }
      connections_[slot] = std::move(conn);
    }
  } catch (...) {
    shutdown();
    throw;
  }
}

TcpTransport::~TcpTransport() { shutdown(); }

void TcpTransport::shutdown() {
  for (auto& c : connections_) {
    c.shutdown();
    c.close();
  }
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
}

void TcpTransport::client_main(std::size_t index) {
  ClientState& client = clients_[index];
  try {
    channel::Socket conn = channel::tcp_connect(options_.host, port_);
    const codec::SignedEnvelope hello =
        codec::make_envelope(codec::MsgType::kPublicKeyAnnounce, 0, client.id,
                             client.keypair.public_key, client.keypair);
    channel::tcp_send_frame(conn, codec::encode_envelope(hello));
    for (;;) {
      std::vector<Bytes> downlink;
      for (Bytes frame = channel::tcp_recv_frame(conn, options_.max_frame); !frame.empty();
           frame = channel::tcp_recv_frame(conn, options_.max_frame)) {
        downlink.push_back(std::move(frame));
      }
      ClientRoundResult result = client_handle_round(client, downlink);
      {
        std::lock_guard lock(mu_);
        reports_[index] = std::move(result.report);
      }
      for (const Bytes& msg : result.uplink) channel::tcp_send_frame(conn, msg);
      channel::tcp_send_frame(conn, {});
    }
  } catch (const Error& e) {
    // The server closing the connection is the normal end of the session.
    if (e.code() == ErrorCode::kPeerClosed) return;
    std::lock_guard lock(mu_);
    if (!client_error_) client_error_ = std::current_exception();
  } catch (...) {
    std::lock_guard lock(mu_);
    if (!client_error_) client_error_ = std::current_exception();
  }
}

void TcpTransport::rethrow_client_failure(const std::exception_ptr& fallback) {
  shutdown();
  std::lock_guard lock(mu_);
  std::rethrow_exception(client_error_ ? client_error_ : fallback);
}

Exchange TcpTransport::exchange(std::uint32_t, const Bytes& model_envelope) {
  Exchange ex;
  try {
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      for (const Bytes& msg :
           channel_.transmit(Direction::kServerToClient, clients_[i].id, model_envelope)) {
        channel::tcp_send_frame(connections_[i], msg);
      }
      channel::tcp_send_frame(connections_[i], {});
    }
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      for (Bytes frame = channel::tcp_recv_frame(connections_[i], options_.max_frame);
           !frame.empty(); frame = channel::tcp_recv_frame(connections_[i], options_.max_frame)) {
        for (Bytes& delivered :
             channel_.transmit(Direction::kClientToServer, clients_[i].id, std::move(frame))) {
          ex.uplink.push_back(std::move(delivered));
        }
      }
    }
  } catch (const Error&) {
    rethrow_client_failure(std::current_exception());
  }
  std::lock_guard lock(mu_);
  ex.reports = std::move(reports_);
  reports_.assign(clients_.size(), ClientReport{});
  return ex;
}

}  // namespace pqfl::protocol
