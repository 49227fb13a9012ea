#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pqfl/bytes.hpp"
#include "pqfl/channel/channel.hpp"
#include "pqfl/protocol/protocol.hpp"

namespace pqfl::protocol {

// What one client did in one round, as reported back to the orchestrator.
struct ClientReport {
  std::uint32_t client_id = 0;
  PhaseTimings timings;  // train, sign, verify, serialize
  std::vector<Rejection> model_rejections;
  std::uint64_t envelope_bytes = 0;   // encoded update envelope, 0 if none
  std::uint64_t signature_bytes = 0;
  bool submitted = false;
};

struct ClientRoundResult {
  ClientReport report;
  std::vector<Bytes> uplink;  // zero or one encoded envelope
};

// Client side of a round: accepts the first valid broadcast among `downlink`
// (later copies are rejected as replays), trains on it and returns the signed
// update. A client that accepted nothing sits the round out.
ClientRoundResult client_handle_round(ClientState& client, std::span<const Bytes> downlink);

struct Exchange {
  std::vector<Bytes> uplink;           // as received by the server, in arrival order
  std::vector<ClientReport> reports;   // ascending client id
};

// Moves the broadcast to the clients and their updates back.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Exchange exchange(std::uint32_t round, const Bytes& model_envelope) = 0;
};

// Clients live in this process. Downlink and uplink pass through `channel`
// in ascending client order; the client phase runs one thread per client when
// parallel is set.
class InProcessTransport final : public Transport {
 public:
  InProcessTransport(std::vector<ClientState>& clients, channel::Channel& channel, bool parallel);
  Exchange exchange(std::uint32_t round, const Bytes& model_envelope) override;

 private:
  std::vector<ClientState>& clients_;
  channel::Channel& channel_;
  bool parallel_;
};

// Distribution, local update, verification, aggregation. An empty verified
// set skips aggregation: parameters carry over and the round still advances.
RoundOutcome run_round(ServerState& server, Transport& transport);

struct TrainingResult {
  fedcore::GlobalModel model;
  std::vector<RoundOutcome> outcomes;
};

using RoundCallback = std::function<void(const RoundOutcome&)>;

// Runs the remaining rounds up to cfg.num_rounds, calling on_round after each.
TrainingResult run_training(ServerState& server, Transport& transport,
                            const RoundCallback& on_round = {});

}  // namespace pqfl::protocol
