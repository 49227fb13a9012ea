#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pqfl/codec/codec.hpp"
#include "pqfl/fedcore/dataset.hpp"
#include "pqfl/fedcore/model.hpp"
#include "pqfl/fedcore/train.hpp"
#include "pqfl/sig/scheme.hpp"

namespace pqfl::protocol {

struct ProtocolOptions {
  // Refuse schemes that are not post-quantum (TestScheme).
  bool strict = false;
  // Server checks client signatures. Off = the unsecured baseline.
  bool verify_updates = true;
  // Sign header||payload and enforce round monotonicity. Off = sign the
  // parameter bytes alone, which leaves replays undetectable.
  bool bind_context = true;
  // Derive signing randomness from the master seed so that whole runs
  // (including signature bytes) are reproducible. Off = system entropy.
  bool deterministic_signing = true;
  // Run client phases on one thread per client.
  bool parallel_clients = true;
};

// Trusted id -> public key map. Id 0 is the server, 1..M the clients.
// Frozen after key generation; later inserts throw.
class KeyRegistry {
 public:
  struct Entry {
    sig::ParameterSet params;
    Bytes public_key;
  };

  void add(std::uint32_t id, Entry entry);
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  const Entry* find(std::uint32_t id) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::uint32_t, Entry>& entries() const { return entries_; }

 private:
  std::map<std::uint32_t, Entry> entries_;
  bool frozen_ = false;
};

struct ServerState {
  fedcore::GlobalModel model;
  sig::KeyPair keypair;
  std::shared_ptr<const KeyRegistry> registry;
  fedcore::TrainConfig cfg;
  ProtocolOptions options;
  // Union of all client shards; used only to report the global objective.
  fedcore::ClientDataset eval_data;

  std::uint32_t round() const { return model.round; }
};

struct ClientState {
  std::uint32_t id = 0;
  sig::KeyPair keypair;
  Bytes server_public_key;
  fedcore::Architecture arch;
  fedcore::ClientDataset data;
  fedcore::TrainConfig cfg;
  ProtocolOptions options;
  std::optional<std::uint32_t> last_accepted_round;
  std::optional<fedcore::GlobalModel> current_model;
};

enum class RejectReason {
  kMalformedEnvelope,
  kWrongMessageType,
  kUnknownSender,
  kSchemeMismatch,
  kSignatureInvalid,
  kReplayDetected,  // round older than the current one
  kRoundMismatch,   // round ahead of the current one
  kDuplicate,
  kInvalidPayload,
};

std::string_view to_string(RejectReason reason);

struct Rejection {
  std::optional<std::uint32_t> sender;  // empty when the envelope did not decode
  RejectReason reason;
  std::string detail;
};

struct PhaseTimings {
  double wall_s = 0.0;
  double train_s = 0.0;
  double sign_s = 0.0;
  double verify_s = 0.0;
  double serialize_s = 0.0;

  PhaseTimings& operator+=(const PhaseTimings& o);
};

struct RoundOutcome {
  std::uint32_t round = 0;
  std::size_t received = 0;
  std::vector<std::uint32_t> verified_clients;  // ascending
  std::vector<Rejection> rejections;
  // Client-side rejections of the model broadcast (client sat the round out).
  std::vector<Rejection> model_rejections;
  bool skipped = false;  // empty verified set: parameters carried over
  double global_loss = 0.0;
  PhaseTimings timings;
  // Bytes of encoded envelopes emitted by honest participants this round
  // (one broadcast copy per client plus every client submission).
  std::uint64_t envelope_bytes = 0;
  std::uint64_t signature_bytes = 0;

  std::size_t verified_set_size() const { return verified_clients.size(); }
};

struct SetupResult {
  ServerState server;
  std::vector<ClientState> clients;
  std::shared_ptr<const KeyRegistry> registry;
};

// Generates M+1 key pairs (seeded per participant from `seed`), freezes the
// registry and hands every client the server key out of band. Throws
// kStrictModeViolation for a non-post-quantum scheme in strict mode.
SetupResult setup_keys(const fedcore::TrainConfig& cfg, sig::ParameterSet params,
                       std::uint64_t seed, const ProtocolOptions& options,
                       fedcore::GlobalModel initial_model,
                       std::vector<fedcore::ClientDataset> shards);

// Signing entropy for (participant, round, message type) when deterministic
// signing is on.
std::optional<sig::Seed> signing_entropy(const fedcore::TrainConfig& cfg,
                                         const ProtocolOptions& options, std::uint32_t sender,
                                         std::uint32_t round, codec::MsgType type);

sig::Seed seed_bytes(std::uint64_t seed);

// Signed broadcast of the current global parameters. Throws kRoundMismatch
// once all cfg.num_rounds rounds have been distributed. Serialization and
// signing time are added to `timings` when given.
codec::SignedEnvelope distribute_model(const ServerState& server,
                                       PhaseTimings* timings = nullptr);

// Verifies and accepts a model broadcast. Throws kWrongSender,
// kSignatureInvalid, kReplayDetected or kMalformedEnvelope; on success the
// client's last accepted round advances.
fedcore::GlobalModel client_receive_model(ClientState& client, const codec::SignedEnvelope& env);
fedcore::GlobalModel client_receive_model(ClientState& client, ByteView envelope_bytes);

// Local training on the accepted model, seeded from (cfg.seed, id, round).
// Throws kRoundMismatch if no model has been accepted.
fedcore::ModelUpdate client_train(const ClientState& client);

// Signs and wraps an update. Throws kRoundMismatch unless update.round is the
// client's last accepted round.
codec::SignedEnvelope client_submit_update(const ClientState& client,
                                           const fedcore::ModelUpdate& update,
                                           PhaseTimings* timings = nullptr);

struct CollectResult {
  std::vector<fedcore::ModelUpdate> verified;  // ascending client id
  RoundOutcome outcome;
};

// Filters received envelopes down to the verified set S: decodes, checks
// type, sender, scheme, signature, round and payload, keeping the first valid
// update per client. Everything else becomes a Rejection.
CollectResult server_collect_and_verify(const ServerState& server,
                                        std::span<const Bytes> envelopes);

}  // namespace pqfl::protocol
