#include "pqfl/protocol/protocol.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "pqfl/error.hpp"
#include "pqfl/fedcore/rng.hpp"
#include "pqfl/stopwatch.hpp"

namespace pqfl::protocol {

using codec::MsgType;
using codec::SignedEnvelope;

void KeyRegistry::add(std::uint32_t id, Entry entry) {
  if (frozen_) throw Error(ErrorCode::kConfigError, "key registry is frozen");
  if (!entries_.emplace(id, std::move(entry)).second) {
    throw Error(ErrorCode::kConfigError, "duplicate registry id " + std::to_string(id));
  }
}

const KeyRegistry::Entry* KeyRegistry::find(std::uint32_t id) const {
  const auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::kMalformedEnvelope: return "MalformedEnvelope";
    case RejectReason::kWrongMessageType: return "WrongMessageType";
    case RejectReason::kUnknownSender: return "UnknownSender";
    case RejectReason::kSchemeMismatch: return "SchemeMismatch";
    case RejectReason::kSignatureInvalid: return "SignatureInvalid";
    case RejectReason::kReplayDetected: return "ReplayDetected";
    case RejectReason::kRoundMismatch: return "RoundMismatch";
    case RejectReason::kDuplicate: return "Duplicate";
    case RejectReason::kInvalidPayload: return "InvalidPayload";
  }
  return "Unknown";
}

PhaseTimings& PhaseTimings::operator+=(const PhaseTimings& o) {
  wall_s += o.wall_s;
  train_s += o.train_s;
  sign_s += o.sign_s;
  verify_s += o.verify_s;
  serialize_s += o.serialize_s;
  return *this;
}

sig::Seed seed_bytes(std::uint64_t seed) {
  sig::Seed out{};
  std::uint64_t word = seed;
  for (std::size_t i = 0; i < out.size(); i += 8) {
    word = fedcore::mix64(word);
    for (std::size_t b = 0; b < 8; ++b) out[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
  }
  return out;
}

std::optional<sig::Seed> signing_entropy(const fedcore::TrainConfig& cfg,
                                         const ProtocolOptions& options, std::uint32_t sender,
                                         std::uint32_t round, MsgType type) {
  if (!options.deterministic_signing) return std::nullopt;
  const std::uint64_t context =
      (static_cast<std::uint64_t>(sender) << 8) | static_cast<std::uint64_t>(type);
  return seed_bytes(fedcore::derive_seed(cfg.seed, fedcore::SeedTag::kSigning, context, round));
}

SetupResult setup_keys(const fedcore::TrainConfig& cfg, sig::ParameterSet params,
                       std::uint64_t seed, const ProtocolOptions& options,
                       fedcore::GlobalModel initial_model,
                       std::vector<fedcore::ClientDataset> shards) {
  cfg.validate();
  if (options.strict && !sig::metadata(params).post_quantum) {
    throw Error(ErrorCode::kStrictModeViolation,
                std::string(sig::parameter_set_name(params)) + " is not post-quantum");
  }
  if (shards.size() != cfg.num_clients) {
    throw Error(ErrorCode::kConfigError, "need one data shard per client");
  }
  if (initial_model.params.size() != initial_model.arch.parameter_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "initial model does not match its architecture");
  }

  auto keys_for = [&](std::uint32_t id) {
    return sig::keygen(params, seed_bytes(fedcore::derive_seed(seed, fedcore::SeedTag::kKeys, id)));
  };

  auto registry = std::make_shared<KeyRegistry>();
  SetupResult out;
  out.server.keypair = keys_for(codec::kServerId);
  registry->add(codec::kServerId, {params, out.server.keypair.public_key});

  out.clients.reserve(cfg.num_clients);
  for (std::size_t i = 0; i < cfg.num_clients; ++i) {
    ClientState c;
    c.id = static_cast<std::uint32_t>(i + 1);
    c.keypair = keys_for(c.id);
    c.server_public_key = out.server.keypair.public_key;
    c.arch = initial_model.arch;
    c.data = std::move(shards[i]);
    c.cfg = cfg;
    c.options = options;
    registry->add(c.id, {params, c.keypair.public_key});
    out.clients.push_back(std::move(c));
  }
  registry->freeze();

  std::vector<fedcore::ClientDataset> parts;
  parts.reserve(out.clients.size());
  for (const auto& c : out.clients) parts.push_back(c.data);
  out.server.eval_data = fedcore::concat(parts);
  out.server.model = std::move(initial_model);
  out.server.cfg = cfg;
  out.server.options = options;
  out.server.registry = registry;
  out.registry = std::move(registry);
  return out;
}

namespace {

SignedEnvelope build_signed(MsgType type, std::uint32_t round, std::uint32_t sender,
                            const codec::ParameterVector& params, const sig::KeyPair& keypair,
                            const fedcore::TrainConfig& cfg, const ProtocolOptions& options,
                            PhaseTimings* timings) {
  Stopwatch clock;
  Bytes payload = codec::encode_params(params);
  const double encode_s = clock.seconds();
  clock.reset();
  SignedEnvelope env =
      codec::make_envelope(type, round, sender, std::move(payload), keypair,
                           signing_entropy(cfg, options, sender, round, type), options.bind_context);
  if (timings != nullptr) {
    timings->serialize_s += encode_s;
    timings->sign_s += clock.seconds();
  }
  return env;
}

}  // namespace

SignedEnvelope distribute_model(const ServerState& server, PhaseTimings* timings) {
  const std::uint32_t t = server.round();
  if (t >= server.cfg.num_rounds) {
    throw Error(ErrorCode::kRoundMismatch, "all " + std::to_string(server.cfg.num_rounds) +
                                               " rounds already distributed");
  }
  return build_signed(MsgType::kModelDistribution, t, codec::kServerId, server.model.params,
                      server.keypair, server.cfg, server.options, timings);
}

fedcore::GlobalModel client_receive_model(ClientState& client, const SignedEnvelope& env) {
  if (env.header.msg_type != MsgType::kModelDistribution || env.header.sender_id != codec::kServerId) {
    throw Error(ErrorCode::kWrongSender, "expected a model broadcast from the server, got type " +
                                             std::to_string(static_cast<int>(env.header.msg_type)) +
                                             " from " + std::to_string(env.header.sender_id));
  }
  if (!codec::verify_envelope(env, client.server_public_key, client.keypair.params,
                              client.options.bind_context)) {
    throw Error(ErrorCode::kSignatureInvalid, "model broadcast for round " +
                                                  std::to_string(env.header.round) +
                                                  " failed verification");
  }
  // Without context binding the header round is unauthenticated, so there is
  // nothing trustworthy to enforce monotonicity against.
  if (client.options.bind_context && client.last_accepted_round &&
      env.header.round <= *client.last_accepted_round) {
    throw Error(ErrorCode::kReplayDetected, "round " + std::to_string(env.header.round) +
                                                " <= last accepted " +
                                                std::to_string(*client.last_accepted_round));
  }
  fedcore::GlobalModel model;
  model.arch = client.arch;
  model.round = env.header.round;
  try {
    model.params = codec::decode_params(env.payload);
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedEnvelope, e.what());
  }
  if (model.params.size() != client.arch.parameter_count()) {
    throw Error(ErrorCode::kMalformedEnvelope, "model payload does not match the architecture");
  }
  client.last_accepted_round = env.header.round;
  client.current_model = model;
  return model;
}

fedcore::GlobalModel client_receive_model(ClientState& client, ByteView envelope_bytes) {
  return client_receive_model(client, codec::decode_envelope(envelope_bytes));
}

fedcore::ModelUpdate client_train(const ClientState& client) {
  if (!client.current_model) {
    throw Error(ErrorCode::kRoundMismatch, "client " + std::to_string(client.id) + " has no model");
  }
  const auto& model = *client.current_model;
  const std::uint64_t seed =
      fedcore::derive_seed(client.cfg.seed, fedcore::SeedTag::kTrain, client.id, model.round);
  return fedcore::local_train(model, client.data, client.cfg, seed, client.id);
}

SignedEnvelope client_submit_update(const ClientState& client, const fedcore::ModelUpdate& update,
                                    PhaseTimings* timings) {
  if (!client.last_accepted_round || update.round != *client.last_accepted_round) {
    throw Error(ErrorCode::kRoundMismatch,
                "update for round " + std::to_string(update.round) + " is not the current round");
  }
  return build_signed(MsgType::kUpdateSubmission, update.round, client.id, update.delta,
                      client.keypair, client.cfg, client.options, timings);
}

CollectResult server_collect_and_verify(const ServerState& server,
                                        std::span<const Bytes> envelopes) {
  CollectResult result;
  RoundOutcome& outcome = result.outcome;
  outcome.round = server.round();
  outcome.received = envelopes.size();
  std::set<std::uint32_t> accepted;
  const std::size_t param_count = server.model.params.size();

  for (const Bytes& raw : envelopes) {
    auto reject = [&](std::optional<std::uint32_t> sender, RejectReason reason, std::string detail) {
      outcome.rejections.push_back({sender, reason, std::move(detail)});
    };

    Stopwatch decode_clock;
    SignedEnvelope env;
    try {
      env = codec::decode_envelope(raw);
    } catch (const Error& e) {
      outcome.timings.serialize_s += decode_clock.seconds();
      reject(std::nullopt, RejectReason::kMalformedEnvelope, e.what());
      continue;
    }
    outcome.timings.serialize_s += decode_clock.seconds();
    const std::uint32_t sender = env.header.sender_id;

    if (env.header.msg_type != MsgType::kUpdateSubmission) {
      reject(sender, RejectReason::kWrongMessageType,
             "msg_type " + std::to_string(static_cast<int>(env.header.msg_type)));
      continue;
    }
    const KeyRegistry::Entry* entry =
        sender == codec::kServerId ? nullptr : server.registry->find(sender);
    if (entry == nullptr) {
      reject(sender, RejectReason::kUnknownSender, "sender not in registry");
      continue;
    }
    if (env.header.scheme != sig::scheme_of(entry->params)) {
      reject(sender, RejectReason::kSchemeMismatch, "scheme differs from registered key");
      continue;
    }
    if (server.options.verify_updates) {
      Stopwatch verify_clock;
      const bool ok = codec::verify_envelope(env, entry->public_key, entry->params,
                                             server.options.bind_context);
      outcome.timings.verify_s += verify_clock.seconds();
      if (!ok) {
        reject(sender, RejectReason::kSignatureInvalid, "signature does not verify");
        continue;
      }
    }
    if (server.options.bind_context && env.header.round != outcome.round) {
      const bool stale = env.header.round < outcome.round;
      reject(sender, stale ? RejectReason::kReplayDetected : RejectReason::kRoundMismatch,
             "round " + std::to_string(env.header.round) + " at server round " +
                 std::to_string(outcome.round));
      continue;
    }

    fedcore::ModelUpdate update;
    update.client_id = sender;
    update.round = outcome.round;
    Stopwatch payload_clock;
    try {
      update.delta = codec::decode_params(env.payload);
    } catch (const Error& e) {
      outcome.timings.serialize_s += payload_clock.seconds();
      reject(sender, RejectReason::kInvalidPayload, e.what());
      continue;
    }
    outcome.timings.serialize_s += payload_clock.seconds();
    if (update.delta.size() != param_count || update.delta.shape != server.model.params.shape) {
      reject(sender, RejectReason::kInvalidPayload, "update shape does not match the model");
      continue;
    }
    if (!accepted.insert(sender).second) {
      reject(sender, RejectReason::kDuplicate, "client already contributed this round");
      continue;
    }
    result.verified.push_back(std::move(update));
  }

  std::sort(result.verified.begin(), result.verified.end(),
            [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  for (const auto& u : result.verified) outcome.verified_clients.push_back(u.client_id);
  return result;
}

}  // namespace pqfl::protocol
