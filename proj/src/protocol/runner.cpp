#include "pqfl/protocol/runner.hpp"

#include <future>
#include <string>
#include <utility>

#include "pqfl/error.hpp"
#include "pqfl/stopwatch.hpp"

namespace pqfl::protocol {
namespace {

RejectReason reason_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSignatureInvalid: return RejectReason::kSignatureInvalid;
    case ErrorCode::kReplayDetected: return RejectReason::kReplayDetected;
    case ErrorCode::kWrongSender: return RejectReason::kUnknownSender;
    default: return RejectReason::kMalformedEnvelope;
  }
}

}  // namespace

ClientRoundResult client_handle_round(ClientState& client, std::span<const Bytes> downlink) {
  ClientRoundResult result;
  ClientReport& report = result.report;
  report.client_id = client.id;

  bool accepted = false;
  for (const Bytes& raw : downlink) {
    Stopwatch clock;
    codec::SignedEnvelope env;
    try {
      env = codec::decode_envelope(raw);
    } catch (const Error& e) {
      report.timings.serialize_s += clock.seconds();
      report.model_rejections.push_back({std::nullopt, RejectReason::kMalformedEnvelope, e.what()});
      continue;
    }
    report.timings.serialize_s += clock.seconds();
    if (accepted) {
      // One model per round; anything after the first accepted copy is a replay.
      report.model_rejections.push_back(
          {env.header.sender_id, RejectReason::kReplayDetected, "extra broadcast this round"});
      continue;
    }
    clock.reset();
    try {
      client_receive_model(client, env);
      accepted = true;
    } catch (const Error& e) {
      report.model_rejections.push_back({env.header.sender_id, reason_of(e.code()), e.what()});
    }
    report.timings.verify_s += clock.seconds();
  }
  if (!accepted) return result;

  Stopwatch train_clock;
  const fedcore::ModelUpdate update = client_train(client);
  report.timings.train_s += train_clock.seconds();

  const codec::SignedEnvelope env = client_submit_update(client, update, &report.timings);
  Stopwatch encode_clock;
  Bytes wire = codec::encode_envelope(env);
  report.timings.serialize_s += encode_clock.seconds();
  report.envelope_bytes = wire.size();
  report.signature_bytes = env.signature.bytes.size();
  report.submitted = true;
  result.uplink.push_back(std::move(wire));
  return result;
}

InProcessTransport::InProcessTransport(std::vector<ClientState>& clients,
                                       channel::Channel& channel, bool parallel)
    : clients_(clients), channel_(channel), parallel_(parallel) {}

Exchange InProcessTransport::exchange(std::uint32_t, const Bytes& model_envelope) {
  using channel::Direction;
  std::vector<std::vector<Bytes>> downlinks;
  downlinks.reserve(clients_.size());
  for (const ClientState& c : clients_) {
    downlinks.push_back(channel_.transmit(Direction::kServerToClient, c.id, model_envelope));
  }

  std::vector<ClientRoundResult> results(clients_.size());
  if (parallel_ && clients_.size() > 1) {
    std::vector<std::future<ClientRoundResult>> futures;
    futures.reserve(clients_.size());
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      futures.push_back(std::async(std::launch::async, [this, &downlinks, i] {
        return client_handle_round(clients_[i], downlinks[i]);
      }));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      results[i] = client_handle_round(clients_[i], downlinks[i]);
    }
  }

  Exchange ex;
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    for (Bytes& msg : results[i].uplink) {
      for (Bytes& delivered : channel_.transmit(Direction::kClientToServer, clients_[i].id,
                                                std::move(msg))) {
        ex.uplink.push_back(std::move(delivered));
      }
    }
    ex.reports.push_back(std::move(results[i].report));
  }
  return ex;
}

RoundOutcome run_round(ServerState& server, Transport& transport) {
  Stopwatch wall;
  PhaseTimings server_timings;
  const codec::SignedEnvelope broadcast = distribute_model(server, &server_timings);
  Stopwatch encode_clock;
  const Bytes wire = codec::encode_envelope(broadcast);
  server_timings.serialize_s += encode_clock.seconds();

  Exchange ex = transport.exchange(server.round(), wire);
  CollectResult collected = server_collect_and_verify(server, ex.uplink);
  RoundOutcome outcome = std::move(collected.outcome);

  outcome.timings += server_timings;
  outcome.envelope_bytes = wire.size() * ex.reports.size();
  outcome.signature_bytes = broadcast.signature.bytes.size() * ex.reports.size();
  for (const ClientReport& r : ex.reports) {
    outcome.timings += r.timings;
    outcome.envelope_bytes += r.envelope_bytes;
    outcome.signature_bytes += r.signature_bytes;
    for (const Rejection& rej : r.model_rejections) {
      Rejection tagged = rej;
      tagged.sender = r.client_id;
      outcome.model_rejections.push_back(std::move(tagged));
    }
  }

  if (collected.verified.empty()) {
    outcome.skipped = true;
    ++server.model.round;
  } else {
    server.model = fedcore::aggregate(server.model, collected.verified);
  }
  outcome.global_loss = fedcore::forward_loss(server.model, server.eval_data);
  outcome.timings.wall_s = wall.seconds();
  return outcome;
}

TrainingResult run_training(ServerState& server, Transport& transport,
                            const RoundCallback& on_round) {
  TrainingResult result;
  while (server.round() < server.cfg.num_rounds) {
    result.outcomes.push_back(run_round(server, transport));
    if (on_round) on_round(result.outcomes.back());
  }
  result.model = server.model;
  return result;
}

}  // namespace pqfl::protocol
