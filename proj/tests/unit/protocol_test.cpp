#include <gtest/gtest.h>

#include <algorithm>
#include <functional>

#include "fixtures.hpp"
#include "pqfl/channel/channel.hpp"
#include "pqfl/error.hpp"
#include "pqfl/protocol/protocol.hpp"
#include "pqfl/protocol/runner.hpp"

namespace pqfl::protocol {
namespace {

using sig::ParameterSet;
using testing::small_spec;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::kConfigError;
}

std::vector<Bytes> honest_updates(SetupResult& s) {
  const Bytes model = codec::encode_envelope(distribute_model(s.server));
  std::vector<Bytes> out;
  for (auto& c : s.clients) {
    client_receive_model(c, model);
    out.push_back(codec::encode_envelope(client_submit_update(c, client_train(c))));
  }
  return out;
}

TEST(Setup, RegistryHoldsServerAndClients) {
  auto fed = cli::build_federation(small_spec(ParameterSet::kHmacSha256, 10, 1));
  const auto& reg = *fed.setup.registry;
  EXPECT_EQ(reg.size(), 11u);
  EXPECT_TRUE(reg.frozen());
  for (std::uint32_t id = 0; id <= 10; ++id) ASSERT_NE(reg.find(id), nullptr);
  EXPECT_EQ(reg.find(11), nullptr);
  EXPECT_EQ(reg.find(0)->public_key, fed.setup.server.keypair.public_key);
  for (const auto& c : fed.setup.clients) {
    EXPECT_EQ(reg.find(c.id)->public_key, c.keypair.public_key);
    EXPECT_EQ(c.server_public_key, fed.setup.server.keypair.public_key);
  }
  KeyRegistry copy = reg;
  EXPECT_EQ(code_of([&] { copy.add(20, {ParameterSet::kHmacSha256, {}}); }), ErrorCode::kConfigError);
}

TEST(Setup, StrictModeRefusesTestScheme) {
  auto spec = small_spec(ParameterSet::kHmacSha256, 3, 1);
  spec.options.strict = true;
  EXPECT_EQ(code_of([&] { cli::build_federation(spec); }), ErrorCode::kStrictModeViolation);
  spec.params = ParameterSet::kMlDsa44;
  EXPECT_NO_THROW(cli::build_federation(spec));
}

TEST(Setup, KeysAreSeeded) {
  auto a = cli::build_federation(small_spec(ParameterSet::kMlDsa44, 2, 1, 5));
  auto b = cli::build_federation(small_spec(ParameterSet::kMlDsa44, 2, 1, 5));
  auto c = cli::build_federation(small_spec(ParameterSet::kMlDsa44, 2, 1, 6));
  EXPECT_EQ(a.setup.clients[1].keypair.public_key, b.setup.clients[1].keypair.public_key);
  EXPECT_NE(a.setup.clients[1].keypair.public_key, c.setup.clients[1].keypair.public_key);
  EXPECT_NE(a.setup.clients[0].keypair.public_key, a.setup.clients[1].keypair.public_key);
}

TEST(Distribute, ClientAcceptsAndRejectsTampering) {
  auto fed = cli::build_federation(small_spec(ParameterSet::kMlDsa44, 2, 3));
  auto& s = fed.setup;
  const codec::SignedEnvelope env = distribute_model(s.server);
  EXPECT_EQ(env.header.round, 0u);
  EXPECT_EQ(env.header.sender_id, codec::kServerId);

  ClientState tampered_client = s.clients[0];
  codec::SignedEnvelope bad = env;
  bad.payload[bad.payload.size() - 1] ^= 0x01;
  EXPECT_EQ(code_of([&] { client_receive_model(tampered_client, bad); }), ErrorCode::kSignatureInvalid);
  EXPECT_FALSE(tampered_client.last_accepted_round.has_value());

  auto& c = s.clients[0];
  const auto model = client_receive_model(c, env);
  EXPECT_TRUE(model.params == s.server.model.params);
  EXPECT_EQ(c.last_accepted_round, 0u);
  // Same broadcast again is a replay.
  EXPECT_EQ(code_of([&] { client_receive_model(c, env); }), ErrorCode::kReplayDetected);
}

TEST(Distribute, ClientRejectsBroadcastSignedByAnotherClient) {
  auto fed = cli::build_federation(small_spec(ParameterSet::kMlDsa44, 2, 1));
  auto& s = fed.setup;
  // Client 2 forges a broadcast that claims to come from the server.
  const auto forged = codec::make_envelope(codec::MsgType::kModelDistribution, 0, codec::kServerId,
                                           codec::encode_params(s.server.model.params),
                                           s.clients[1].keypair);
  EXPECT_EQ(code_of([&] { client_receive_model(s.clients[0], forged); }), ErrorCode::kSignatureInvalid);
  // An update envelope is not a broadcast.
  const auto update = codec::make_envelope(codec::MsgType::kUpdateSubmission, 0, 2,
                                           codec::encode_params(s.server.model.params),
                                           s.clients[1].keypair);
  EXPECT_EQ(code_of([&] { client_receive_model(s.clients[0], update); }), ErrorCode::kWrongSender);
}

TEST(Distribute, StopsAfterLastRound) {
  auto spec = small_spec(ParameterSet::kHmacSha256, 2, 1);
  auto fed = cli::build_federation(spec);
  channel::Channel link;
  InProcessTransport transport(fed.setup.clients, link, false);
  run_training(fed.setup.server, transport);
  EXPECT_EQ(code_of([&] { distribute_model(fed.setup.server); }), ErrorCode::kRoundMismatch);
}

TEST(Submit, RequiresAcceptedModel) {
  auto fed = cli::build_federation(small_spec(ParameterSet::kHmacSha256, 2, 2));
  auto& c = fed.setup.clients[0];
  EXPECT_EQ(code_of([&] { client_train(c); }), ErrorCode::kRoundMismatch);
  fedcore::ModelUpdate u;
  u.round = 0;
  EXPECT_EQ(code_of([&] { client_submit_update(c, u); }), ErrorCode::kRoundMismatch);
}

TEST(Collect, AllHonestUpdatesVerify) {
  auto fed = cli::build_federation(small_spec(ParameterSet::kMlDsa44, 10, 1));
  auto ups = honest_updates(fed.setup);
  const auto r = server_collect_and_verify(fed.setup.server, ups);
  EXPECT_EQ(r.outcome.verified_set_size(), 10u);
  EXPECT_TRUE(r.outcome.rejections.empty());
  for (std::size_t i = 0; i < r.verified.size(); ++i) EXPECT_EQ(r.verified[i].client_id, i + 1);
}

TEST(Collect, BitFlippedUpdatesAreDropped) {
  auto fed = cli::build_federation(small_spec(ParameterSet::kMlDsa44, 10, 1));
  auto ups = honest_updates(fed.setup);
  // Flip a payload bit in the updates of clients 2, 5 and 9.
  for (std::size_t idx : {1u, 4u, 8u}) ups[idx][codec::kHeaderSize + 20] ^= 0x04;
  const auto r = server_collect_and_verify(fed.setup.server, ups);
  EXPECT_EQ(r.outcome.verified_clients, (std::vector<std::uint32_t>{1, 3, 4, 6, 7, 8, 10}));
  ASSERT_EQ(r.outcome.rejections.size(), 3u);
  for (const auto& rej : r.outcome.rejections) {
    EXPECT_EQ(rej.reason, RejectReason::kSignatureInvalid);
  }
}

TEST(Collect, ForgedSenderIsRejected) {
  auto fed = cli::build_federation(small_spec(ParameterSet::kMlDsa44, 3, 1));
  auto& s = fed.setup;
  honest_updates(s);
  // Client 1 signs with its own key but claims to be client 2.
  const auto forged = codec::make_envelope(codec::MsgType::kUpdateSubmission, 0, 2,
                                           codec::encode_params(s.server.model.params),
                                           s.clients[0].keypair);
  const std::vector<Bytes> in = {codec::encode_envelope(forged)};
  const auto r = server_collect_and_verify(s.server, in);
  EXPECT_TRUE(r.verified.empty());
  ASSERT_EQ(r.outcome.rejections.size(), 1u);
  EXPECT_EQ(r.outcome.rejections[0].reason, RejectReason::kSignatureInvalid);
  EXPECT_EQ(r.outcome.rejections[0].sender, 2u);
}

TEST(Collect, RejectionReasons) {
  auto fed = cli::build_federation(small_spec(ParameterSet::kHmacSha256, 3, 1));
  auto& s = fed.setup;
  auto ups = honest_updates(s);
  const auto params = codec::encode_params(s.server.model.params);
  const auto& k1 = s.clients[0].keypair;
  using codec::MsgType;
  auto enc = [](const codec::SignedEnvelope& e) { return codec::encode_envelope(e); };

  std::vector<Bytes> in;
  in.push_back(Bytes{1, 2, 3});                                                          // malformed
  in.push_back(enc(codec::make_envelope(MsgType::kModelDistribution, 0, 1, params, k1)));  // type
  in.push_back(enc(codec::make_envelope(MsgType::kUpdateSubmission, 0, 42, params, k1)));  // unknown
  in.push_back(enc(codec::make_envelope(MsgType::kUpdateSubmission, 0, 0, params, k1)));   // server id
  auto other = sig::keygen(ParameterSet::kMlDsa44);
  in.push_back(enc(codec::make_envelope(MsgType::kUpdateSubmission, 0, 1, params, other)));  // scheme
  in.push_back(enc(codec::make_envelope(MsgType::kUpdateSubmission, 1, 1, params, k1)));     // ahead
  in.push_back(enc(codec::make_envelope(MsgType::kUpdateSubmission, 0, 1, Bytes{0, 0}, k1)));  // payload
  in.push_back(enc(codec::make_envelope(
      MsgType::kUpdateSubmission, 0, 1,
      codec::encode_params(codec::ParameterVector::zeros(3)), k1)));  // shape
  in.push_back(ups[0]);
  in.push_back(ups[0]);  // duplicate
  const auto r = server_collect_and_verify(s.server, in);

  std::vector<RejectReason> reasons;
  for (const auto& rej : r.outcome.rejections) reasons.push_back(rej.reason);
  EXPECT_EQ(reasons, (std::vector<RejectReason>{
                         RejectReason::kMalformedEnvelope, RejectReason::kWrongMessageType,
                         RejectReason::kUnknownSender, RejectReason::kUnknownSender,
                         RejectReason::kSchemeMismatch, RejectReason::kRoundMismatch,
                         RejectReason::kInvalidPayload, RejectReason::kInvalidPayload,
                         RejectReason::kDuplicate}));
  EXPECT_FALSE(r.outcome.rejections[0].sender.has_value());
  EXPECT_EQ(r.outcome.verified_clients, std::vector<std::uint32_t>{1});
  EXPECT_EQ(r.outcome.received, in.size());
}

TEST(Collect, StaleRoundIsReplay) {
  auto spec = small_spec(ParameterSet::kHmacSha256, 2, 2);
  auto fed = cli::build_federation(spec);
  auto& s = fed.setup;
  auto round0 = honest_updates(s);
  auto r0 = server_collect_and_verify(s.server, round0);
  s.server.model = fedcore::aggregate(s.server.model, r0.verified);
  const auto r1 = server_collect_and_verify(s.server, round0);
  ASSERT_EQ(r1.outcome.rejections.size(), 2u);
  for (const auto& rej : r1.outcome.rejections) EXPECT_EQ(rej.reason, RejectReason::kReplayDetected);
}

TEST(Collect, UnverifiedModeAcceptsForgeries) {
  auto spec = small_spec(ParameterSet::kHmacSha256, 2, 1);
  spec.options.verify_updates = false;
  auto fed = cli::build_federation(spec);
  auto ups = honest_updates(fed.setup);
  ups[0][codec::kHeaderSize + 20] ^= 0x04;
  EXPECT_EQ(server_collect_and_verify(fed.setup.server, ups).outcome.verified_set_size(), 2u);
}

TEST(Run, ProducesOneOutcomePerRound) {
  auto spec = small_spec(ParameterSet::kHmacSha256, 4, 5);
  auto fed = cli::build_federation(spec);
  channel::Channel link;
  InProcessTransport transport(fed.setup.clients, link, true);
  std::vector<std::uint32_t> seen;
  const auto result =
      run_training(fed.setup.server, transport, [&](const RoundOutcome& o) { seen.push_back(o.round); });
  EXPECT_EQ(seen, (std::vector<std::uint32_t>{0, 1, 2, 3, 4}));
  ASSERT_EQ(result.outcomes.size(), 5u);
  EXPECT_EQ(result.model.round, 5u);
  for (const auto& o : result.outcomes) {
    EXPECT_EQ(o.verified_set_size(), 4u);
    EXPECT_FALSE(o.skipped);
    EXPECT_GT(o.timings.wall_s, 0.0);
    EXPECT_GT(o.envelope_bytes, 0u);
  }
  EXPECT_LT(result.outcomes.back().global_loss, result.outcomes.front().global_loss);
}

TEST(Run, EnvelopeByteAccounting) {
  auto spec = small_spec(ParameterSet::kMlDsa44, 3, 1);
  auto fed = cli::build_federation(spec);
  channel::Channel link;
  InProcessTransport transport(fed.setup.clients, link, false);
  const auto o = run_round(fed.setup.server, transport);
  const std::size_t n = fed.setup.server.model.params.size();
  const std::size_t env =
      codec::kHeaderSize + codec::encoded_params_size(1, n) + 4 + sig::metadata(spec.params).signature_max_len;
  EXPECT_EQ(o.envelope_bytes, 6 * env);
  EXPECT_EQ(o.signature_bytes, 6 * sig::metadata(spec.params).signature_max_len);
}

TEST(Run, EmptyVerifiedSetSkipsAggregation) {
  auto spec = small_spec(ParameterSet::kHmacSha256, 3, 2);
  channel::AttackConfig attack;
  attack.kind = channel::AttackKind::kStrip;
  auto fed = cli::build_federation(spec);
  channel::Channel link(attack);
  InProcessTransport transport(fed.setup.clients, link, false);
  const auto before = fed.setup.server.model.params;
  const auto result = run_training(fed.setup.server, transport);
  for (const auto& o : result.outcomes) {
    EXPECT_TRUE(o.skipped);
    EXPECT_EQ(o.verified_set_size(), 0u);
    EXPECT_EQ(o.rejections.size(), 3u);
  }
  EXPECT_TRUE(result.model.params == before);
  EXPECT_EQ(result.model.round, 2u);
}

TEST(Run, RefusedBroadcastIsReportedByClient) {
  auto spec = small_spec(ParameterSet::kHmacSha256, 3, 1);
  channel::AttackConfig attack;
  attack.kind = channel::AttackKind::kBitFlip;
  attack.direction = channel::Direction::kServerToClient;
  attack.target = 2;
  auto fed = cli::build_federation(spec);
  channel::Channel link(attack);
  InProcessTransport transport(fed.setup.clients, link, false);
  const auto o = run_round(fed.setup.server, transport);
  EXPECT_EQ(o.verified_clients, (std::vector<std::uint32_t>{1, 3}));
  ASSERT_EQ(o.model_rejections.size(), 1u);
  EXPECT_EQ(o.model_rejections[0].sender, 2u);
}

TEST(Run, MatchesPlainFederatedAveraging) {
  for (auto params : {ParameterSet::kHmacSha256, ParameterSet::kMlDsa44}) {
    auto spec = small_spec(params, 5, 4, 11);
    spec.train.local_epochs = 2;
    auto fed = cli::build_federation(spec);
    channel::Channel link;
    InProcessTransport transport(fed.setup.clients, link, true);
    const auto result = run_training(fed.setup.server, transport);
    const auto expected = oracle::plain_fedavg(testing::plain_run_for(spec));
    EXPECT_TRUE(result.model.params == expected.params) << sig::parameter_set_name(params);
  }
}

TEST(Run, SequentialAndParallelAgree) {
  auto spec = small_spec(ParameterSet::kMlDsa44, 4, 3);
  auto a = cli::build_federation(spec);
  auto b = cli::build_federation(spec);
  channel::Channel la, lb;
  InProcessTransport ta(a.setup.clients, la, true);
  InProcessTransport tb(b.setup.clients, lb, false);
  EXPECT_TRUE(run_training(a.setup.server, ta).model.params ==
              run_training(b.setup.server, tb).model.params);
}

struct SingleClientRun {
  fedcore::GlobalModel protocol_model;
  fedcore::GlobalModel centralized;
};

// One client, no attacks, against T rounds' worth of centralized training on
// the same shard with the same per-round shuffle seeds.
SingleClientRun single_client_run() {
  auto spec = small_spec(ParameterSet::kHmacSha256, 1, 6);
  auto fed = cli::build_federation(spec);
  channel::Channel link;
  InProcessTransport transport(fed.setup.clients, link, false);
  SingleClientRun out;
  out.protocol_model = run_training(fed.setup.server, transport).model;

  const auto data = cli::load_dataset(spec);
  const auto shard =
      fedcore::split_iid(data, 1, fedcore::derive_seed(spec.seed(), fedcore::SeedTag::kSplit))[0];
  out.centralized = fedcore::init_model(out.protocol_model.arch,
                                        fedcore::derive_seed(spec.seed(), fedcore::SeedTag::kInit));
  for (std::uint32_t t = 0; t < spec.train.num_rounds; ++t) {
    fedcore::train_epochs(out.centralized.arch, out.centralized.params.values, shard, spec.train,
                          fedcore::derive_seed(spec.seed(), fedcore::SeedTag::kTrain, 1, t));
  }
  return out;
}

TEST(Run, SingleClientEqualsCentralizedTraining) {
  const auto r = single_client_run();
  std::size_t differing = 0;
  for (std::size_t k = 0; k < r.centralized.params.size(); ++k) {
    differing += r.centralized.params.values[k] != r.protocol_model.params.values[k];
  }
  EXPECT_EQ(differing, 0u) << "of " << r.centralized.params.size() << " parameters";
}

TEST(Run, SingleClientTracksCentralizedTraining) {
  const auto r = single_client_run();
  double max_diff = 0.0;
  for (std::size_t k = 0; k < r.centralized.params.size(); ++k) {
    max_diff = std::max(max_diff, std::abs(double(r.centralized.params.values[k]) -
                                           double(r.protocol_model.params.values[k])));
  }
  RecordProperty("max_abs_diff", std::to_string(max_diff));
  EXPECT_LT(max_diff, 1e-5);
}

}  // namespace
}  // namespace pqfl::protocol
