#include <gtest/gtest.h>

#include <sys/socket.h>

#include <cstring>
#include <functional>
#include <thread>

#include "fixtures.hpp"
#include "pqfl/channel/attack.hpp"
#include "pqfl/channel/channel.hpp"
#include "pqfl/channel/tcp.hpp"
#include "pqfl/error.hpp"
#include "pqfl/protocol/protocol.hpp"
#include "pqfl/protocol/runner.hpp"

namespace pqfl::channel {
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

// One signed update envelope from client 1 of a two-client federation.
struct UpdateFixture {
  cli::Federation fed = cli::build_federation(small_spec(ParameterSet::kMlDsa44, 2, 1));
  Bytes update;

  UpdateFixture() {
    auto& c = fed.setup.clients[0];
    protocol::client_receive_model(c, protocol::distribute_model(fed.setup.server));
    update = codec::encode_envelope(protocol::client_submit_update(c, protocol::client_train(c)));
  }

  protocol::CollectResult collect(const Bytes& msg) {
    const std::vector<Bytes> in = {msg};
    return protocol::server_collect_and_verify(fed.setup.server, in);
  }
};

TEST(Attack, NoneIsIdentity) {
  Channel link;
  for (std::uint32_t i = 0; i < 50; ++i) {
    const Bytes msg(100 + i, static_cast<std::uint8_t>(i));
    const auto out = link.transmit(i % 2 ? Direction::kClientToServer : Direction::kServerToClient, i, msg);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0], msg);
  }
  EXPECT_TRUE(link.events().empty());
}

TEST(Attack, BitFlipChangesExactlyOneBit) {
  AttackConfig cfg;
  cfg.kind = AttackKind::kBitFlip;
  fedcore::Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Bytes msg(64, 0x5A);
    const Bytes out = deliver(msg, cfg, rng);
    ASSERT_EQ(out.size(), msg.size());
    int bits = 0;
    for (std::size_t k = 0; k < msg.size(); ++k) bits += __builtin_popcount(msg[k] ^ out[k]);
    EXPECT_EQ(bits, 1);
  }
}

TEST(Attack, DeterministicPerSeed) {
  AttackConfig cfg;
  cfg.kind = AttackKind::kBitFlip;
  cfg.probability = 0.5;
  cfg.seed = 99;
  auto run = [&](std::uint64_t seed) {
    cfg.seed = seed;
    Channel link(cfg);
    std::vector<Bytes> got;
    for (std::uint32_t i = 0; i < 100; ++i) {
      for (auto& m : link.transmit(Direction::kClientToServer, i % 5 + 1, Bytes(32, 7))) got.push_back(m);
    }
    return got;
  };
  EXPECT_EQ(run(99), run(99));
  EXPECT_NE(run(99), run(100));
}

TEST(Attack, ProbabilityIsRespected) {
  AttackConfig cfg;
  cfg.kind = AttackKind::kBitFlip;
  cfg.probability = 0.25;
  cfg.seed = 3;
  Channel link(cfg);
  for (int i = 0; i < 4000; ++i) link.transmit(Direction::kClientToServer, 1, Bytes(16, 0));
  EXPECT_NEAR(static_cast<double>(link.stats().uplink.tampered), 1000.0, 120.0);
}

TEST(Attack, TargetAndDirectionLimitExposure) {
  AttackConfig cfg;
  cfg.kind = AttackKind::kBitFlip;
  cfg.target = 3;
  cfg.direction = Direction::kServerToClient;
  Channel link(cfg);
  const Bytes msg(10, 1);
  EXPECT_EQ(link.transmit(Direction::kClientToServer, 3, msg)[0], msg);
  EXPECT_EQ(link.transmit(Direction::kServerToClient, 2, msg)[0], msg);
  EXPECT_NE(link.transmit(Direction::kServerToClient, 3, msg)[0], msg);
  ASSERT_EQ(link.events().size(), 1u);
  EXPECT_EQ(link.events()[0].client_id, 3u);
}

TEST(Attack, SubstitutedUpdateFailsVerification) {
  UpdateFixture f;
  for (auto source : {PoisonSource::kNegate, PoisonSource::kGaussian}) {
    AttackConfig cfg;
    cfg.kind = AttackKind::kSubstitute;
    cfg.poison = PoisonSpec{source, 2.0};
    fedcore::Rng rng(5);
    const Bytes forged = deliver(f.update, cfg, rng);
    ASSERT_NE(forged, f.update);
    const auto env = codec::decode_envelope(forged);
    EXPECT_EQ(env.header.sender_id, 1u);
    EXPECT_EQ(env.signature, codec::decode_envelope(f.update).signature);
    const auto r = f.collect(forged);
    ASSERT_EQ(r.outcome.rejections.size(), 1u);
    EXPECT_EQ(r.outcome.rejections[0].reason, protocol::RejectReason::kSignatureInvalid);
  }
}

TEST(Attack, SubstitutingTheSamePayloadIsHarmless) {
  UpdateFixture f;
  const auto env = codec::decode_envelope(f.update);
  fedcore::ModelUpdate same;
  same.client_id = 1;
  same.delta = codec::decode_params(env.payload);
  const Bytes out = substitute_update(f.update, same);
  EXPECT_EQ(out, f.update);
  EXPECT_EQ(f.collect(out).outcome.verified_set_size(), 1u);
}

TEST(Attack, NegatePoisonNegates) {
  UpdateFixture f;
  fedcore::Rng rng(1);
  const auto poison = make_poison(f.update, {PoisonSource::kNegate, 3.0}, rng);
  ASSERT_TRUE(poison.has_value());
  const auto delta = codec::decode_params(codec::decode_envelope(f.update).payload);
  for (std::size_t k = 0; k < delta.size(); ++k) {
    EXPECT_EQ(poison->delta.values[k], static_cast<float>(-3.0 * delta.values[k]));
  }
  EXPECT_FALSE(make_poison(Bytes{1, 2}, {}, rng).has_value());
}

TEST(Attack, StrippedSignatureFails) {
  UpdateFixture f;
  AttackConfig cfg;
  cfg.kind = AttackKind::kStrip;
  fedcore::Rng rng(1);
  const auto r = f.collect(deliver(f.update, cfg, rng));
  ASSERT_EQ(r.outcome.rejections.size(), 1u);
  EXPECT_EQ(r.outcome.rejections[0].reason, protocol::RejectReason::kSignatureInvalid);
}

TEST(Replay, InjectsPriorMessagesOnly) {
  AttackConfig cfg;
  cfg.kind = AttackKind::kReplay;
  cfg.direction = Direction::kBoth;
  Channel link(cfg);
  std::vector<Bytes> sent;
  for (std::uint8_t i = 0; i < 30; ++i) {
    const Bytes msg(8, i);
    const auto out = link.transmit(Direction::kClientToServer, 1, msg);
    EXPECT_EQ(out[0], msg);
    if (i == 0) {
      EXPECT_EQ(out.size(), 1u);
    } else {
      ASSERT_EQ(out.size(), 2u);
      EXPECT_NE(std::find(sent.begin(), sent.end(), out[1]), sent.end());
    }
    sent.push_back(msg);
  }
  const auto st = link.stats();
  EXPECT_EQ(st.uplink.replayed, 29u);
  EXPECT_EQ(st.uplink.delivered, st.uplink.sent + st.uplink.replayed);
  EXPECT_EQ(st.downlink.sent, 0u);
}

TEST(Replay, ProtocolRejectsEveryReplay) {
  auto spec = small_spec(ParameterSet::kHmacSha256, 4, 6);
  spec.attack.kind = AttackKind::kReplay;
  spec.attack.direction = Direction::kBoth;
  const auto attacked = cli::run_experiment(spec);
  spec.attack = {};
  const auto clean = cli::run_experiment(spec);
  EXPECT_GT(attacked.channel_stats.uplink.replayed, 0u);
  EXPECT_GT(attacked.channel_stats.downlink.replayed, 0u);
  for (const auto& o : attacked.training.outcomes) EXPECT_EQ(o.verified_set_size(), 4u);
  EXPECT_TRUE(attacked.training.model.params == clean.training.model.params);
}

TEST(Replay, UnboundEnvelopesLetReplaysThrough) {
  auto spec = small_spec(ParameterSet::kHmacSha256, 3, 4);
  spec.options.bind_context = false;
  spec.attack.kind = AttackKind::kReplay;
  const auto attacked = cli::run_experiment(spec);
  spec.attack = {};
  const auto clean = cli::run_experiment(spec);
  EXPECT_FALSE(attacked.training.model.params == clean.training.model.params);
}

TEST(Stats, ConservationUnderTampering) {
  AttackConfig cfg;
  cfg.kind = AttackKind::kBitFlip;
  cfg.probability = 0.5;
  Channel link(cfg);
  std::uint64_t bytes = 0;
  for (int i = 0; i < 100; ++i) {
    const Bytes msg(10 + i, 0);
    bytes += msg.size();
    link.transmit(Direction::kServerToClient, 1, msg);
  }
  const auto st = link.stats().downlink;
  EXPECT_EQ(st.sent, 100u);
  EXPECT_EQ(st.delivered, 100u);
  EXPECT_EQ(st.bytes, bytes);
  EXPECT_EQ(st.tampered, link.events().size());
}

TEST(Parse, AttackSpecs) {
  const auto a = parse_attack("substitute:target=1:p=1.0:poison=negate");
  EXPECT_EQ(a.kind, AttackKind::kSubstitute);
  EXPECT_EQ(a.target, 1u);
  EXPECT_EQ(a.probability, 1.0);
  ASSERT_TRUE(a.poison.has_value());
  EXPECT_EQ(a.poison->source, PoisonSource::kNegate);

  const auto b = parse_attack("replay:dir=both:p=0.5:seed=9");
  EXPECT_EQ(b.kind, AttackKind::kReplay);
  EXPECT_EQ(b.direction, Direction::kBoth);
  EXPECT_FALSE(b.target.has_value());
  EXPECT_EQ(b.seed, 9u);

  EXPECT_EQ(parse_attack("substitute").poison->source, PoisonSource::kNegate);
  EXPECT_EQ(parse_attack("none").kind, AttackKind::kNone);
  EXPECT_EQ(parse_attack(format_attack(a)).poison->source, a.poison->source);
  EXPECT_EQ(parse_attack(format_attack(b)).direction, b.direction);

  for (const char* bad : {"explode", "bitflip:p=2", "bitflip:p=x", "bitflip:target=-1",
                          "bitflip:color=red", "bitflip:dir=sideways", "bitflip:p"}) {
    EXPECT_EQ(code_of([&] { parse_attack(bad); }), ErrorCode::kConfigError) << bad;
  }
}

TEST(Tcp, FramesRoundTrip) {
  auto listener = tcp_listen("127.0.0.1", 0);
  ASSERT_NE(listener.port(), 0);
  std::thread peer([port = listener.port()] {
    Socket s = tcp_connect("127.0.0.1", port);
    Bytes big(3 << 20);
    for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<std::uint8_t>(i * 31);
    tcp_send_frame(s, big);
    tcp_send_frame(s, {});
    tcp_send_frame(s, tcp_recv_frame(s));
  });
  Socket conn = listener.accept();
  const Bytes big = tcp_recv_frame(conn);
  ASSERT_EQ(big.size(), 3u << 20);
  EXPECT_EQ(big[12345], static_cast<std::uint8_t>(12345 * 31));
  EXPECT_TRUE(tcp_recv_frame(conn).empty());
  const Bytes echo = {1, 2, 3};
  tcp_send_frame(conn, echo);
  EXPECT_EQ(tcp_recv_frame(conn), echo);
  peer.join();
  EXPECT_EQ(code_of([&] { tcp_recv_frame(conn); }), ErrorCode::kPeerClosed);
}

TEST(Tcp, OversizedFrameRejectedBeforeAllocation) {
  auto listener = tcp_listen("127.0.0.1", 0);
  std::thread peer([port = listener.port()] {
    Socket s = tcp_connect("127.0.0.1", port);
    const std::uint8_t prefix[4] = {0x80, 0, 0, 0};  // 2^31 bytes announced
    ::send(s.fd(), prefix, 4, MSG_NOSIGNAL);
    char c;
    ::recv(s.fd(), &c, 1, 0);  // hold the connection until the server is done
  });
  Socket conn = listener.accept();
  EXPECT_EQ(code_of([&] { tcp_recv_frame(conn, 1 << 20); }), ErrorCode::kFrameTooLarge);
  conn.shutdown();
  peer.join();
}

TEST(Tcp, GarbageFrameIsDecodeError) {
  auto listener = tcp_listen("127.0.0.1", 0);
  std::thread peer([port = listener.port()] {
    Socket s = tcp_connect("127.0.0.1", port);
    tcp_send_frame(s, Bytes(40, 0xEE));
  });
  Socket conn = listener.accept();
  EXPECT_EQ(code_of([&] { tcp_recv_envelope(conn); }), ErrorCode::kDecodeError);
  peer.join();
}

TEST(Tcp, ConnectFailsWithoutListener) {
  auto listener = tcp_listen("127.0.0.1", 0);
  const auto port = listener.port();
  { Listener gone = std::move(listener); }
  EXPECT_EQ(code_of([&] { tcp_connect("127.0.0.1", port, std::chrono::milliseconds(100)); }),
            ErrorCode::kConnectionFailed);
}

TEST(Tcp, ParseEndpoint) {
  EXPECT_EQ(parse_endpoint("127.0.0.1:9000"), (std::pair<std::string, std::uint16_t>{"127.0.0.1", 9000}));
  EXPECT_EQ(code_of([] { parse_endpoint("nohost"); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([] { parse_endpoint("h:99999"); }), ErrorCode::kConfigError);
}

TEST(Tcp, TransportMatchesInProcess) {
  auto spec = small_spec(ParameterSet::kMlDsa44, 3, 3);
  const auto local = cli::run_experiment(spec);
  spec.transport = cli::TransportKind::kTcp;
  const auto remote = cli::run_experiment(spec);
  EXPECT_TRUE(local.training.model.params == remote.training.model.params);
  ASSERT_EQ(local.metrics.size(), remote.metrics.size());
  for (std::size_t i = 0; i < local.metrics.size(); ++i) {
    EXPECT_EQ(local.metrics[i].payload_bytes, remote.metrics[i].payload_bytes);
    EXPECT_EQ(local.metrics[i].global_loss, remote.metrics[i].global_loss);
  }
}

TEST(Tcp, TransportUnderBitFlips) {
  auto spec = small_spec(ParameterSet::kMlDsa44, 3, 2);
  spec.transport = cli::TransportKind::kTcp;
  spec.attack = parse_attack("bitflip:target=2");
  const auto r = cli::run_experiment(spec);
  for (const auto& o : r.training.outcomes) {
    EXPECT_EQ(o.verified_clients, (std::vector<std::uint32_t>{1, 3}));
  }
}

}  // namespace
}  // namespace pqfl::channel
