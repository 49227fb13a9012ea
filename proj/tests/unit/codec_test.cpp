#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <limits>

#include "oracles.hpp"
#include "pqfl/codec/codec.hpp"
#include "pqfl/error.hpp"
#include "pqfl/fedcore/rng.hpp"

namespace pqfl::codec {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kConfigError;  // sentinel: nothing thrown
}

ParameterVector random_params(fedcore::Rng& rng) {
  ParameterVector p;
  const std::size_t rank = 1 + rng.below(3);
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    p.shape.push_back(1 + rng.below(6));
    n *= p.shape.back();
  }
  for (std::size_t i = 0; i < n; ++i) {
    // Random bit patterns with the exponent forced finite.
    std::uint32_t bits = static_cast<std::uint32_t>(rng.next_u64());
    if (((bits >> 23) & 0xFF) == 0xFF) bits &= ~(1u << 30);
    float v;
    std::memcpy(&v, &bits, 4);
    p.values.push_back(v);
  }
  return p;
}

TEST(Codec, OneFloatExample) {
  const Bytes b = encode_params(ParameterVector::flat({1.0f}));
  const Bytes expected = {0x01, 0, 0, 0, 0x01, 0, 0, 0, 0, 0, 0, 0, 0x00, 0x00, 0x80, 0x3F};
  EXPECT_EQ(b, expected);
}

TEST(Codec, TwoByThreeIs44Bytes) {
  ParameterVector p{{1, 2, 3, 4, 5, 6}, {2, 3}};
  EXPECT_EQ(encode_params(p).size(), 44u);
  EXPECT_EQ(encoded_params_size(2, 6), 44u);
}

TEST(Codec, MatchesReferenceEncoder) {
  fedcore::Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const ParameterVector p = random_params(rng);
    EXPECT_EQ(encode_params(p), oracle::encode_params(p.shape, p.values));
  }
}

TEST(Codec, ParamsRoundTripBitExact) {
  fedcore::Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const ParameterVector p = random_params(rng);
    const Bytes b = encode_params(p);
    const ParameterVector q = decode_params(b);
    EXPECT_TRUE(q == p);
    EXPECT_EQ(encode_params(q), b);
  }
}

TEST(Codec, NegativeZeroSurvives) {
  const ParameterVector p = ParameterVector::flat({-0.0f, 0.0f});
  const ParameterVector q = decode_params(encode_params(p));
  EXPECT_TRUE(std::signbit(q.values[0]));
  EXPECT_FALSE(std::signbit(q.values[1]));
  EXPECT_FALSE(q == ParameterVector::flat({0.0f, 0.0f}));
}

TEST(Codec, NonFiniteRejected) {
  const float inf = std::numeric_limits<float>::infinity();
  EXPECT_EQ(code_of([&] { encode_params(ParameterVector::flat({1.0f, inf})); }),
            ErrorCode::kNonFiniteValue);
  Bytes b = encode_params(ParameterVector::flat({1.0f}));
  b[12] = 0x00;
  b[13] = 0x00;
  b[14] = 0xC0;
  b[15] = 0x7F;  // 0x7FC00000, quiet NaN
  EXPECT_EQ(code_of([&] { decode_params(b); }), ErrorCode::kNonFiniteValue);
}

TEST(Codec, MalformedPayloads) {
  const Bytes good = encode_params(ParameterVector{{1, 2, 3, 4, 5, 6}, {2, 3}});
  Bytes truncated(good.begin(), good.end() - 1);
  EXPECT_EQ(code_of([&] { decode_params(truncated); }), ErrorCode::kMalformedPayload);
  Bytes extended = good;
  extended.push_back(0);
  EXPECT_EQ(code_of([&] { decode_params(extended); }), ErrorCode::kMalformedPayload);
  EXPECT_EQ(code_of([&] { decode_params(Bytes{0, 0, 0, 0}); }), ErrorCode::kMalformedPayload);
  EXPECT_EQ(code_of([&] { decode_params(Bytes{}); }), ErrorCode::kMalformedPayload);
  // Dimension product overflowing 64 bits.
  Bytes overflow = {2, 0, 0, 0};
  for (int d = 0; d < 2; ++d) {
    for (int i = 0; i < 8; ++i) overflow.push_back(0xFF);
  }
  EXPECT_EQ(code_of([&] { decode_params(overflow); }), ErrorCode::kMalformedPayload);
  // Zero dimension.
  Bytes zero_dim = {1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(code_of([&] { decode_params(zero_dim); }), ErrorCode::kMalformedPayload);
  // Shape that does not describe the values.
  EXPECT_EQ(code_of([&] { encode_params(ParameterVector{{1, 2, 3}, {2, 2}}); }),
            ErrorCode::kMalformedPayload);
}

SignedEnvelope random_envelope(fedcore::Rng& rng) {
  SignedEnvelope e;
  e.header.msg_type = static_cast<MsgType>(1 + rng.below(3));
  e.header.scheme = static_cast<sig::SchemeId>(1 + rng.below(4));
  e.header.round = static_cast<std::uint32_t>(rng.next_u64());
  e.header.sender_id = static_cast<std::uint32_t>(rng.next_u64());
  e.payload.resize(rng.below(300));
  for (auto& b : e.payload) b = static_cast<std::uint8_t>(rng.next_u64());
  e.header.payload_len = e.payload.size();
  e.signature.scheme = e.header.scheme;
  e.signature.bytes.resize(rng.below(100));
  for (auto& b : e.signature.bytes) b = static_cast<std::uint8_t>(rng.next_u64());
  return e;
}

TEST(Codec, EnvelopeRoundTripBitExact) {
  fedcore::Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const SignedEnvelope e = random_envelope(rng);
    const Bytes b = encode_envelope(e);
    EXPECT_EQ(b.size(), kHeaderSize + e.payload.size() + 4 + e.signature.bytes.size());
    const SignedEnvelope d = decode_envelope(b);
    EXPECT_EQ(d, e);
    EXPECT_EQ(encode_envelope(d), b);
  }
}

TEST(Codec, HeaderLayout) {
  MessageHeader h{MsgType::kUpdateSubmission, sig::SchemeId::kFalcon, 0x01020304, 0x0A0B0C0D, 5};
  const Bytes b = encode_header(h);
  const Bytes expected = {'P', 'Q', 'F', 'L', 1, 2, 2, 4, 3, 2, 1, 0x0D, 0x0C, 0x0B, 0x0A,
                          5, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(b, expected);
  EXPECT_EQ(b.size(), kHeaderSize);
  const Bytes payload = {9, 9, 9, 9, 9};
  EXPECT_EQ(signed_bytes(h, payload).size(), kHeaderSize + payload.size());
}

TEST(Codec, MalformedEnvelopes) {
  fedcore::Rng rng(4);
  SignedEnvelope e = random_envelope(rng);
  e.header.msg_type = MsgType::kUpdateSubmission;
  const Bytes good = encode_envelope(e);
  auto bad = [&](auto mutate) {
    Bytes b = good;
    mutate(b);
    return code_of([&] { decode_envelope(b); });
  };
  EXPECT_EQ(bad([](Bytes& b) { std::memcpy(b.data(), "XXXX", 4); }), ErrorCode::kMalformedEnvelope);
  EXPECT_EQ(bad([](Bytes& b) { b[4] = 2; }), ErrorCode::kMalformedEnvelope);
  EXPECT_EQ(bad([](Bytes& b) { b[5] = 9; }), ErrorCode::kMalformedEnvelope);
  EXPECT_EQ(bad([](Bytes& b) { b[6] = 0; }), ErrorCode::kMalformedEnvelope);
  EXPECT_EQ(bad([](Bytes& b) { b.pop_back(); }), ErrorCode::kMalformedEnvelope);
  EXPECT_EQ(bad([](Bytes& b) { b.push_back(0); }), ErrorCode::kMalformedEnvelope);
  EXPECT_EQ(bad([](Bytes& b) { b[15] ^= 1; }), ErrorCode::kMalformedEnvelope);
  EXPECT_EQ(bad([](Bytes& b) { b.resize(10); }), ErrorCode::kMalformedEnvelope);
}

TEST(Codec, DecodeNeverCrashesOnGarbage) {
  fedcore::Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    Bytes b(rng.below(80));
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.next_u64());
    if (b.size() >= 5 && rng.below(2) == 0) {
      std::memcpy(b.data(), "PQFL", 4);
      b[4] = 1;
    }
    try {
      decode_envelope(b);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kMalformedEnvelope);
    }
  }
}

class BoundEnvelope : public ::testing::Test {
 protected:
  sig::KeyPair kp = sig::keygen(sig::ParameterSet::kHmacSha256);
  SignedEnvelope env = make_envelope(MsgType::kUpdateSubmission, 3, 7,
                                     encode_params(ParameterVector::flat({1.5f, -2.0f})), kp);
};

TEST_F(BoundEnvelope, VerifiesUnderSignerKey) {
  EXPECT_TRUE(verify_envelope(env, kp.public_key, kp.params));
  EXPECT_EQ(env.header.payload_len, env.payload.size());
  EXPECT_EQ(env.header.scheme, sig::SchemeId::kTestScheme);
}

TEST_F(BoundEnvelope, HeaderFieldsAreBound) {
  auto tampered = [&](auto mutate) {
    SignedEnvelope e = env;
    mutate(e);
    return verify_envelope(e, kp.public_key, kp.params);
  };
  EXPECT_FALSE(tampered([](SignedEnvelope& e) { e.header.round = 4; }));
  EXPECT_FALSE(tampered([](SignedEnvelope& e) { e.header.sender_id = 8; }));
  EXPECT_FALSE(tampered([](SignedEnvelope& e) { e.header.msg_type = MsgType::kModelDistribution; }));
  EXPECT_FALSE(tampered([](SignedEnvelope& e) { e.payload[19] ^= 0x10; }));
}

TEST_F(BoundEnvelope, UnboundModeIgnoresHeader) {
  SignedEnvelope e = make_envelope(MsgType::kUpdateSubmission, 3, 7, env.payload, kp,
                                   std::nullopt, false);
  e.header.round = 99;
  e.header.sender_id = 1;
  EXPECT_TRUE(verify_envelope(e, kp.public_key, kp.params, false));
  EXPECT_FALSE(verify_envelope(e, kp.public_key, kp.params, true));
}

}  // namespace
}  // namespace pqfl::codec
