#include <gtest/gtest.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <cstring>
#include <string>
#include <thread>
#include <vector>

#include "pqfl/error.hpp"
#include "pqfl/fedcore/rng.hpp"
#include "pqfl/sig/scheme.hpp"

extern "C" {
#include "sha2.h"
}

namespace pqfl::sig {
namespace {

const ParameterSet kAllSets[] = {ParameterSet::kMlDsa44,          ParameterSet::kMlDsa65,
                                 ParameterSet::kFalcon512,        ParameterSet::kFalcon1024,
                                 ParameterSet::kSphincsSha2_128f, ParameterSet::kHmacSha256};

Bytes random_bytes(std::size_t n, std::uint64_t seed) {
  fedcore::Rng rng(seed);
  Bytes out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng.next_u64());
  return out;
}

Seed seed_of(std::uint8_t v) {
  Seed s{};
  s.fill(v);
  return s;
}

class EveryParameterSet : public ::testing::TestWithParam<ParameterSet> {};

TEST_P(EveryParameterSet, KeyLengthsMatchMetadata) {
  const auto& md = metadata(GetParam());
  const KeyPair kp = keygen(GetParam());
  EXPECT_EQ(kp.public_key.size(), md.public_key_len);
  EXPECT_EQ(kp.secret_key.size(), md.secret_key_len);
  EXPECT_EQ(kp.params, GetParam());
  EXPECT_GT(md.signature_max_len, 0u);
}

TEST_P(EveryParameterSet, SignVerifyRoundTrip) {
  const KeyPair kp = keygen(GetParam());
  const Bytes msg = random_bytes(1000, 7);
  const SignatureBytes s = sign(kp, msg);
  EXPECT_EQ(s.scheme, scheme_of(GetParam()));
  EXPECT_LE(s.bytes.size(), metadata(GetParam()).signature_max_len);
  EXPECT_TRUE(verify(kp.public_key, GetParam(), msg, s));
}

TEST_P(EveryParameterSet, SeededKeygenIsDeterministic) {
  const KeyPair a = keygen(GetParam(), seed_of(3));
  const KeyPair b = keygen(GetParam(), seed_of(3));
  const KeyPair c = keygen(GetParam(), seed_of(4));
  EXPECT_EQ(a.public_key, b.public_key);
  EXPECT_EQ(a.secret_key, b.secret_key);
  EXPECT_NE(a.public_key, c.public_key);
}

TEST_P(EveryParameterSet, SeededSigningIsDeterministic) {
  const KeyPair kp = keygen(GetParam(), seed_of(1));
  const Bytes msg = random_bytes(64, 9);
  EXPECT_EQ(sign(kp, msg, seed_of(5)), sign(kp, msg, seed_of(5)));
}

TEST_P(EveryParameterSet, TruncatedOrExtendedSignatureFails) {
  const KeyPair kp = keygen(GetParam());
  const Bytes msg = random_bytes(64, 11);
  SignatureBytes s = sign(kp, msg);
  SignatureBytes shorter = s;
  shorter.bytes.pop_back();
  EXPECT_FALSE(verify(kp.public_key, GetParam(), msg, shorter));
  SignatureBytes longer = s;
  longer.bytes.push_back(0);
  EXPECT_FALSE(verify(kp.public_key, GetParam(), msg, longer));
  SignatureBytes empty = s;
  empty.bytes.clear();
  EXPECT_FALSE(verify(kp.public_key, GetParam(), msg, empty));
}

TEST_P(EveryParameterSet, WrongLengthPublicKeyFails) {
  const KeyPair kp = keygen(GetParam());
  const Bytes msg = random_bytes(32, 12);
  const SignatureBytes s = sign(kp, msg);
  Bytes pk = kp.public_key;
  pk.pop_back();
  EXPECT_FALSE(verify(pk, GetParam(), msg, s));
}

TEST_P(EveryParameterSet, FuzzedSignaturesNeverVerify) {
  const KeyPair kp = keygen(GetParam());
  const Bytes msg = random_bytes(48, 13);
  const std::size_t max_len = metadata(GetParam()).signature_max_len;
  fedcore::Rng rng(99);
  for (int i = 0; i < 50; ++i) {
    SignatureBytes junk{scheme_of(GetParam()), random_bytes(1 + rng.below(max_len + 8), 100 + i)};
    EXPECT_FALSE(verify(kp.public_key, GetParam(), msg, junk));
  }
}

TEST_P(EveryParameterSet, ConcurrentSigningIsIndependent) {
  const KeyPair kp = keygen(GetParam(), seed_of(21));
  const Bytes msg = random_bytes(128, 14);
  const SignatureBytes expected = sign(kp, msg, seed_of(22));
  std::vector<SignatureBytes> got(4);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < got.size(); ++i) {
    threads.emplace_back([&, i] { got[i] = sign(kp, msg, seed_of(22)); });
  }
  for (auto& t : threads) t.join();
  for (const auto& s : got) EXPECT_EQ(s, expected);
}

INSTANTIATE_TEST_SUITE_P(Sig, EveryParameterSet, ::testing::ValuesIn(kAllSets),
                         [](const auto& info) {
                           std::string name(parameter_set_name(info.param));
                           for (char& c : name) {
                             if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
                           }
                           return name;
                         });

TEST(Sig, ExhaustiveBitFlipsOfShortMessage) {
  for (ParameterSet p : {ParameterSet::kMlDsa44, ParameterSet::kFalcon1024,
                         ParameterSet::kHmacSha256}) {
    const KeyPair kp = keygen(p);
    const Bytes msg = random_bytes(64, 15);
    const SignatureBytes s = sign(kp, msg);
    for (std::size_t bit = 0; bit < msg.size() * 8; ++bit) {
      Bytes m = msg;
      m[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      ASSERT_FALSE(verify(kp.public_key, p, m, s)) << parameter_set_name(p) << " bit " << bit;
    }
  }
}

TEST(Sig, SignatureUnderOtherKeyFails) {
  for (ParameterSet p : kAllSets) {
    const KeyPair a = keygen(p);
    const KeyPair b = keygen(p);
    const Bytes msg = random_bytes(100, 16);
    EXPECT_FALSE(verify(b.public_key, p, msg, sign(a, msg))) << parameter_set_name(p);
  }
}

TEST(Sig, SchemeMismatchFails) {
  const KeyPair kp = keygen(ParameterSet::kHmacSha256);
  const Bytes msg = random_bytes(10, 17);
  SignatureBytes s = sign(kp, msg);
  s.scheme = SchemeId::kDilithium;
  EXPECT_FALSE(verify(kp.public_key, ParameterSet::kHmacSha256, msg, s));
}

TEST(Sig, EmptyMessageIsRejected) {
  const KeyPair kp = keygen(ParameterSet::kHmacSha256);
  EXPECT_THROW(sign(kp, {}), Error);
}

TEST(Sig, WireCodesRoundTrip) {
  for (SchemeId id : {SchemeId::kDilithium, SchemeId::kFalcon, SchemeId::kSphincsPlus,
                      SchemeId::kTestScheme}) {
    EXPECT_EQ(scheme_from_wire(to_wire(id)), id);
  }
  EXPECT_EQ(to_wire(SchemeId::kDilithium), 1);
  EXPECT_EQ(to_wire(SchemeId::kFalcon), 2);
  EXPECT_EQ(to_wire(SchemeId::kSphincsPlus), 3);
  EXPECT_EQ(to_wire(SchemeId::kTestScheme), 4);
  for (int code : {0, 5, 255}) {
    try {
      scheme_from_wire(static_cast<std::uint8_t>(code));
      FAIL() << code;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kUnsupportedScheme);
    }
  }
}

TEST(Sig, NamesParse) {
  EXPECT_EQ(parse_scheme("Dilithium"), SchemeId::kDilithium);
  EXPECT_EQ(parse_scheme("SPHINCS+"), SchemeId::kSphincsPlus);
  EXPECT_EQ(parse_scheme("falcon"), SchemeId::kFalcon);
  EXPECT_EQ(parse_parameter_set("falcon-512"), ParameterSet::kFalcon512);
  EXPECT_EQ(parse_parameter_set("SPHINCS+-sha2-128f-simple"), ParameterSet::kSphincsSha2_128f);
  EXPECT_THROW(parse_scheme("rsa"), Error);
  EXPECT_THROW(parse_parameter_set("ML-DSA-87"), Error);
}

// Sizes published with the standardized parameter sets.
TEST(Sig, MetadataMatchesPublishedSizes) {
  struct Row {
    ParameterSet p;
    std::size_t pk, sk, sig;
  };
  const Row rows[] = {
      {ParameterSet::kMlDsa44, 1312, 2560, 2420},
      {ParameterSet::kMlDsa65, 1952, 4032, 3309},
      {ParameterSet::kFalcon512, 897, 1281, 752},
      {ParameterSet::kFalcon1024, 1793, 2305, 1462},
      {ParameterSet::kSphincsSha2_128s, 32, 64, 7856},
      {ParameterSet::kSphincsSha2_128f, 32, 64, 17088},
      {ParameterSet::kHmacSha256, 32, 32, 32},
  };
  for (const Row& r : rows) {
    const auto& md = metadata(r.p);
    EXPECT_EQ(md.public_key_len, r.pk) << md.parameter_set;
    EXPECT_EQ(md.secret_key_len, r.sk) << md.parameter_set;
    EXPECT_EQ(md.signature_max_len, r.sig) << md.parameter_set;
  }
  EXPECT_FALSE(metadata(ParameterSet::kHmacSha256).post_quantum);
  EXPECT_TRUE(metadata(ParameterSet::kFalcon1024).variable_length_signature);
  EXPECT_FALSE(metadata(ParameterSet::kMlDsa44).variable_length_signature);
}

TEST(Sig, DefaultSizeOrderings) {
  const auto& d = metadata(SchemeId::kDilithium);
  const auto& f = metadata(SchemeId::kFalcon);
  const auto& s = metadata(SchemeId::kSphincsPlus);
  EXPECT_LT(s.public_key_len, d.public_key_len);
  EXPECT_LT(d.public_key_len, f.public_key_len);
  EXPECT_LT(f.signature_max_len, d.signature_max_len);
  EXPECT_LT(d.signature_max_len, s.signature_max_len);
  EXPECT_EQ(d.name, "Dilithium");
  EXPECT_EQ(f.name, "Falcon");
  EXPECT_EQ(s.name, "SPHINCS+");
}

TEST(Sig, SphincsSignatureLargerThanFalconForSameMessage) {
  const Bytes msg = random_bytes(1024, 18);
  const auto falcon = sign(keygen(SchemeId::kFalcon), msg);
  const auto sphincs = sign(keygen(ParameterSet::kSphincsSha2_128f), msg);
  EXPECT_GT(sphincs.bytes.size(), falcon.bytes.size());
}

// TestScheme against OpenSSL: pk = SHA-256(label || sk), sig = HMAC-SHA256(pk, m).
TEST(Sig, TestSchemeMatchesOpenSsl) {
  const KeyPair kp = keygen(ParameterSet::kHmacSha256, seed_of(0));
  const KeyPair again = keygen(ParameterSet::kHmacSha256, seed_of(0));
  EXPECT_EQ(kp.secret_key, again.secret_key);

  const std::string label = "pqfl-test-scheme-v1";
  Bytes pre(label.begin(), label.end());
  pre.insert(pre.end(), kp.secret_key.begin(), kp.secret_key.end());
  std::uint8_t digest[SHA256_DIGEST_LENGTH];
  SHA256(pre.data(), pre.size(), digest);
  EXPECT_EQ(Bytes(digest, digest + 32), kp.public_key);

  for (std::size_t n : {1u, 63u, 64u, 65u, 1000u}) {
    const Bytes msg = random_bytes(n, n);
    std::uint8_t mac[32];
    unsigned int mac_len = 0;
    HMAC(EVP_sha256(), kp.public_key.data(), static_cast<int>(kp.public_key.size()), msg.data(),
         msg.size(), mac, &mac_len);
    const SignatureBytes s = sign(kp, msg);
    EXPECT_EQ(s.bytes, Bytes(mac, mac + mac_len)) << n;
    EXPECT_EQ(sign(kp, msg), s);
  }
}

// SPHINCS+-SHA2 runs on PQClean's SHA-256, whose block function may be
// routed to OpenSSL. Both entry points must agree with OpenSSL's digest.
TEST(PqcleanSha256, MatchesOpenSsl) {
  fedcore::Rng rng(4);
  for (std::size_t len : {0, 1, 55, 56, 63, 64, 65, 119, 128, 1000, 65537}) {
    Bytes msg(len);
    for (auto& b : msg) b = static_cast<std::uint8_t>(rng.next_u64());
    std::uint8_t expected[32], one_shot[32], incremental[32];
    SHA256(msg.data(), msg.size(), expected);
    ::sha256(one_shot, msg.data(), msg.size());
    sha256ctx ctx;
    sha256_inc_init(&ctx);
    const std::size_t blocks = len / 64 / 2;
    sha256_inc_blocks(&ctx, msg.data(), blocks);
    sha256_inc_finalize(incremental, &ctx, msg.data() + 64 * blocks, len - 64 * blocks);
    EXPECT_EQ(std::memcmp(expected, one_shot, 32), 0) << len;
    EXPECT_EQ(std::memcmp(expected, incremental, 32), 0) << len;
  }
}

}  // namespace
}  // namespace pqfl::sig
