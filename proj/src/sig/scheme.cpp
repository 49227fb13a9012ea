#include "pqfl/sig/scheme.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <string>

#include "entropy.hpp"
#include "pqclean.hpp"
#include "pqfl/error.hpp"

namespace pqfl::sig {
namespace {

constexpr std::uint8_t kKeygenLabel = 1;
constexpr std::uint8_t kSignLabel = 2;

using KeypairFn = int (*)(std::uint8_t*, std::uint8_t*);
using SignFn = int (*)(std::uint8_t*, std::size_t*, const std::uint8_t*,
                       std::size_t, const std::uint8_t*);
using VerifyFn = int (*)(const std::uint8_t*, std::size_t, const std::uint8_t*,
                         std::size_t, const std::uint8_t*);

struct Adapter {
  ParameterSet params;
  SchemeMetadata meta;
  KeypairFn keypair;
  SignFn sign;
  VerifyFn verify;
};

// TestScheme: HMAC-SHA256 keyed by the "public" key, which is itself a hash
// of the secret. Anyone holding the public key can forge; it exists only so
// that unit tests do not pay for lattice or hash-tree signing.
constexpr std::size_t kTestKeyLen = 32;
constexpr std::size_t kTestSigLen = 32;

void derive_test_public(const std::uint8_t* sk, std::uint8_t* pk) {
  static constexpr char kLabel[] = "pqfl-test-scheme-v1";
  std::uint8_t buf[sizeof(kLabel) - 1 + kTestKeyLen];
  std::memcpy(buf, kLabel, sizeof(kLabel) - 1);
  std::memcpy(buf + sizeof(kLabel) - 1, sk, kTestKeyLen);
  ::sha256(pk, buf, sizeof(buf));
}

void hmac_sha256(const std::uint8_t* key, const std::uint8_t* m, std::size_t mlen,
                 std::uint8_t* out) {
  std::uint8_t ipad[64];
  std::uint8_t opad[64 + 32];
  for (std::size_t i = 0; i < 64; ++i) {
    const std::uint8_t k = i < kTestKeyLen ? key[i] : 0;
    ipad[i] = k ^ 0x36;
    opad[i] = k ^ 0x5c;
  }
  sha256ctx ctx;
  sha256_inc_init(&ctx);
  sha256_inc_blocks(&ctx, ipad, 1);
  sha256_inc_finalize(opad + 64, &ctx, m, mlen);
  ::sha256(out, opad, sizeof(opad));
}

int test_keypair(std::uint8_t* pk, std::uint8_t* sk) {
  if (PQCLEAN_randombytes(sk, kTestKeyLen) != 0) return -1;
  derive_test_public(sk, pk);
  return 0;
}

int test_sign(std::uint8_t* sig, std::size_t* siglen, const std::uint8_t* m,
              std::size_t mlen, const std::uint8_t* sk) {
  std::uint8_t pk[kTestKeyLen];
  derive_test_public(sk, pk);
  hmac_sha256(pk, m, mlen, sig);
  *siglen = kTestSigLen;
  return 0;
}

int test_verify(const std::uint8_t* sig, std::size_t siglen, const std::uint8_t* m,
                std::size_t mlen, const std::uint8_t* pk) {
  if (siglen != kTestSigLen) return -1;
  std::uint8_t expect[kTestSigLen];
  hmac_sha256(pk, m, mlen, expect);
  std::uint8_t diff = 0;
  for (std::size_t i = 0; i < kTestSigLen; ++i) diff |= expect[i] ^ sig[i];
  return diff == 0 ? 0 : -1;
}

const Adapter kAdapters[] = {
    {ParameterSet::kMlDsa44,
     {"Dilithium", PQCLEAN_MLDSA44_CLEAN_CRYPTO_PUBLICKEYBYTES,
      PQCLEAN_MLDSA44_CLEAN_CRYPTO_SECRETKEYBYTES, PQCLEAN_MLDSA44_CLEAN_CRYPTO_BYTES,
      PQCLEAN_MLDSA44_CLEAN_CRYPTO_ALGNAME, true, false},
     &PQCLEAN_MLDSA44_CLEAN_crypto_sign_keypair,
     [](std::uint8_t* s, std::size_t* sl, const std::uint8_t* m, std::size_t ml,
        const std::uint8_t* sk) {
       return PQCLEAN_MLDSA44_CLEAN_crypto_sign_signature(s, sl, m, ml, sk);
     },
     [](const std::uint8_t* s, std::size_t sl, const std::uint8_t* m, std::size_t ml,
        const std::uint8_t* pk) {
       return PQCLEAN_MLDSA44_CLEAN_crypto_sign_verify(s, sl, m, ml, pk);
     }},
    {ParameterSet::kMlDsa65,
     {"Dilithium", PQCLEAN_MLDSA65_CLEAN_CRYPTO_PUBLICKEYBYTES,
      PQCLEAN_MLDSA65_CLEAN_CRYPTO_SECRETKEYBYTES, PQCLEAN_MLDSA65_CLEAN_CRYPTO_BYTES,
      PQCLEAN_MLDSA65_CLEAN_CRYPTO_ALGNAME, true, false},
     &PQCLEAN_MLDSA65_CLEAN_crypto_sign_keypair,
     [](std::uint8_t* s, std::size_t* sl, const std::uint8_t* m, std::size_t ml,
        const std::uint8_t* sk) {
       return PQCLEAN_MLDSA65_CLEAN_crypto_sign_signature(s, sl, m, ml, sk);
     },
     [](const std::uint8_t* s, std::size_t sl, const std::uint8_t* m, std::size_t ml,
        const std::uint8_t* pk) {
       return PQCLEAN_MLDSA65_CLEAN_crypto_sign_verify(s, sl, m, ml, pk);
     }},
    {ParameterSet::kFalcon512,
     {"Falcon", PQCLEAN_FALCON512_CLEAN_CRYPTO_PUBLICKEYBYTES,
      PQCLEAN_FALCON512_CLEAN_CRYPTO_SECRETKEYBYTES, PQCLEAN_FALCON512_CLEAN_CRYPTO_BYTES,
      PQCLEAN_FALCON512_CLEAN_CRYPTO_ALGNAME, true, true},
     &PQCLEAN_FALCON512_CLEAN_crypto_sign_keypair,
     &PQCLEAN_FALCON512_CLEAN_crypto_sign_signature,
     &PQCLEAN_FALCON512_CLEAN_crypto_sign_verify},
    {ParameterSet::kFalcon1024,
     {"Falcon", PQCLEAN_FALCON1024_CLEAN_CRYPTO_PUBLICKEYBYTES,
      PQCLEAN_FALCON1024_CLEAN_CRYPTO_SECRETKEYBYTES, PQCLEAN_FALCON1024_CLEAN_CRYPTO_BYTES,
      PQCLEAN_FALCON1024_CLEAN_CRYPTO_ALGNAME, true, true},
     &PQCLEAN_FALCON1024_CLEAN_crypto_sign_keypair,
     &PQCLEAN_FALCON1024_CLEAN_crypto_sign_signature,
     &PQCLEAN_FALCON1024_CLEAN_crypto_sign_verify},
    {ParameterSet::kSphincsSha2_128s,
     {"SPHINCS+", PQCLEAN_SPHINCSSHA2128SSIMPLE_CLEAN_CRYPTO_PUBLICKEYBYTES,
      PQCLEAN_SPHINCSSHA2128SSIMPLE_CLEAN_CRYPTO_SECRETKEYBYTES,
      PQCLEAN_SPHINCSSHA2128SSIMPLE_CLEAN_CRYPTO_BYTES,
      PQCLEAN_SPHINCSSHA2128SSIMPLE_CLEAN_CRYPTO_ALGNAME, true, false},
     &PQCLEAN_SPHINCSSHA2128SSIMPLE_CLEAN_crypto_sign_keypair,
     &PQCLEAN_SPHINCSSHA2128SSIMPLE_CLEAN_crypto_sign_signature,
     &PQCLEAN_SPHINCSSHA2128SSIMPLE_CLEAN_crypto_sign_verify},
    {ParameterSet::kSphincsSha2_128f,
     {"SPHINCS+", PQCLEAN_SPHINCSSHA2128FSIMPLE_CLEAN_CRYPTO_PUBLICKEYBYTES,
      PQCLEAN_SPHINCSSHA2128FSIMPLE_CLEAN_CRYPTO_SECRETKEYBYTES,
      PQCLEAN_SPHINCSSHA2128FSIMPLE_CLEAN_CRYPTO_BYTES,
      PQCLEAN_SPHINCSSHA2128FSIMPLE_CLEAN_CRYPTO_ALGNAME, true, false},
     &PQCLEAN_SPHINCSSHA2128FSIMPLE_CLEAN_crypto_sign_keypair,
     &PQCLEAN_SPHINCSSHA2128FSIMPLE_CLEAN_crypto_sign_signature,
     &PQCLEAN_SPHINCSSHA2128FSIMPLE_CLEAN_crypto_sign_verify},
    {ParameterSet::kHmacSha256,
     {"TestScheme", kTestKeyLen, kTestKeyLen, kTestSigLen, "HMAC-SHA256 (not post-quantum)",
      false, false},
     &test_keypair, &test_sign, &test_verify},
};

const Adapter& adapter_for(ParameterSet params) {
  for (const auto& a : kAdapters) {
    if (a.params == params) return a;
  }
  throw Error(ErrorCode::kUnsupportedScheme,
              "no adapter for parameter set " + std::to_string(static_cast<int>(params)));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::uint8_t to_wire(SchemeId id) { return static_cast<std::uint8_t>(id); }

SchemeId scheme_from_wire(std::uint8_t code) {
  if (code < 1 || code > 4) {
    throw Error(ErrorCode::kUnsupportedScheme, "unknown scheme wire code " + std::to_string(code));
  }
  return static_cast<SchemeId>(code);
}

std::string_view scheme_name(SchemeId id) {
  switch (id) {
    case SchemeId::kDilithium: return "Dilithium";
    case SchemeId::kFalcon: return "Falcon";
    case SchemeId::kSphincsPlus: return "SPHINCS+";
    case SchemeId::kTestScheme: return "TestScheme";
  }
  throw Error(ErrorCode::kUnsupportedScheme, "unknown scheme");
}

SchemeId parse_scheme(std::string_view name) {
  const std::string n = lower(name);
  if (n == "dilithium" || n == "ml-dsa" || n == "mldsa") return SchemeId::kDilithium;
  if (n == "falcon" || n == "fn-dsa") return SchemeId::kFalcon;
  if (n == "sphincs+" || n == "sphincsplus" || n == "sphincs" || n == "slh-dsa") {
    return SchemeId::kSphincsPlus;
  }
  if (n == "test" || n == "testscheme") return SchemeId::kTestScheme;
  throw Error(ErrorCode::kUnsupportedScheme, "unknown scheme name '" + std::string(name) + "'");
}

SchemeId scheme_of(ParameterSet params) {
  switch (params) {
    case ParameterSet::kMlDsa44:
    case ParameterSet::kMlDsa65: return SchemeId::kDilithium;
    case ParameterSet::kFalcon512:
    case ParameterSet::kFalcon1024: return SchemeId::kFalcon;
    case ParameterSet::kSphincsSha2_128s:
    case ParameterSet::kSphincsSha2_128f: return SchemeId::kSphincsPlus;
    case ParameterSet::kHmacSha256: return SchemeId::kTestScheme;
  }
  throw Error(ErrorCode::kUnsupportedScheme, "unknown parameter set");
}

ParameterSet default_parameter_set(SchemeId id) {
  switch (id) {
    case SchemeId::kDilithium: return ParameterSet::kMlDsa44;
    // Falcon-512's public key is smaller than ML-DSA-44's; the level-5 set is
    // the one whose key is the largest of the three families.
    case SchemeId::kFalcon: return ParameterSet::kFalcon1024;
    case SchemeId::kSphincsPlus: return ParameterSet::kSphincsSha2_128s;
    case SchemeId::kTestScheme: return ParameterSet::kHmacSha256;
  }
  throw Error(ErrorCode::kUnsupportedScheme, "unknown scheme");
}

std::string_view parameter_set_name(ParameterSet params) {
  return adapter_for(params).meta.parameter_set;
}

ParameterSet parse_parameter_set(std::string_view name) {
  const std::string n = lower(name);
  for (const auto& a : kAdapters) {
    if (lower(a.meta.parameter_set) == n) return a.params;
  }
  if (n == "hmac-sha256" || n == "test") return ParameterSet::kHmacSha256;
  throw Error(ErrorCode::kUnsupportedScheme, "unknown parameter set '" + std::string(name) + "'");
}

const SchemeMetadata& metadata(SchemeId id) { return metadata(default_parameter_set(id)); }

const SchemeMetadata& metadata(ParameterSet params) { return adapter_for(params).meta; }

KeyPair keygen(SchemeId id, const std::optional<Seed>& seed) {
  return keygen(default_parameter_set(id), seed);
}

KeyPair keygen(ParameterSet params, const std::optional<Seed>& seed) {
  const Adapter& a = adapter_for(params);
  KeyPair kp;
  kp.params = params;
  kp.public_key.resize(a.meta.public_key_len);
  kp.secret_key.resize(a.meta.secret_key_len);
  int rc = 0;
  if (seed) {
    detail::ScopedEntropy scope(kKeygenLabel, *seed);
    rc = a.keypair(kp.public_key.data(), kp.secret_key.data());
  } else {
    rc = a.keypair(kp.public_key.data(), kp.secret_key.data());
  }
  if (rc != 0) {
    throw Error(ErrorCode::kAdapterFailure,
                a.meta.parameter_set + " keypair returned " + std::to_string(rc));
  }
  return kp;
}

SignatureBytes sign(const KeyPair& keypair, ByteView message, const std::optional<Seed>& entropy) {
  const Adapter& a = adapter_for(keypair.params);
  if (message.empty()) {
    throw Error(ErrorCode::kAdapterFailure, "refusing to sign an empty message");
  }
  if (keypair.secret_key.size() != a.meta.secret_key_len) {
    throw Error(ErrorCode::kAdapterFailure,
                "secret key has " + std::to_string(keypair.secret_key.size()) +
                    " bytes, expected " + std::to_string(a.meta.secret_key_len));
  }
  SignatureBytes sig;
  sig.scheme = keypair.scheme();
  sig.bytes.resize(a.meta.signature_max_len);
  std::size_t len = 0;
  int rc = 0;
  if (entropy) {
    detail::ScopedEntropy scope(kSignLabel, *entropy);
    rc = a.sign(sig.bytes.data(), &len, message.data(), message.size(), keypair.secret_key.data());
  } else {
    rc = a.sign(sig.bytes.data(), &len, message.data(), message.size(), keypair.secret_key.data());
  }
  if (rc != 0 || len > a.meta.signature_max_len) {
    throw Error(ErrorCode::kAdapterFailure,
                a.meta.parameter_set + " sign returned " + std::to_string(rc));
  }
  sig.bytes.resize(len);
  return sig;
}

bool verify(ByteView public_key, SchemeId id, ByteView message, const SignatureBytes& signature) {
  return verify(public_key, default_parameter_set(id), message, signature);
}

bool verify(ByteView public_key, ParameterSet params, ByteView message,
            const SignatureBytes& signature) {
  const Adapter& a = adapter_for(params);
  if (signature.scheme != scheme_of(params)) return false;
  if (public_key.size() != a.meta.public_key_len) return false;
  if (signature.bytes.empty() || signature.bytes.size() > a.meta.signature_max_len) return false;
  // PQClean verifiers dereference the message pointer even for zero length.
  static constexpr std::uint8_t kEmpty = 0;
  const std::uint8_t* m = message.empty() ? &kEmpty : message.data();
  return a.verify(signature.bytes.data(), signature.bytes.size(), m, message.size(),
                  public_key.data()) == 0;
}

}  // namespace pqfl::sig
