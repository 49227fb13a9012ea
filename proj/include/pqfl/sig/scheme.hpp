#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "pqfl/bytes.hpp"

namespace pqfl::sig {

// Signature algorithm families. The numeric value is the wire code carried in
// every envelope header.
enum class SchemeId : std::uint8_t {
  kDilithium = 1,
  kFalcon = 2,
  kSphincsPlus = 3,
  kTestScheme = 4,
};

// Concrete parameter sets backing each family. A family's default set is the
// one used whenever only a SchemeId is given.
enum class ParameterSet : std::uint8_t {
  kMlDsa44,
  kMlDsa65,
  kFalcon512,
  kFalcon1024,
  kSphincsSha2_128s,
  kSphincsSha2_128f,
  kHmacSha256,
};

using Seed = std::array<std::uint8_t, 32>;

std::uint8_t to_wire(SchemeId id);
// Throws Error(kUnsupportedScheme) for codes outside 1..4.
SchemeId scheme_from_wire(std::uint8_t code);

std::string_view scheme_name(SchemeId id);
// Accepts "dilithium", "falcon", "sphincs+"/"sphincsplus"/"sphincs", "test"
// (case-insensitive).
SchemeId parse_scheme(std::string_view name);

SchemeId scheme_of(ParameterSet params);
ParameterSet default_parameter_set(SchemeId id);
std::string_view parameter_set_name(ParameterSet params);
// Accepts the names printed by parameter_set_name, case-insensitive.
ParameterSet parse_parameter_set(std::string_view name);

struct SchemeMetadata {
  std::string name;
  std::size_t public_key_len = 0;
  std::size_t secret_key_len = 0;
  std::size_t signature_max_len = 0;
  std::string parameter_set;
  bool post_quantum = true;
  // Fixed-length signatures report signature_max_len on every sign call.
  bool variable_length_signature = false;
};

struct KeyPair {
  ParameterSet params = ParameterSet::kHmacSha256;
  Bytes public_key;
  Bytes secret_key;

  SchemeId scheme() const { return scheme_of(params); }
};

struct SignatureBytes {
  SchemeId scheme = SchemeId::kTestScheme;
  Bytes bytes;

  friend bool operator==(const SignatureBytes&, const SignatureBytes&) = default;
};

const SchemeMetadata& metadata(SchemeId id);
const SchemeMetadata& metadata(ParameterSet params);

// Key generation. With a seed the result is a deterministic function of
// (params, seed) for every adapter: the PQClean implementations draw their
// randomness through a thread-local generator that is keyed from the seed for
// the duration of the call. Without a seed, system entropy is used.
KeyPair keygen(SchemeId id, const std::optional<Seed>& seed = std::nullopt);
KeyPair keygen(ParameterSet params, const std::optional<Seed>& seed = std::nullopt);

// Signs `message` (must be non-empty). `entropy` pins the signer's internal
// randomness (randomized ML-DSA, Falcon nonce, SPHINCS+ optrand); leave it
// empty for fresh system randomness. Throws kAdapterFailure if the underlying
// implementation reports an error.
SignatureBytes sign(const KeyPair& keypair, ByteView message,
                    const std::optional<Seed>& entropy = std::nullopt);

// True iff `signature` is valid for `message` under `public_key`. Malformed
// keys or signatures yield false; only an unknown scheme throws.
bool verify(ByteView public_key, SchemeId id, ByteView message,
            const SignatureBytes& signature);
bool verify(ByteView public_key, ParameterSet params, ByteView message,
            const SignatureBytes& signature);

}  // namespace pqfl::sig
