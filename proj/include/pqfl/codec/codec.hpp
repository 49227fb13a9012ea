#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "pqfl/bytes.hpp"
#include "pqfl/sig/scheme.hpp"

namespace pqfl::codec {

// Flat float32 tensor with shape metadata. Holds both global parameters and
// client deltas.
struct ParameterVector {
  std::vector<float> values;
  std::vector<std::uint64_t> shape;

  static ParameterVector flat(std::vector<float> values);
  static ParameterVector zeros(std::size_t n);

  std::size_t size() const { return values.size(); }

  // Bitwise equality: distinguishes -0.0f from 0.0f.
  friend bool operator==(const ParameterVector& a, const ParameterVector& b);
};

// Layout: u32 rank | rank x u64 dims | values as f32, all little-endian.
// Throws kNonFiniteValue on NaN/Inf and kMalformedPayload when the shape does
// not describe the values.
Bytes encode_params(const ParameterVector& p);
ParameterVector decode_params(ByteView bytes);
std::size_t encoded_params_size(std::size_t rank, std::size_t count);

enum class MsgType : std::uint8_t {
  kModelDistribution = 1,
  kUpdateSubmission = 2,
  kPublicKeyAnnounce = 3,
};

inline constexpr std::uint8_t kMagic[4] = {'P', 'Q', 'F', 'L'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 23;  // 4+1+1+1+4+4+8
inline constexpr std::uint32_t kServerId = 0;

struct MessageHeader {
  MsgType msg_type = MsgType::kModelDistribution;
  sig::SchemeId scheme = sig::SchemeId::kTestScheme;
  std::uint32_t round = 0;
  std::uint32_t sender_id = 0;
  std::uint64_t payload_len = 0;

  friend bool operator==(const MessageHeader&, const MessageHeader&) = default;
};

struct SignedEnvelope {
  MessageHeader header;
  Bytes payload;
  sig::SignatureBytes signature;

  friend bool operator==(const SignedEnvelope&, const SignedEnvelope&) = default;
};

Bytes encode_header(const MessageHeader& h);

// The exact byte string handed to sign/verify: header bytes || payload.
// payload_len in the header is taken as given.
Bytes signed_bytes(const MessageHeader& header, ByteView payload);
inline Bytes signed_bytes(const SignedEnvelope& e) { return signed_bytes(e.header, e.payload); }

// header || payload || u32 signature length || signature.
Bytes encode_envelope(const SignedEnvelope& e);
// Throws kMalformedEnvelope on any framing defect, including trailing bytes.
SignedEnvelope decode_envelope(ByteView bytes);

// Builds header + payload, signs signed_bytes with `keypair`, returns the
// envelope. `bind_context` = false signs the payload alone (the unbound form
// in which round and sender are not authenticated).
SignedEnvelope make_envelope(MsgType type, std::uint32_t round, std::uint32_t sender_id,
                             Bytes payload, const sig::KeyPair& keypair,
                             const std::optional<sig::Seed>& entropy = std::nullopt,
                             bool bind_context = true);

// Checks the envelope's signature against `public_key` using the same
// binding rule as make_envelope.
bool verify_envelope(const SignedEnvelope& e, ByteView public_key, sig::ParameterSet params,
                     bool bind_context = true);

}  // namespace pqfl::codec
