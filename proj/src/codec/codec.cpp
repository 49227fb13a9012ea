#include "pqfl/codec/codec.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "pqfl/error.hpp"

namespace pqfl::codec {
namespace {

bool product_fits(const std::vector<std::uint64_t>& shape, std::uint64_t& out) {
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) {
    if (d == 0) return false;
    if (n > std::numeric_limits<std::uint64_t>::max() / d) return false;
    n *= d;
  }
  out = n;
  return true;
}

[[noreturn]] void malformed_envelope(const std::string& why) {
  throw Error(ErrorCode::kMalformedEnvelope, why);
}

}  // namespace

ParameterVector ParameterVector::flat(std::vector<float> values) {
  ParameterVector p;
  p.shape = {static_cast<std::uint64_t>(values.size())};
  p.values = std::move(values);
  return p;
}

ParameterVector ParameterVector::zeros(std::size_t n) {
  return flat(std::vector<float>(n, 0.0f));
}

bool operator==(const ParameterVector& a, const ParameterVector& b) {
  if (a.shape != b.shape || a.values.size() != b.values.size()) return false;
  return a.values.empty() ||
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0;
}

std::size_t encoded_params_size(std::size_t rank, std::size_t count) {
  return 4 + 8 * rank + 4 * count;
}

Bytes encode_params(const ParameterVector& p) {
  std::uint64_t count = 0;
  if (p.shape.empty() || !product_fits(p.shape, count) || count != p.values.size()) {
    throw Error(ErrorCode::kMalformedPayload, "shape does not match value count");
  }
  Bytes out;
  out.reserve(encoded_params_size(p.shape.size(), p.values.size()));
  put_u32_le(out, static_cast<std::uint32_t>(p.shape.size()));
  for (std::uint64_t d : p.shape) put_u64_le(out, d);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const float v = p.values[i];
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFiniteValue, "value at index " + std::to_string(i));
    }
    put_u32_le(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ParameterVector decode_params(ByteView bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::kMalformedPayload, "truncated rank");
  const std::uint32_t rank = get_u32_le(bytes.data());
  if (rank == 0) throw Error(ErrorCode::kMalformedPayload, "rank 0");
  if ((bytes.size() - 4) / 8 < rank) throw Error(ErrorCode::kMalformedPayload, "truncated shape");

  ParameterVector p;
  p.shape.resize(rank);
  const std::uint8_t* cursor = bytes.data() + 4;
  for (std::uint32_t i = 0; i < rank; ++i, cursor += 8) p.shape[i] = get_u64_le(cursor);

  std::uint64_t count = 0;
  if (!product_fits(p.shape, count)) {
    throw Error(ErrorCode::kMalformedPayload, "zero dimension or element count overflow");
  }
  const std::size_t remaining = bytes.size() - 4 - 8 * static_cast<std::size_t>(rank);
  if (count > remaining / 4 || count * 4 != remaining) {
    throw Error(ErrorCode::kMalformedPayload, "value bytes do not match shape");
  }
  p.values.resize(count);
  for (std::size_t i = 0; i < count; ++i, cursor += 4) {
    const float v = std::bit_cast<float>(get_u32_le(cursor));
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFiniteValue, "value at index " + std::to_string(i));
    }
    p.values[i] = v;
  }
  return p;
}

Bytes encode_header(const MessageHeader& h) {
  Bytes out;
  out.reserve(kHeaderSize);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u8(out, kVersion);
  put_u8(out, static_cast<std::uint8_t>(h.msg_type));
  put_u8(out, sig::to_wire(h.scheme));
  put_u32_le(out, h.round);
  put_u32_le(out, h.sender_id);
  put_u64_le(out, h.payload_len);
  return out;
}

Bytes signed_bytes(const MessageHeader& header, ByteView payload) {
  Bytes out = encode_header(header);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Bytes encode_envelope(const SignedEnvelope& e) {
  if (e.header.payload_len != e.payload.size()) {
    malformed_envelope("payload_len does not match payload size");
  }
  if (e.signature.bytes.size() > std::numeric_limits<std::uint32_t>::max()) {
    malformed_envelope("signature too long");
  }
  Bytes out = encode_header(e.header);
  out.reserve(kHeaderSize + e.payload.size() + 4 + e.signature.bytes.size());
  out.insert(out.end(), e.payload.begin(), e.payload.end());
  put_u32_le(out, static_cast<std::uint32_t>(e.signature.bytes.size()));
  out.insert(out.end(), e.signature.bytes.begin(), e.signature.bytes.end());
  return out;
}

SignedEnvelope decode_envelope(ByteView bytes) {
  if (bytes.size() < kHeaderSize + 4) malformed_envelope("shorter than header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) malformed_envelope("bad magic");
  if (bytes[4] != kVersion) malformed_envelope("unsupported version " + std::to_string(bytes[4]));
  const std::uint8_t type = bytes[5];
  if (type < 1 || type > 3) malformed_envelope("unknown msg_type " + std::to_string(type));
  const std::uint8_t scheme = bytes[6];
  if (scheme < 1 || scheme > 4) malformed_envelope("unknown scheme_id " + std::to_string(scheme));

  SignedEnvelope e;
  e.header.msg_type = static_cast<MsgType>(type);
  e.header.scheme = static_cast<sig::SchemeId>(scheme);
  e.header.round = get_u32_le(bytes.data() + 7);
  e.header.sender_id = get_u32_le(bytes.data() + 11);
  e.header.payload_len = get_u64_le(bytes.data() + 15);

  const std::size_t body = bytes.size() - kHeaderSize - 4;
  if (e.header.payload_len > body) malformed_envelope("payload_len exceeds message");
  const std::size_t plen = static_cast<std::size_t>(e.header.payload_len);
  const std::uint8_t* p = bytes.data() + kHeaderSize;
  e.payload.assign(p, p + plen);
  const std::uint32_t sig_len = get_u32_le(p + plen);
  if (sig_len != body - plen) malformed_envelope("signature length mismatch");
  e.signature.scheme = e.header.scheme;
  e.signature.bytes.assign(p + plen + 4, p + plen + 4 + sig_len);
  return e;
}

SignedEnvelope make_envelope(MsgType type, std::uint32_t round, std::uint32_t sender_id,
                             Bytes payload, const sig::KeyPair& keypair,
                             const std::optional<sig::Seed>& entropy, bool bind_context) {
  SignedEnvelope e;
  e.header.msg_type = type;
  e.header.scheme = keypair.scheme();
  e.header.round = round;
  e.header.sender_id = sender_id;
  e.header.payload_len = payload.size();
  e.payload = std::move(payload);
  if (bind_context) {
    e.signature = sig::sign(keypair, signed_bytes(e), entropy);
  } else {
    e.signature = sig::sign(keypair, e.payload, entropy);
  }
  return e;
}

bool verify_envelope(const SignedEnvelope& e, ByteView public_key, sig::ParameterSet params,
                     bool bind_context) {
  if (e.header.scheme != sig::scheme_of(params)) return false;
  if (bind_context) {
    return sig::verify(public_key, params, signed_bytes(e), e.signature);
  }
  return sig::verify(public_key, params, e.payload, e.signature);
}

}  // namespace pqfl::codec
