#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "pqfl/bytes.hpp"
#include "pqfl/fedcore/rng.hpp"
#include "pqfl/fedcore/train.hpp"

namespace pqfl::channel {

enum class AttackKind { kNone, kBitFlip, kSubstitute, kReplay, kStrip };
enum class Direction { kClientToServer, kServerToClient, kBoth };

// Where a substitution attack gets its malicious update from. Negate sends
// -scale * delta; Gaussian sends scale * N(0, 1) noise of the same shape.
enum class PoisonSource { kNegate, kGaussian };

struct PoisonSpec {
  PoisonSource source = PoisonSource::kNegate;
  double scale = 1.0;
};

struct AttackConfig {
  AttackKind kind = AttackKind::kNone;
  std::optional<std::uint32_t> target;  // client id; empty = every client
  Direction direction = Direction::kClientToServer;
  double probability = 1.0;
  std::uint64_t seed = 0;
  std::optional<PoisonSpec> poison;  // required for kSubstitute

  // Throws kConfigError for a probability outside [0, 1] or a substitution
  // attack without a poison source.
  void validate() const;
  // True if messages to or from `client_id` travelling in `dir` (never kBoth)
  // are exposed to the attacker.
  bool covers(Direction dir, std::uint32_t client_id) const;
};

std::string_view to_string(AttackKind kind);
std::string_view to_string(Direction dir);
AttackKind parse_attack_kind(std::string_view s);
Direction parse_direction(std::string_view s);

// Parses "kind:key=value:..." with keys target, p, dir, seed, poison, scale.
// Example: "substitute:target=1:p=1.0:poison=negate". Throws kConfigError.
AttackConfig parse_attack(std::string_view spec);
std::string format_attack(const AttackConfig& cfg);

// Applies the configured in-place tampering (bit flip, substitution, strip)
// with probability cfg.probability. One uniform draw is consumed per call
// regardless of the outcome. Replay is stateful and handled by Channel, so
// kReplay and kNone return msg unchanged.
Bytes deliver(ByteView msg, const AttackConfig& cfg, fedcore::Rng& rng);

// Replaces the payload of an encoded envelope with encode_params(poison.delta)
// and keeps the original header and signature.
Bytes substitute_update(ByteView original, const fedcore::ModelUpdate& poison);

// Builds the poison for `original` per `spec`. Returns nullopt when the
// payload cannot be decoded.
std::optional<fedcore::ModelUpdate> make_poison(ByteView original, const PoisonSpec& spec,
                                                fedcore::Rng& rng);

// Uniformly chosen prior envelope, unmodified. `history` must be non-empty.
Bytes replay(std::span<const Bytes> history, fedcore::Rng& rng);

}  // namespace pqfl::channel
