#include "pqfl/channel/attack.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <string>
#include <vector>

#include "pqfl/codec/codec.hpp"
#include "pqfl/error.hpp"

namespace pqfl::channel {
namespace {

[[noreturn]] void bad_config(const std::string& what) {
  throw Error(ErrorCode::kConfigError, what);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    bad_config("attack: bad value for " + std::string(key) + ": '" + std::string(value) + "'");
  }
  return out;
}

PoisonSource parse_poison_source(std::string_view s) {
  const std::string v = lower(s);
  if (v == "negate") return PoisonSource::kNegate;
  if (v == "gaussian" || v == "noise") return PoisonSource::kGaussian;
  bad_config("attack: unknown poison source '" + std::string(s) + "'");
}

}  // namespace

void AttackConfig::validate() const {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    bad_config("attack probability must lie in [0, 1]");
  }
  if (kind == AttackKind::kSubstitute && !poison) {
    bad_config("substitution attack needs a poison source");
  }
}

bool AttackConfig::covers(Direction dir, std::uint32_t client_id) const {
  if (kind == AttackKind::kNone) return false;
  if (direction != Direction::kBoth && direction != dir) return false;
  return !target || *target == client_id;
}

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNone: return "none";
    case AttackKind::kBitFlip: return "bitflip";
    case AttackKind::kSubstitute: return "substitute";
    case AttackKind::kReplay: return "replay";
    case AttackKind::kStrip: return "strip";
  }
  return "none";
}

std::string_view to_string(Direction dir) {
  switch (dir) {
    case Direction::kClientToServer: return "up";
    case Direction::kServerToClient: return "down";
    case Direction::kBoth: return "both";
  }
  return "up";
}

AttackKind parse_attack_kind(std::string_view s) {
  const std::string v = lower(s);
  if (v == "none") return AttackKind::kNone;
  if (v == "bitflip") return AttackKind::kBitFlip;
  if (v == "substitute") return AttackKind::kSubstitute;
  if (v == "replay") return AttackKind::kReplay;
  if (v == "strip") return AttackKind::kStrip;
  bad_config("unknown attack kind '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
  const std::string v = lower(s);
  if (v == "up" || v == "c2s") return Direction::kClientToServer;
  if (v == "down" || v == "s2c") return Direction::kServerToClient;
  if (v == "both") return Direction::kBoth;
  bad_config("unknown attack direction '" + std::string(s) + "'");
}

AttackConfig parse_attack(std::string_view spec) {
  std::vector<std::string_view> parts;
  for (std::size_t start = 0;;) {
    const std::size_t colon = spec.find(':', start);
    parts.push_back(spec.substr(start, colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  AttackConfig cfg;
  cfg.kind = parse_attack_kind(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::size_t eq = parts[i].find('=');
    if (eq == std::string_view::npos) bad_config("attack: expected key=value, got '" + std::string(parts[i]) + "'");
    const std::string key = lower(parts[i].substr(0, eq));
    const std::string_view value = parts[i].substr(eq + 1);
    if (key == "target") {
      if (lower(value) == "all") {
        cfg.target.reset();
      } else {
        cfg.target = parse_number<std::uint32_t>(key, value);
      }
    } else if (key == "p" || key == "probability") {
      cfg.probability = parse_number<double>(key, value);
    } else if (key == "dir" || key == "direction") {
      cfg.direction = parse_direction(value);
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "poison") {
      if (!cfg.poison) cfg.poison = PoisonSpec{};
      cfg.poison->source = parse_poison_source(value);
    } else if (key == "scale") {
      if (!cfg.poison) cfg.poison = PoisonSpec{};
      cfg.poison->scale = parse_number<double>(key, value);
    } else {
      bad_config("attack: unknown key '" + key + "'");
    }
  }
  if (cfg.kind == AttackKind::kSubstitute && !cfg.poison) cfg.poison = PoisonSpec{};
  cfg.validate();
  return cfg;
}

std::string format_attack(const AttackConfig& cfg) {
  std::string out(to_string(cfg.kind));
  if (cfg.kind == AttackKind::kNone) return out;
  out += ":target=" + (cfg.target ? std::to_string(*cfg.target) : std::string("all"));
  out += ":p=" + std::to_string(cfg.probability);
  out += ":dir=" + std::string(to_string(cfg.direction));
  if (cfg.poison) {
    out += cfg.poison->source == PoisonSource::kNegate ? ":poison=negate" : ":poison=gaussian";
    out += ":scale=" + std::to_string(cfg.poison->scale);
  }
  return out;
}

std::optional<fedcore::ModelUpdate> make_poison(ByteView original, const PoisonSpec& spec,
                                                fedcore::Rng& rng) {
  fedcore::ModelUpdate poison;
  try {
    const codec::SignedEnvelope env = codec::decode_envelope(original);
    poison.delta = codec::decode_params(env.payload);
    poison.client_id = env.header.sender_id;
    poison.round = env.header.round;
  } catch (const Error&) {
    return std::nullopt;
  }
  for (float& v : poison.delta.values) {
    const double x = spec.source == PoisonSource::kNegate ? -static_cast<double>(v) : rng.normal();
    v = static_cast<float>(spec.scale * x);
  }
  return poison;
}

Bytes substitute_update(ByteView original, const fedcore::ModelUpdate& poison) {
  codec::SignedEnvelope env = codec::decode_envelope(original);
  env.payload = codec::encode_params(poison.delta);
  env.header.payload_len = env.payload.size();
  return codec::encode_envelope(env);
}

Bytes deliver(ByteView msg, const AttackConfig& cfg, fedcore::Rng& rng) {
  Bytes out(msg.begin(), msg.end());
  if (cfg.kind == AttackKind::kNone || cfg.kind == AttackKind::kReplay) return out;
  if (rng.uniform() >= cfg.probability || out.empty()) return out;

  switch (cfg.kind) {
    case AttackKind::kBitFlip: {
      const std::uint64_t bit = rng.below(out.size() * 8);
      out[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      break;
    }
    case AttackKind::kSubstitute: {
      if (auto poison = make_poison(msg, *cfg.poison, rng)) out = substitute_update(msg, *poison);
      break;
    }
    case AttackKind::kStrip: {
      try {
        codec::SignedEnvelope env = codec::decode_envelope(msg);
        env.signature.bytes.clear();
        out = codec::encode_envelope(env);
      } catch (const Error&) {
      }
      break;
    }
    default: break;
  }
  return out;
}

Bytes replay(std::span<const Bytes> history, fedcore::Rng& rng) {
  if (history.empty()) throw Error(ErrorCode::kConfigError, "replay needs a non-empty history");
  return history[rng.below(history.size())];
}

}  // namespace pqfl::channel
