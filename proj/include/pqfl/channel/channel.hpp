#pragma once

#include <cstdint>
#include <mutex>
#include <vector>

#include "pqfl/bytes.hpp"
#include "pqfl/channel/attack.hpp"
#include "pqfl/fedcore/rng.hpp"

namespace pqfl::channel {

struct DirectionStats {
  std::uint64_t sent = 0;       // messages handed to the channel
  std::uint64_t delivered = 0;  // messages handed to receivers, injections included
  std::uint64_t tampered = 0;
  std::uint64_t replayed = 0;
  std::uint64_t bytes = 0;      // bytes delivered

  friend bool operator==(const DirectionStats&, const DirectionStats&) = default;
};

struct ChannelStats {
  DirectionStats uplink;    // client -> server
  DirectionStats downlink;  // server -> client

  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

struct AttackEvent {
  Direction direction;
  std::uint32_t client_id;
  AttackKind kind;
  std::uint64_t sequence;  // index of the message within its direction
};

// Simulated link between the server and its clients. All attack decisions
// come from one generator seeded with cfg.seed, so the outcome depends only on
// the seed and the order of transmit() calls. Thread-safe.
class Channel {
 public:
  explicit Channel(AttackConfig cfg = {});

  // Passes one message between the server and `client_id` (the client at the
  // other end, whichever direction). Returns what the receiver gets, in
  // order: the possibly tampered message, then any replayed injection.
  std::vector<Bytes> transmit(Direction dir, std::uint32_t client_id, Bytes msg);

  const AttackConfig& config() const { return cfg_; }
  ChannelStats stats() const;
  std::vector<AttackEvent> events() const;

 private:
  AttackConfig cfg_;
  mutable std::mutex mu_;
  fedcore::Rng rng_;
  std::vector<Bytes> up_history_;
  std::vector<Bytes> down_history_;
  ChannelStats stats_;
  std::vector<AttackEvent> events_;
};

}  // namespace pqfl::channel
