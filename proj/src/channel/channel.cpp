#include "pqfl/channel/channel.hpp"

#include <utility>

namespace pqfl::channel {

Channel::Channel(AttackConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) { cfg_.validate(); }

std::vector<Bytes> Channel::transmit(Direction dir, std::uint32_t client_id, Bytes msg) {
  std::lock_guard lock(mu_);
  const bool up = dir == Direction::kClientToServer;
  DirectionStats& st = up ? stats_.uplink : stats_.downlink;
  std::vector<Bytes>& history = up ? up_history_ : down_history_;
  const std::uint64_t seq = st.sent++;

  std::vector<Bytes> out;
  if (!cfg_.covers(dir, client_id)) {
    out.push_back(std::move(msg));
  } else if (cfg_.kind == AttackKind::kReplay) {
    // The replay is chosen from messages seen before this one.
    const bool fire = rng_.uniform() < cfg_.probability;
    if (fire && !history.empty()) {
      Bytes injected = replay(history, rng_);
      history.push_back(msg);
      out.push_back(std::move(msg));
      out.push_back(std::move(injected));
      ++st.replayed;
      events_.push_back({dir, client_id, cfg_.kind, seq});
    } else {
      history.push_back(msg);
      out.push_back(std::move(msg));
    }
  } else {
    Bytes delivered = deliver(msg, cfg_, rng_);
    if (delivered != msg) {
      ++st.tampered;
      events_.push_back({dir, client_id, cfg_.kind, seq});
    }
    out.push_back(std::move(delivered));
  }
  for (const Bytes& m : out) {
    ++st.delivered;
    st.bytes += m.size();
  }
  return out;
}

ChannelStats Channel::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::vector<AttackEvent> Channel::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

}  // namespace pqfl::channel
