#pragma once

#include <cstdint>
#include <span>

#include "pqfl/sig/scheme.hpp"

namespace pqfl::sig::detail {

// While alive, routes this thread's PQClean randombytes() calls through a
// SHAKE256 stream keyed by (label, seed). Restores the previous source on
// destruction, so scopes nest.
class ScopedEntropy {
 public:
  ScopedEntropy(std::uint8_t label, const Seed& seed);
  ~ScopedEntropy();

  ScopedEntropy(const ScopedEntropy&) = delete;
  ScopedEntropy& operator=(const ScopedEntropy&) = delete;

  struct Stream;

 private:
  Stream* stream_;
  Stream* previous_;
};

void system_random(std::span<std::uint8_t> out);

}  // namespace pqfl::sig::detail
