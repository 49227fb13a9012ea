#include "entropy.hpp"

#include <sys/random.h>

#include <cerrno>
#include <cstddef>

#include "pqclean.hpp"
#include "pqfl/error.hpp"

namespace pqfl::sig::detail {

struct ScopedEntropy::Stream {
  shake256incctx ctx;
};

namespace {

thread_local ScopedEntropy::Stream* tls_stream = nullptr;

}  // namespace

ScopedEntropy::ScopedEntropy(std::uint8_t label, const Seed& seed)
    : stream_(new Stream), previous_(tls_stream) {
  static constexpr std::uint8_t kDomain[] = {'p', 'q', 'f', 'l', '-', 'd', 'r', 'b', 'g'};
  shake256_inc_init(&stream_->ctx);
  shake256_inc_absorb(&stream_->ctx, kDomain, sizeof(kDomain));
  shake256_inc_absorb(&stream_->ctx, &label, 1);
  shake256_inc_absorb(&stream_->ctx, seed.data(), seed.size());
  shake256_inc_finalize(&stream_->ctx);
  tls_stream = stream_;
}

ScopedEntropy::~ScopedEntropy() {
  tls_stream = previous_;
  shake256_inc_ctx_release(&stream_->ctx);
  delete stream_;
}

void system_random(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    const ssize_t got = getrandom(out.data() + done, out.size() - done, 0);
    if (got < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kAdapterFailure, "getrandom failed");
    }
    done += static_cast<std::size_t>(got);
  }
}

}  // namespace pqfl::sig::detail

// Entropy hook required by the PQClean sources.
extern "C" int PQCLEAN_randombytes(std::uint8_t* output, std::size_t n) {
  if (auto* stream = pqfl::sig::detail::tls_stream) {
    shake256_inc_squeeze(output, n, &stream->ctx);
    return 0;
  }
  try {
    pqfl::sig::detail::system_random({output, n});
  } catch (...) {
    return -1;
  }
  return 0;
}
