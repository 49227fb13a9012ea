// Acceptance gate. Each criterion prints one [PASS]/[FAIL] line; the exit
// status is non-zero if any selected criterion fails.
//
//   acceptance              run all criteria
//   acceptance --criterion N

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pqfl/bench/csv.hpp"
#include "pqfl/bench/metrics.hpp"
#include "pqfl/bench/microbench.hpp"
#include "pqfl/channel/attack.hpp"
#include "pqfl/codec/codec.hpp"
#include "pqfl/error.hpp"
#include "pqfl/fedcore/rng.hpp"
#include "pqfl/sig/scheme.hpp"

namespace {

using namespace pqfl;
using sig::ParameterSet;

constexpr std::uint64_t kMasterSeed = 2024;

const std::vector<ParameterSet> kFourSchemes = {ParameterSet::kMlDsa44, ParameterSet::kFalcon1024,
                                                ParameterSet::kSphincsSha2_128s,
                                                ParameterSet::kHmacSha256};

// Collects failed checks and free-form notes for one criterion.
class Report {
 public:
  void check(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 8) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool passed() const { return failed_ == 0; }
  std::string summary() const {
    std::ostringstream os;
    os << checks_ << " checks";
    if (failed_ > 0) os << ", " << failed_ << " failed";
    for (const auto& n : notes_) os << "; " << n;
    for (const auto& f : failures_) os << "\n    failed: " << f;
    return os.str();
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string name_of(ParameterSet p) { return std::string(sig::parameter_set_name(p)); }

Bytes random_bytes(fedcore::Rng& rng, std::size_t n) {
  Bytes out(n);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const std::uint64_t w = rng.next_u64();
    std::memcpy(out.data() + i, &w, 8);
  }
  for (; i < n; ++i) out[i] = static_cast<std::uint8_t>(rng.next_u64());
  return out;
}

// M=10, T=10 on the default synthetic task.
cli::RunSpec standard_spec(ParameterSet params) {
  cli::RunSpec spec;
  spec.params = params;
  spec.train.num_clients = 10;
  spec.train.num_rounds = 10;
  spec.train.seed = kMasterSeed;
  return spec;
}

oracle::PlainRun plain_run_for(const cli::RunSpec& spec, std::vector<std::uint32_t> skip = {}) {
  oracle::PlainRun run = testing::plain_run_for(spec);
  run.skip = std::move(skip);
  return run;
}

// 1. Sign/verify round trips, wrong keys and single-bit flips per scheme.
void criterion1(Report& r) {
  constexpr std::size_t kMaxPayload = std::size_t{4} << 20;
  for (ParameterSet params : kFourSchemes) {
    const std::string name = name_of(params);
    fedcore::Rng rng(fedcore::derive_seed(kMasterSeed, fedcore::SeedTag::kSigning, static_cast<int>(params)));
    const sig::KeyPair kp = sig::keygen(params);
    const sig::KeyPair other = sig::keygen(params);

    std::size_t ok = 0, wrong_key_rejected = 0;
    for (int i = 0; i < 100; ++i) {
      // Log-uniform sizes between 1 B and 4 MiB, endpoints included.
      std::size_t size = i == 0 ? 1 : i == 1 ? kMaxPayload
                                             : static_cast<std::size_t>(std::exp(rng.uniform(0.0, std::log(double(kMaxPayload)))));
      size = std::clamp<std::size_t>(size, 1, kMaxPayload);
      const Bytes msg = random_bytes(rng, size);
      const auto s = sig::sign(kp, msg);
      ok += sig::verify(kp.public_key, params, msg, s);
      wrong_key_rejected += !sig::verify(other.public_key, params, msg, s);
    }
    r.check(ok == 100, name + ": " + std::to_string(ok) + "/100 round trips verified");
    r.check(wrong_key_rejected == 100,
            name + ": " + std::to_string(wrong_key_rejected) + "/100 wrong-key verifications rejected");

    const Bytes msg = random_bytes(rng, 4096);
    const auto s = sig::sign(kp, msg);
    std::size_t payload_rejected = 0, sig_rejected = 0;
    for (int i = 0; i < 256; ++i) {
      Bytes m = msg;
      const std::size_t bit = rng.below(m.size() * 8);
      m[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      payload_rejected += !sig::verify(kp.public_key, params, m, s);

      sig::SignatureBytes t = s;
      const std::size_t sbit = rng.below(t.bytes.size() * 8);
      t.bytes[sbit / 8] ^= static_cast<std::uint8_t>(1u << (sbit % 8));
      sig_rejected += !sig::verify(kp.public_key, params, msg, t);
    }
    r.check(payload_rejected == 256, name + ": " + std::to_string(payload_rejected) + "/256 payload flips rejected");
    r.check(sig_rejected == 256, name + ": " + std::to_string(sig_rejected) + "/256 signature flips rejected");
  }
  r.note("4 schemes x (100 round trips, 100 wrong keys, 512 bit flips)");
}

// 2. Latency and size orderings at a 1 MiB payload.
void criterion2(Report& r) {
  const std::vector<ParameterSet> schemes = {ParameterSet::kMlDsa44, ParameterSet::kFalcon1024,
                                             ParameterSet::kSphincsSha2_128s};
  const std::vector<std::size_t> sizes = {std::size_t{1} << 20};
  bench::MicrobenchOptions opts;
  opts.iterations = 30;
  opts.include_keygen = false;
  const auto records = bench::microbench(schemes, sizes, opts);

  std::map<std::string, double> cost;
  for (const auto& rec : records) {
    r.check(rec.iterations >= 30, rec.scheme + " iterations >= 30");
    cost[rec.scheme] += rec.median_s;
  }
  const std::string d = sig::metadata(ParameterSet::kMlDsa44).name;
  const std::string f = sig::metadata(ParameterSet::kFalcon1024).name;
  const std::string s = sig::metadata(ParameterSet::kSphincsSha2_128s).name;
  r.check(cost[d] < cost[f], "sign+verify Dilithium < Falcon");
  r.check(cost[f] < cost[s], "sign+verify Falcon < SPHINCS+");
  r.note("median sign+verify ms: " + d + " " + fmt("%.3f", cost[d] * 1e3) + ", " + f + " " +
         fmt("%.3f", cost[f] * 1e3) + ", " + s + " " + fmt("%.3f", cost[s] * 1e3));

  const auto& md = sig::metadata(ParameterSet::kMlDsa44);
  const auto& mf = sig::metadata(ParameterSet::kFalcon1024);
  const auto& ms = sig::metadata(ParameterSet::kSphincsSha2_128s);
  // Falcon signatures vary in length; compare the largest one observed.
  fedcore::Rng rng(5);
  const Bytes msg = random_bytes(rng, std::size_t{1} << 20);
  std::size_t falcon_max = 0;
  const auto fk = sig::keygen(ParameterSet::kFalcon1024);
  for (int i = 0; i < 30; ++i) falcon_max = std::max(falcon_max, sig::sign(fk, msg).bytes.size());
  const std::size_t dil_sig = sig::sign(sig::keygen(ParameterSet::kMlDsa44), msg).bytes.size();
  r.check(falcon_max < dil_sig, "signature size Falcon < Dilithium");
  r.check(dil_sig < ms.signature_max_len, "signature size Dilithium < SPHINCS+");
  r.check(mf.signature_max_len < md.signature_max_len, "max signature size Falcon < Dilithium");
  r.check(ms.public_key_len < md.public_key_len, "public key SPHINCS+ < Dilithium");
  r.check(md.public_key_len < mf.public_key_len, "public key Dilithium < Falcon");
  r.note("sig bytes " + std::to_string(falcon_max) + " < " + std::to_string(dil_sig) + " < " +
         std::to_string(ms.signature_max_len) + ", pk bytes " + std::to_string(ms.public_key_len) +
         " < " + std::to_string(md.public_key_len) + " < " + std::to_string(mf.public_key_len));
}

// 3. The signature scheme does not change the trained model.
void criterion3(Report& r) {
  std::vector<codec::ParameterVector> finals;
  std::vector<double> losses;
  for (ParameterSet params : kFourSchemes) {
    const auto result = cli::run_experiment(standard_spec(params));
    finals.push_back(result.training.model.params);
    losses.push_back(result.metrics.back().global_loss);
    for (const auto& o : result.training.outcomes) {
      r.check(o.verified_set_size() == 10, name_of(params) + " round " + std::to_string(o.round) + " |S| = 10");
    }
  }
  for (std::size_t i = 1; i < finals.size(); ++i) {
    r.check(finals[i] == finals[0], name_of(kFourSchemes[i]) + " final parameters bit-identical to " +
                                         name_of(kFourSchemes[0]));
    r.check(losses[i] == losses[0], name_of(kFourSchemes[i]) + " final loss identical");
  }
  r.note("final loss " + fmt("%.17g", losses[0]) + " for all schemes");
}

// 4. Secured run equals plain federated averaging.
void criterion4(Report& r) {
  for (ParameterSet params : {ParameterSet::kMlDsa44, ParameterSet::kHmacSha256}) {
    const auto spec = standard_spec(params);
    const auto result = cli::run_experiment(spec);
    const auto expected = oracle::plain_fedavg(plain_run_for(spec));
    r.check(result.training.model.params == expected.params,
            name_of(params) + " final parameters bit-identical to plain FedAvg");
    r.check(result.training.model.round == expected.round, name_of(params) + " round counter");
  }
}

// 5. Tampered updates from client 1 never enter S.
void criterion5(Report& r) {
  const auto spec0 = standard_spec(ParameterSet::kMlDsa44);
  const auto expected = oracle::plain_fedavg(plain_run_for(spec0, {1}));
  for (const char* attack : {"bitflip:target=1:p=1.0", "substitute:target=1:p=1.0:poison=negate",
                             "substitute:target=1:p=1.0:poison=gaussian:scale=5"}) {
    auto spec = spec0;
    spec.attack = channel::parse_attack(attack);
    const auto result = cli::run_experiment(spec);
    std::size_t tampered_in_s = 0;
    for (const auto& ev : result.attack_events) {
      const auto& o = result.training.outcomes.at(ev.sequence / spec.train.num_clients);
      const auto& s = o.verified_clients;
      tampered_in_s += std::count(s.begin(), s.end(), ev.client_id);
    }
    r.check(result.attack_events.size() == spec.train.num_rounds,
            std::string(attack) + ": one tampered update per round");
    r.check(tampered_in_s == 0, std::string(attack) + ": " + std::to_string(tampered_in_s) + " tampered updates in S");
    for (const auto& o : result.training.outcomes) {
      r.check(o.verified_set_size() == 9 && o.rejections.size() == 1,
              std::string(attack) + ": round " + std::to_string(o.round) + " |S| = 9");
    }
    r.check(result.training.model.params == expected.params,
            std::string(attack) + ": final model equals the honest 9-client oracle");
  }
}

// 6. Without verification the same poisoning hurts the model.
void criterion6(Report& r) {
  auto secured = standard_spec(ParameterSet::kMlDsa44);
  secured.attack = channel::parse_attack("substitute:target=1:p=1.0:poison=negate");
  auto baseline = secured;
  baseline.options.verify_updates = false;
  const auto a = cli::run_experiment(secured);
  const auto b = cli::run_experiment(baseline);
  const double secured_loss = a.metrics.back().global_loss;
  const double baseline_loss = b.metrics.back().global_loss;
  r.check(baseline_loss > secured_loss, "unverified final loss exceeds secured final loss");
  std::size_t baseline_s = 0;
  for (const auto& o : b.training.outcomes) baseline_s += o.verified_set_size();
  r.check(baseline_s == 100, "unverified run aggregates the poisoned update every round");
  r.note("secured " + fmt("%.6f", secured_loss) + ", unverified " + fmt("%.6f", baseline_loss) +
         ", margin " + fmt("%.6f", baseline_loss - secured_loss));
}

// 7. Replays in both directions are detected and never aggregated.
void criterion7(Report& r) {
  auto spec = standard_spec(ParameterSet::kHmacSha256);
  spec.train.num_rounds = 50;
  spec.dataset.synthetic.num_samples = 500;
  spec.hidden = {8};
  const auto clean = cli::run_experiment(spec);
  spec.attack = channel::parse_attack("replay:dir=both:p=0.7:seed=3");
  const auto attacked = cli::run_experiment(spec);

  const auto& st = attacked.channel_stats;
  const std::uint64_t messages = st.uplink.sent + st.downlink.sent;
  r.check(messages >= 1000, std::to_string(messages) + " messages in the campaign");
  std::size_t stale = 0, duplicate = 0, other = 0, extra_broadcasts = 0;
  for (const auto& o : attacked.training.outcomes) {
    r.check(o.verified_set_size() == 10, "round " + std::to_string(o.round) + " |S| = 10");
    for (const auto& rej : o.rejections) {
      if (rej.reason == protocol::RejectReason::kReplayDetected) {
        ++stale;
      } else if (rej.reason == protocol::RejectReason::kDuplicate) {
        ++duplicate;
      } else {
        ++other;
      }
    }
    for (const auto& rej : o.model_rejections) {
      extra_broadcasts += rej.reason == protocol::RejectReason::kReplayDetected;
    }
  }
  r.check(other == 0, "uplink replays rejected only as stale or duplicate");
  r.check(stale + duplicate == st.uplink.replayed, "every uplink replay rejected");
  r.check(stale > 0, "prior-round uplink replays rejected as ReplayDetected");
  r.check(extra_broadcasts == st.downlink.replayed, "every downlink replay refused by its client");
  r.check(attacked.training.model.params == clean.training.model.params,
          "final model equals the attack-free run");
  r.note(std::to_string(st.uplink.replayed) + " uplink replays (" + std::to_string(stale) +
         " prior-round, " + std::to_string(duplicate) + " same-round), " +
         std::to_string(st.downlink.replayed) + " downlink replays");
}

// 8. Codec round trips and the fixed 1.0f example.
void criterion8(Report& r) {
  const Bytes one = codec::encode_params(codec::ParameterVector::flat({1.0f}));
  r.check(one == Bytes{0x01, 0, 0, 0, 0x01, 0, 0, 0, 0, 0, 0, 0, 0x00, 0x00, 0x80, 0x3F},
          "1.0f example bytes");

  fedcore::Rng rng(8);
  std::size_t param_ok = 0, env_ok = 0;
  const sig::KeyPair kp = sig::keygen(ParameterSet::kMlDsa44);
  for (int i = 0; i < 1000; ++i) {
    codec::ParameterVector p;
    const std::size_t rank = 1 + rng.below(3);
    std::size_t count = 1;
    for (std::size_t d = 0; d < rank; ++d) {
      p.shape.push_back(1 + rng.below(6));
      count *= p.shape.back();
    }
    for (std::size_t k = 0; k < count; ++k) {
      float v;
      do {
        const auto bits = static_cast<std::uint32_t>(rng.next_u64());
        std::memcpy(&v, &bits, 4);
      } while (!std::isfinite(v));
      p.values.push_back(v);
    }
    const Bytes enc = codec::encode_params(p);
    const auto dec = codec::decode_params(enc);
    param_ok += dec == p && codec::encode_params(dec) == enc &&
                enc == oracle::encode_params(p.shape, p.values) &&
                std::memcmp(dec.values.data(), p.values.data(), 4 * count) == 0;

    codec::SignedEnvelope e;
    e.header.msg_type = static_cast<codec::MsgType>(1 + rng.below(3));
    e.header.scheme = sig::SchemeId::kDilithium;
    e.header.round = static_cast<std::uint32_t>(rng.next_u64());
    e.header.sender_id = static_cast<std::uint32_t>(rng.next_u64());
    e.payload = enc;
    e.header.payload_len = enc.size();
    if (i % 50 == 0) {
      e.signature = sig::sign(kp, codec::signed_bytes(e));
    } else {
      e.signature.scheme = sig::SchemeId::kDilithium;
      e.signature.bytes = random_bytes(rng, rng.below(3000));
    }
    const Bytes wire = codec::encode_envelope(e);
    const auto back = codec::decode_envelope(wire);
    env_ok += back == e && codec::encode_envelope(back) == wire &&
              wire.size() == codec::kHeaderSize + enc.size() + 4 + e.signature.bytes.size();
  }
  r.check(param_ok == 1000, std::to_string(param_ok) + "/1000 parameter round trips bit-exact");
  r.check(env_ok == 1000, std::to_string(env_ok) + "/1000 envelope round trips bit-exact");
}

// 9. Analytic gradients against central finite differences.
void criterion9(Report& r) {
  fedcore::Rng rng(9);
  double worst = 0.0;
  const int instances = 40;
  for (int i = 0; i < instances; ++i) {
    const std::size_t features = 2 + rng.below(6);
    const std::size_t classes = 2 + rng.below(4);
    std::vector<std::size_t> hidden;
    for (std::size_t l = 0, depth = rng.below(3); l < depth; ++l) hidden.push_back(2 + rng.below(5));
    const fedcore::Architecture arch{features, hidden, classes};
    const auto data = fedcore::make_synthetic({5 + rng.below(20), features, classes, rng.next_u64(), 1.0});
    const auto init = fedcore::init_model(arch, rng.next_u64());
    std::vector<double> params(init.params.values.begin(), init.params.values.end());
    // Non-zero biases so that no unit sits exactly at the ReLU kink.
    for (double& v : params) v += 0.05 * rng.normal();
    std::vector<double> grad(params.size());
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    fedcore::loss_and_gradient(arch, params, data, rows, grad);
    const auto fd = oracle::finite_difference_gradient(arch, params, data, 1e-6);
    const double err = oracle::relative_error(grad, fd);
    worst = std::max(worst, err);
    r.check(err < 1e-4, "instance " + std::to_string(i) + " relative error " + fmt("%.3g", err));
  }
  r.note(std::to_string(instances) + " instances, worst relative error " + fmt("%.3g", worst));
}

// 10. TCP and in-process transports agree; CSV byte counts match envelope sizes.
void criterion10(Report& r) {
  const auto dir = std::filesystem::temp_directory_path() / "pqfl_acceptance_c10";
  std::filesystem::create_directories(dir);
  auto spec = standard_spec(ParameterSet::kMlDsa44);
  spec.metrics_path = dir / "inprocess.csv";
  const auto local = cli::run_experiment(spec);
  spec.transport = cli::TransportKind::kTcp;
  spec.metrics_path = dir / "tcp.csv";
  const auto remote = cli::run_experiment(spec);

  r.check(local.training.model.params == remote.training.model.params,
          "TCP final parameters bit-identical to in-process");

  const std::size_t n = local.training.model.params.size();
  const std::size_t envelope = codec::kHeaderSize + (4 + 8 + 4 * n) + 4 +
                               sig::metadata(ParameterSet::kMlDsa44).signature_max_len;
  const std::uint64_t expected = 2 * spec.train.num_clients * envelope;
  for (const auto& file : {dir / "inprocess.csv", dir / "tcp.csv"}) {
    const auto rows = bench::parse_round_csv(bench::csv::read_file(file));
    r.check(rows.size() == spec.train.num_rounds, file.filename().string() + " has one row per round");
    for (const auto& row : rows) {
      r.check(row.payload_bytes == expected, file.filename().string() + " round " +
                                                 std::to_string(row.round) + " payload_bytes " +
                                                 std::to_string(row.payload_bytes) + " != " +
                                                 std::to_string(expected));
    }
  }
  r.note(std::to_string(expected) + " bytes per round (" + std::to_string(envelope) + " per envelope x " +
         std::to_string(2 * spec.train.num_clients) + ")");
  std::filesystem::remove_all(dir);
}

struct Criterion {
  int id;
  const char* title;
  std::function<void(Report&)> run;
};

const std::vector<Criterion> kCriteria = {
    {1, "signature correctness", criterion1},
    {2, "latency and size orderings", criterion2},
    {3, "scheme transparency", criterion3},
    {4, "plain FedAvg equivalence", criterion4},
    {5, "poisoning defense", criterion5},
    {6, "unverified baseline degrades", criterion6},
    {7, "replay defense", criterion7},
    {8, "codec exactness", criterion8},
    {9, "gradient check", criterion9},
    {10, "transport equivalence", criterion10},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      selected.insert(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]...\n", argv[0]);
      return 2;
    }
  }
  bool all_passed = true;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Report report;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(report);
    } catch (const std::exception& e) {
      report.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %d: %s (%.1f s) %s\n", report.passed() ? "PASS" : "FAIL", c.id, c.title,
                secs, report.summary().c_str());
    std::fflush(stdout);
    all_passed = all_passed && report.passed();
  }
  return all_passed ? 0 : 1;
}
