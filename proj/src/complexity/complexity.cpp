#include "mf/complexity/complexity.hpp"

#include <sstream>

#include "mf/error.hpp"
#include "mf/kernels/kernels.hpp"
#include "mf/tensor/tape.hpp"

namespace mf::complexity {

namespace {

bool needs_kernel(MixerKind kind) {
  return kind == MixerKind::pooling || kind == MixerKind::grouped_conv || kind == MixerKind::conv ||
         kind == MixerKind::local_attn;
}

std::int64_t require_kernel(MixerKind kind, std::optional<std::int64_t> K) {
  if (!needs_kernel(kind)) return 0;
  if (!K) throw ConfigError(mixers::kind_name(kind) + " requires a kernel size");
  if (*K < 1) throw ConfigError("kernel size must be positive");
  return *K;
}

void require_non_negative(std::int64_t C, std::int64_t N) {
  if (C < 0 || N < 0) throw ConfigError("channel and token counts must be non-negative");
}

}  // namespace

std::int64_t flops_formula(MixerKind kind, std::int64_t C, std::int64_t N, std::optional<std::int64_t> K) {
  require_non_negative(C, N);
  const std::int64_t k2 = require_kernel(kind, K) * require_kernel(kind, K);
  const std::int64_t nc2 = N * C * C;
  switch (kind) {
    case MixerKind::identity: return nc2;
    case MixerKind::pooling: return N * k2 * C + nc2;
    case MixerKind::grouped_conv: return N * 2 * k2 * C + nc2;
    case MixerKind::local_attn: return 5 * nc2 + N * k2 * C + N + 2 * N * k2;
    case MixerKind::conv: return N * 2 * k2 * C * C + nc2;
    case MixerKind::global_attn: return 5 * nc2 + N * N * C + N + 2 * N * N;
  }
  return 0;
}

std::int64_t param_formula(MixerKind kind, std::int64_t C, std::optional<std::int64_t> K) {
  require_non_negative(C, 0);
  const std::int64_t k2 = require_kernel(kind, K) * require_kernel(kind, K);
  switch (kind) {
    case MixerKind::identity:
    case MixerKind::pooling: return C * C;
    case MixerKind::grouped_conv: return k2 * C + C * C;
    case MixerKind::conv: return k2 * C * C + C * C;
    case MixerKind::local_attn:
    case MixerKind::global_attn: return 5 * C * C;
  }
  return 0;
}

std::int64_t mixer_flops_term(MixerKind kind, std::int64_t C, std::int64_t N, std::int64_t K) {
  require_non_negative(C, N);
  switch (kind) {
    case MixerKind::identity: return 0;
    case MixerKind::pooling: return N * K * K * C;
    case MixerKind::grouped_conv: return 2 * N * K * K * C;
    case MixerKind::conv: return 2 * N * K * K * C * C;
    default: throw ConfigError("no sliding-window term for " + mixers::kind_name(kind));
  }
}

std::int64_t flops_per_mac(MixerKind kind) {
  return kind == MixerKind::grouped_conv || kind == MixerKind::conv ? 2 : 1;
}

std::int64_t empirical_mac_count(MixerKind kind, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t K) {
  if (kind == MixerKind::local_attn || kind == MixerKind::global_attn) {
    throw ConfigError("empirical MAC counting is not instrumented for " + mixers::kind_name(kind));
  }
  if (kind == MixerKind::identity) return 0;
  Rng rng(0x5eed);
  const Tensor x = uniform({1, C, H, W}, -1.0, 1.0, rng);
  const mixers::MixerSpec spec{kind, K, 1};
  const mixers::TokenMixer mixer(spec, C, rng, Padding::circular);
  NoGradGuard no_grad;
  kernels::MacCounter counter;
  mixer.forward(x);
  return counter.count();
}

std::vector<CostReport> stage_sweep(const metaformer::ModelConfig& config, std::int64_t input_hw, std::int64_t K,
                                    bool with_macs) {
  std::vector<CostReport> out;
  for (std::int64_t s = 0; s < metaformer::ModelConfig::kStages; ++s) {
    const std::int64_t side = metaformer::stage_extent(input_hw, s);
    const std::int64_t C = config.stage_channels[s];
    for (MixerKind kind : mixers::all_kinds()) {
      CostReport r;
      r.stage = s;
      r.kind = kind;
      if (needs_kernel(kind)) r.K = K;
      r.C = C;
      r.N = side * side;
      r.flops = flops_formula(kind, C, r.N, r.K);
      r.params = param_formula(kind, C, r.K);
      if (with_macs && kind != MixerKind::local_attn && kind != MixerKind::global_attn && side > 0) {
        r.macs = empirical_mac_count(kind, C, side, side, K);
      }
      out.push_back(r);
    }
  }
  return out;
}

std::string to_csv(const std::vector<CostReport>& reports) {
  std::ostringstream os;
  os << "stage,mixer,K,C,N,flops,params,macs\n";
  for (const auto& r : reports) {
    os << r.stage << ',' << mixers::kind_name(r.kind) << ',';
    if (r.K) os << *r.K;
    os << ',' << r.C << ',' << r.N << ',' << r.flops << ',' << r.params << ',';
    if (r.macs) os << *r.macs;
    os << '\n';
  }
  return os.str();
}

}  // namespace mf::complexity
