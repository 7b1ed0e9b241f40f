#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mf/metaformer/config.hpp"
#include "mf/mixers/mixers.hpp"

namespace mf::complexity {

using mixers::MixerKind;

// Closed-form cost model of a token mixer plus the channel MLP share, with
// N = H * W tokens of C channels and a K x K neighbourhood. One
// multiply-accumulate counts as 2 FLOPs where the formulas carry a factor 2.
//
//   identity      N C^2
//   pooling       N K^2 C + N C^2
//   grouped conv  2 N K^2 C + N C^2
//   local attn    5 N C^2 + N K^2 C + N + 2 N K^2
//   conv          2 N K^2 C^2 + N C^2
//   global attn   5 N C^2 + N^2 C + N + 2 N^2
//
// Parameters: C^2, C^2, K^2 C + C^2, 5 C^2, K^2 C^2 + C^2, 5 C^2.

/// K is required for every kind that has a kernel and ignored otherwise.
std::int64_t flops_formula(MixerKind kind, std::int64_t C, std::int64_t N, std::optional<std::int64_t> K = {});
std::int64_t param_formula(MixerKind kind, std::int64_t C, std::optional<std::int64_t> K = {});

/// The part of flops_formula spent inside the mixer's own sliding-window
/// arithmetic: N K^2 C for pooling, 2 N K^2 C for grouped conv and
/// 2 N K^2 C^2 for conv. Zero for identity. Attention kinds throw.
std::int64_t mixer_flops_term(MixerKind kind, std::int64_t C, std::int64_t N, std::int64_t K);

/// FLOPs per counted multiply-accumulate in mixer_flops_term (1 or 2).
std::int64_t flops_per_mac(MixerKind kind);

/// Executes one mixer forward pass with wrap padding on a random
/// [1, C, H, W] input and returns the multiply-accumulates performed.
/// Supported for identity, pooling, conv and grouped conv.
std::int64_t empirical_mac_count(MixerKind kind, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t K);

struct CostReport {
  std::int64_t stage = 0;
  MixerKind kind = MixerKind::identity;
  std::optional<std::int64_t> K;
  std::int64_t C = 0;
  std::int64_t N = 0;
  std::int64_t flops = 0;
  std::int64_t params = 0;
  std::optional<std::int64_t> macs;
};

/// Costs of all six mixers at every stage of config for a square input of
/// side input_hw. Kernel-based mixers use kernel K.
std::vector<CostReport> stage_sweep(const metaformer::ModelConfig& config, std::int64_t input_hw,
                                    std::int64_t K = 7, bool with_macs = false);

/// Header "stage,mixer,K,C,N,flops,params,macs"; blank cells for absent values.
std::string to_csv(const std::vector<CostReport>& reports);

}  // namespace mf::complexity
