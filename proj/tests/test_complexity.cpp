#include <gtest/gtest.h>

#include "mf/complexity/complexity.hpp"
#include "mf/error.hpp"
#include "mf/metaformer/model.hpp"

using namespace mf;
using namespace mf::complexity;

namespace {

const std::vector<MixerKind> kKernelKinds{MixerKind::pooling, MixerKind::grouped_conv, MixerKind::conv,
                                          MixerKind::local_attn};

}  // namespace

TEST(Flops, TableStringsEvaluatedVerbatim) {
  const std::int64_t C = 7, N = 11, K = 5;
  EXPECT_EQ(flops_formula(MixerKind::identity, C, N), N * C * C);
  EXPECT_EQ(flops_formula(MixerKind::pooling, C, N, K), N * K * K * C + N * C * C);
  EXPECT_EQ(flops_formula(MixerKind::grouped_conv, C, N, K), N * 2 * K * K * C + N * C * C);
  EXPECT_EQ(flops_formula(MixerKind::local_attn, C, N, K), 5 * N * C * C + N * K * K * C + N + 2 * N * K * K);
  EXPECT_EQ(flops_formula(MixerKind::conv, C, N, K), N * 2 * K * K * C * C + N * C * C);
  EXPECT_EQ(flops_formula(MixerKind::global_attn, C, N), 5 * N * C * C + N * N * C + N + 2 * N * N);
}

TEST(Flops, WorkedExamples) {
  EXPECT_EQ(flops_formula(MixerKind::identity, 64, 192 * 192), 150'994'944);
  EXPECT_EQ(flops_formula(MixerKind::pooling, 64, 500, 1), flops_formula(MixerKind::identity, 64, 500) + 500 * 64);
  const std::int64_t N = 24 * 24;
  EXPECT_EQ(N * N * 512 * 49, N * 49 * 512 * N);  // N^2 C / (N K^2 C) = N / K^2
}

TEST(Flops, GlobalOverLocalScalesAsNOverKSquared) {
  for (std::int64_t C : {16, 64, 512})
    for (std::int64_t side : {4, 12, 24, 48})
      for (std::int64_t K : {3, 5, 7, 9}) {
        const std::int64_t N = side * side;
        const std::int64_t shared = 5 * N * C * C + N;
        const std::int64_t g = flops_formula(MixerKind::global_attn, C, N) - shared;
        const std::int64_t l = flops_formula(MixerKind::local_attn, C, N, K) - shared;
        EXPECT_EQ(g * K * K, l * N) << C << " " << N << " " << K;
      }
}

TEST(Flops, MissingKernelIsAnError) {
  for (MixerKind k : kKernelKinds) {
    EXPECT_THROW(flops_formula(k, 8, 16), ConfigError);
    EXPECT_THROW(param_formula(k, 8), ConfigError);
  }
  EXPECT_NO_THROW(flops_formula(MixerKind::global_attn, 8, 16, 7));
}

TEST(Flops, MonotoneInEachArgument) {
  for (MixerKind kind : mixers::all_kinds()) {
    for (std::int64_t C = 1; C <= 20; C += 3)
      for (std::int64_t N = 1; N <= 50; N += 7)
        for (std::int64_t K = 1; K <= 9; K += 2) {
          const auto f = flops_formula(kind, C, N, K);
          EXPECT_LE(f, flops_formula(kind, C + 1, N, K));
          EXPECT_LE(f, flops_formula(kind, C, N + 1, K));
          EXPECT_LE(f, flops_formula(kind, C, N, K + 2));
          EXPECT_GE(f, 0);
        }
  }
}

TEST(Params, TableRows) {
  EXPECT_EQ(param_formula(MixerKind::grouped_conv, 64, 3), 4672);
  for (std::int64_t C : {1, 8, 64, 320}) {
    EXPECT_EQ(param_formula(MixerKind::identity, C), C * C);
    EXPECT_EQ(param_formula(MixerKind::pooling, C, 3), C * C);
    EXPECT_EQ(param_formula(MixerKind::conv, C, 5), 25 * C * C + C * C);
    EXPECT_EQ(param_formula(MixerKind::local_attn, C, 7), param_formula(MixerKind::global_attn, C));
    EXPECT_EQ(param_formula(MixerKind::global_attn, C), 5 * C * C);
  }
}

TEST(Params, MixerTermsMatchModelDeltas) {
  metaformer::ModelConfig base;
  base.signature = metaformer::parse_signature("identity");
  const auto base_count = metaformer::count_params(base).total();
  for (const std::string sig : {"pool3", "gconv3", "gconv7", "conv5", "lattn7", "gattn"}) {
    for (std::int64_t stage = 0; stage < 4; ++stage) {
      auto cfg = base;
      cfg.signature[stage] = mixers::MixerSpec::parse(sig);
      const auto spec = cfg.signature[stage];
      const std::int64_t C = cfg.stage_channels[stage];
      const auto K = spec.uses_kernel() ? std::optional<std::int64_t>(spec.kernel) : std::nullopt;
      const auto pb = metaformer::count_params(cfg);
      const std::int64_t per_block = param_formula(spec.kind, C, K) - C * C;
      EXPECT_EQ(pb.mixers, per_block * cfg.stage_depths[stage]) << sig << " stage " << stage;
      const std::int64_t pos = pb.pos_emb;
      EXPECT_EQ(pb.total() - base_count, per_block * cfg.stage_depths[stage] + pos);
    }
  }
}

TEST(Macs, WrapPaddedCountsEqualMixerTerms) {
  for (std::int64_t C : {1, 3, 4})
    for (std::int64_t K : {3, 5, 7})
      for (std::int64_t H : {5, 8})
        for (std::int64_t W : {5, 6}) {
          const std::int64_t N = H * W;
          for (MixerKind kind : {MixerKind::pooling, MixerKind::grouped_conv, MixerKind::conv}) {
            const auto macs = empirical_mac_count(kind, C, H, W, K);
            EXPECT_EQ(macs * flops_per_mac(kind), mixer_flops_term(kind, C, N, K));
            EXPECT_EQ(mixer_flops_term(kind, C, N, K),
                      flops_formula(kind, C, N, K) - flops_formula(MixerKind::identity, C, N));
          }
          EXPECT_EQ(empirical_mac_count(MixerKind::conv, C, H, W, K),
                    empirical_mac_count(MixerKind::grouped_conv, C, H, W, K) * C);
        }
}

TEST(Macs, WorkedExamples) {
  EXPECT_EQ(empirical_mac_count(MixerKind::grouped_conv, 4, 8, 8, 3), 2304);
  EXPECT_EQ(empirical_mac_count(MixerKind::identity, 4, 8, 8, 3), 0);
  EXPECT_THROW(empirical_mac_count(MixerKind::global_attn, 4, 8, 8, 3), ConfigError);
}

TEST(Sweep, StageTokensAndDominance) {
  const auto reports = stage_sweep(metaformer::ModelConfig{}, 768, 9);
  ASSERT_EQ(reports.size(), 24u);
  const std::int64_t expect_n[] = {36864, 9216, 2304, 576};
  for (const auto& r : reports) {
    EXPECT_EQ(r.N, expect_n[r.stage]);
    EXPECT_EQ(r.flops, flops_formula(r.kind, r.C, r.N, r.K));
  }
  std::int64_t global0 = 0;
  for (const auto& r : reports)
    if (r.stage == 0 && r.kind == MixerKind::global_attn) global0 = r.flops;
  for (const auto& r : reports)
    if (r.stage == 0 && r.kind != MixerKind::global_attn) EXPECT_GT(global0, r.flops);
}

TEST(Sweep, ZeroInputGivesZeroFlops) {
  for (const auto& r : stage_sweep(metaformer::ModelConfig{}, 0)) {
    EXPECT_EQ(r.N, 0);
    EXPECT_EQ(r.flops, 0);
  }
}

TEST(Sweep, CsvLayout) {
  const auto reports = stage_sweep(metaformer::ModelConfig{}, 64, 3, true);
  const std::string csv = to_csv(reports);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "stage,mixer,K,C,N,flops,params,macs");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 25);
  for (const auto& r : reports) {
    if (r.kind == MixerKind::pooling || r.kind == MixerKind::conv || r.kind == MixerKind::grouped_conv) {
      ASSERT_TRUE(r.macs.has_value());
      EXPECT_EQ(*r.macs * flops_per_mac(r.kind), mixer_flops_term(r.kind, r.C, r.N, *r.K));
    }
  }
}
