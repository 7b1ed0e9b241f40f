#pragma once

#include <cstdint>
#include <vector>

#include "mf/evalrank/case_scores.hpp"

namespace mf::evalrank {

enum class Verdict { a_wins, b_wins, tie };

Verdict flip(Verdict v);

struct BootstrapResult {
  Verdict verdict = Verdict::tie;
  double observed = 0.0;  // AUC(A) - AUC(B) on the full case list
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::int64_t used_resamples = 0;  // resamples containing every needed class
};

struct BootstrapOptions {
  std::int64_t repeats = 5000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

/// Paired bootstrap of the macro AUC difference. Resample r draws case
/// indices from mt19937_64(seed ^ r); the percentile interval decides the
/// verdict. Resamples lacking a class present in the full set are dropped.
BootstrapResult bootstrap_auc_win(const CaseScores& a, const CaseScores& b, const BootstrapOptions& opts = {});

/// Linearly interpolated quantile of sorted values.
double percentile_sorted(const std::vector<double>& sorted, double q);

struct WilcoxonResult {
  Verdict verdict = Verdict::tie;
  double p_value = 1.0;
  double w_plus = 0.0;   // rank sum of positive differences a - b
  double w_minus = 0.0;
  std::int64_t n = 0;    // non-zero differences
  bool exact = false;
};

struct WilcoxonOptions {
  double alpha = 0.05;
  bool two_sided = true;
  /// Exact null distribution up to this many non-zero differences.
  std::int64_t exact_max_n = 25;
};

/// Signed-rank test on paired values. Zero differences are dropped, tied
/// magnitudes share average ranks. Above exact_max_n the normal
/// approximation with tie correction is used. One-sided mode tests the
/// direction indicated by the larger rank sum.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                    const WilcoxonOptions& opts = {});

}  // namespace mf::evalrank
