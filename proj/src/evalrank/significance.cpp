#include "mf/evalrank/significance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mf/error.hpp"
#include "mf/evalrank/metrics.hpp"

namespace mf::evalrank {

Verdict flip(Verdict v) {
  switch (v) {
    case Verdict::a_wins: return Verdict::b_wins;
    case Verdict::b_wins: return Verdict::a_wins;
    case Verdict::tie: return Verdict::tie;
  }
  return v;
}

double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw DataError("percentile of an empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap_auc_win(const CaseScores& a, const CaseScores& b, const BootstrapOptions& opts) {
  a.validate();
  b.validate();
  require_aligned(a, b);
  if (a.task != TaskKind::classification) throw DataError("bootstrap AUC needs classification scores");
  if (opts.repeats < 100) throw ConfigError("bootstrap needs at least 100 repeats");
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");

  const std::size_t n = a.size();
  const std::size_t k = a.scores.front().size();
  std::vector<char> needed(k, 0);
  for (int y : a.labels) needed[static_cast<std::size_t>(y)] = 1;
  // With two classes only the positive and negative classes matter.
  const auto n_needed = std::count(needed.begin(), needed.end(), 1);

  BootstrapResult res;
  res.observed = auc_macro(a.scores, a.labels) - auc_macro(b.scores, b.labels);

  const auto repeats = opts.repeats;
  std::vector<double> diffs(static_cast<std::size_t>(repeats), std::numeric_limits<double>::quiet_NaN());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t r = 0; r < repeats; ++r) {
    std::mt19937_64 rng(opts.seed ^ static_cast<std::uint64_t>(r));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::vector<double>> sa(n), sb(n);
    std::vector<int> labels(n);
    std::vector<char> seen(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = pick(rng);
      sa[i] = a.scores[j];
      sb[i] = b.scores[j];
      labels[i] = a.labels[j];
      seen[static_cast<std::size_t>(labels[i])] = 1;
    }
    if (std::count(seen.begin(), seen.end(), 1) != n_needed) continue;
    diffs[static_cast<std::size_t>(r)] = auc_macro(sa, labels) - auc_macro(sb, labels);
  }

  std::vector<double> kept;
  for (double d : diffs) {
    if (!std::isnan(d)) kept.push_back(d);
  }
  if (kept.size() < 2) throw DataError("bootstrap: too few usable resamples");
  std::sort(kept.begin(), kept.end());
  res.used_resamples = static_cast<std::int64_t>(kept.size());
  res.ci_low = percentile_sorted(kept, opts.alpha / 2);
  res.ci_high = percentile_sorted(kept, 1 - opts.alpha / 2);
  if (res.ci_low > 0) {
    res.verdict = Verdict::a_wins;
  } else if (res.ci_high < 0) {
    res.verdict = Verdict::b_wins;
  }
  return res;
}

namespace {

// P(W+ <= w) and P(W+ >= w) for doubled ranks under the symmetric null.
std::pair<double, double> exact_tails(const std::vector<std::int64_t>& doubled_ranks, std::int64_t observed) {
  const std::int64_t total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), std::int64_t{0});
  std::vector<double> count(static_cast<std::size_t>(total + 1), 0.0);
  count[0] = 1.0;
  std::int64_t reach = 0;
  for (std::int64_t r : doubled_ranks) {
    for (std::int64_t s = reach; s >= 0; --s) {
      if (count[s] != 0.0) count[s + r] += count[s];
    }
    reach += r;
  }
  const double all = std::ldexp(1.0, static_cast<int>(doubled_ranks.size()));
  double le = 0.0, ge = 0.0;
  for (std::int64_t s = 0; s <= total; ++s) {
    if (s <= observed) le += count[s];
    if (s >= observed) ge += count[s];
  }
  return {le / all, ge / all};
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                    const WilcoxonOptions& opts) {
  if (a.size() != b.size()) throw DataError("wilcoxon: samples must be paired");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] - b[i];
    if (!std::isfinite(x)) throw DataError("wilcoxon: non-finite value");
    if (x != 0.0) d.push_back(x);
  }
  WilcoxonResult res;
  res.n = static_cast<std::int64_t>(d.size());
  if (d.empty()) return res;

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  std::vector<std::int64_t> doubled(d.size());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const auto t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    for (std::size_t m = i; m <= j; ++m) doubled[order[m]] = static_cast<std::int64_t>(i + j + 2);
    i = j + 1;
  }
  std::int64_t w_plus2 = 0, w_minus2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? w_plus2 : w_minus2) += doubled[i];
  res.w_plus = static_cast<double>(w_plus2) / 2;
  res.w_minus = static_cast<double>(w_minus2) / 2;

  double p_low = 0.0, p_high = 0.0;  // P(W+ <= obs), P(W+ >= obs)
  if (res.n <= opts.exact_max_n) {
    res.exact = true;
    std::tie(p_low, p_high) = exact_tails(doubled, w_plus2);
  } else {
    const auto n = static_cast<double>(res.n);
    const double mean = n * (n + 1) / 4;
    const double var = n * (n + 1) * (2 * n + 1) / 24 - tie_term / 48;
    const double z = (res.w_plus - mean) / std::sqrt(var);
    p_low = 0.5 * std::erfc(-z / std::sqrt(2.0));
    p_high = 0.5 * std::erfc(z / std::sqrt(2.0));
  }
  const bool a_larger = res.w_plus > res.w_minus;
  if (opts.two_sided) {
    res.p_value = std::min(1.0, 2 * std::min(p_low, p_high));
  } else {
    res.p_value = a_larger ? p_high : p_low;
  }
  if (res.p_value < opts.alpha && res.w_plus != res.w_minus) {
    res.verdict = a_larger ? Verdict::a_wins : Verdict::b_wins;
  }
  return res;
}

}  // namespace mf::evalrank
