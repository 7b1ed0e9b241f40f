#include "mf/evalrank/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "mf/error.hpp"
#include "mf/io/csv.hpp"

namespace mf::evalrank {

std::vector<std::int64_t> wins_from_verdicts(const std::vector<std::vector<Verdict>>& verdicts) {
  const std::size_t n = verdicts.size();
  for (const auto& row : verdicts) {
    if (row.size() != n) throw DimensionError("verdict matrix must be square");
  }
  std::vector<std::int64_t> wins(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (verdicts[i][j] == Verdict::a_wins) ++wins[i];
      if (verdicts[i][j] == Verdict::b_wins) ++wins[j];
    }
  }
  return wins;
}

Comparator bootstrap_comparator(const BootstrapOptions& opts) {
  return [opts](const CaseScores& a, const CaseScores& b) { return bootstrap_auc_win(a, b, opts).verdict; };
}

Comparator wilcoxon_comparator(const WilcoxonOptions& opts) {
  return [opts](const CaseScores& a, const CaseScores& b) {
    require_aligned(a, b);
    if (a.task != TaskKind::segmentation) throw DataError("Wilcoxon comparison needs per-case DSC");
    return wilcoxon_signed_rank(a.dsc, b.dsc, opts).verdict;
  };
}

std::vector<std::int64_t> pairwise_wins(const std::vector<CaseScores>& submissions, const Comparator& compare) {
  const std::size_t n = submissions.size();
  if (n < 2) throw DataError("ranking needs at least two submissions");
  for (std::size_t i = 1; i < n; ++i) require_aligned(submissions[0], submissions[i]);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  std::vector<std::vector<Verdict>> verdicts(n, std::vector<Verdict>(n, Verdict::tie));
  // Bootstrap comparisons parallelize internally, so pairs run in order.
  for (const auto& [i, j] : pairs) verdicts[i][j] = compare(submissions[i], submissions[j]);
  return wins_from_verdicts(verdicts);
}

std::vector<double> normalize_ranks(const std::vector<double>& wins) {
  const std::size_t n = wins.size();
  if (n < 2) throw DataError("normalized ranks need at least two submissions");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return wins[a] < wins[b]; });
  auto positional = [&](std::size_t p0) { return 0.1 + static_cast<double>(p0) * 0.9 / static_cast<double>(n - 1); };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && wins[order[j + 1]] == wins[order[i]]) ++j;
    double s = 0.0;
    for (std::size_t t = i; t <= j; ++t) s += positional(t);
    s /= static_cast<double>(j - i + 1);
    for (std::size_t t = i; t <= j; ++t) out[order[t]] = s;
    i = j + 1;
  }
  return out;
}

std::vector<double> normalize_ranks(const std::vector<std::int64_t>& wins) {
  return normalize_ranks(std::vector<double>(wins.begin(), wins.end()));
}

std::vector<GlobalRank> aggregate_geomean(const DatasetScores& scores, bool allow_missing) {
  if (scores.empty()) throw DataError("no datasets to aggregate");
  std::set<std::string> names;
  for (const auto& [ds, m] : scores) {
    for (const auto& [sub, v] : m) names.insert(sub);
  }
  std::vector<GlobalRank> out;
  for (const auto& name : names) {
    double log_sum = 0.0;
    std::int64_t count = 0;
    for (const auto& [ds, m] : scores) {
      auto it = m.find(name);
      if (it == m.end()) {
        if (!allow_missing) throw DataError("submission " + name + " has no result on dataset " + ds);
        continue;
      }
      if (!(it->second > 0)) throw DataError("normalized ranks must be positive");
      log_sum += std::log(it->second);
      ++count;
    }
    out.push_back({name, std::exp(log_sum / static_cast<double>(count)), count});
  }
  std::stable_sort(out.begin(), out.end(), [](const GlobalRank& a, const GlobalRank& b) {
    if (a.geomean != b.geomean) return a.geomean > b.geomean;
    return a.submission < b.submission;
  });
  return out;
}

std::string RankTable::to_csv() const {
  std::map<std::string, double> g;
  for (const auto& r : global) g[r.submission] = r.geomean;
  std::ostringstream os;
  os << "submission,dataset,wins,norm_rank,global\n";
  for (const auto& e : entries) {
    os << e.submission << ',' << e.dataset << ',' << e.wins << ',' << io::format_exact(e.norm_rank) << ','
       << io::format_exact(g.at(e.submission)) << '\n';
  }
  return os.str();
}

RankTable rank_from_wins(
    const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::int64_t>>>>& wins,
    bool allow_missing) {
  RankTable table;
  DatasetScores scores;
  for (const auto& [dataset, list] : wins) {
    std::vector<std::int64_t> w;
    for (const auto& [sub, count] : list) w.push_back(count);
    const auto nr = normalize_ranks(w);
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!scores[dataset].emplace(list[i].first, nr[i]).second) {
        throw DataError("submission " + list[i].first + " listed twice for dataset " + dataset);
      }
      table.entries.push_back({list[i].first, dataset, list[i].second, nr[i]});
    }
  }
  table.global = aggregate_geomean(scores, allow_missing);
  return table;
}

}  // namespace mf::evalrank
