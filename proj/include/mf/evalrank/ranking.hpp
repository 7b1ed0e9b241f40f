#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mf/evalrank/case_scores.hpp"
#include "mf/evalrank/significance.hpp"

namespace mf::evalrank {

/// verdicts[i][j] is the outcome of submission i against j (a = i). Only
/// i < j entries are read; j's outcome is the flipped verdict.
std::vector<std::int64_t> wins_from_verdicts(const std::vector<std::vector<Verdict>>& verdicts);

using Comparator = std::function<Verdict(const CaseScores&, const CaseScores&)>;

Comparator bootstrap_comparator(const BootstrapOptions& opts = {});
Comparator wilcoxon_comparator(const WilcoxonOptions& opts = {});

/// Round-robin over all pairs of submissions on one dataset.
std::vector<std::int64_t> pairwise_wins(const std::vector<CaseScores>& submissions, const Comparator& compare);

/// Positional scores in [0.1, 1]: sorted ascending by wins, position p of n
/// scores 0.1 + (p - 1) * 0.9 / (n - 1); equal wins share the mean score of
/// their positions. Returned in input order.
std::vector<double> normalize_ranks(const std::vector<double>& wins);
std::vector<double> normalize_ranks(const std::vector<std::int64_t>& wins);

/// dataset -> submission -> normalized rank
using DatasetScores = std::map<std::string, std::map<std::string, double>>;

struct GlobalRank {
  std::string submission;
  double geomean = 0.0;
  std::int64_t datasets = 0;
};

/// Geometric mean across datasets, sorted best first (ties by name). Unless
/// allow_missing, every submission must appear in every dataset.
std::vector<GlobalRank> aggregate_geomean(const DatasetScores& scores, bool allow_missing = false);

struct RankEntry {
  std::string submission;
  std::string dataset;
  std::int64_t wins = 0;
  double norm_rank = 0.0;
};

struct RankTable {
  std::vector<RankEntry> entries;  // dataset-major, submissions in input order
  std::vector<GlobalRank> global;

  /// Long format: submission,dataset,wins,norm_rank,global.
  std::string to_csv() const;
};

/// wins: dataset -> ordered (submission, wins) list.
RankTable rank_from_wins(const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::int64_t>>>>& wins,
                         bool allow_missing = false);

}  // namespace mf::evalrank
