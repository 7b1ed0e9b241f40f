#pragma once

#include <string>
#include <vector>

namespace mf::evalrank {

enum class TaskKind { classification, segmentation };

/// Per-case results of one submission on one dataset.
///
/// Classification: a true label and a class-score vector per case.
/// Segmentation: one mean foreground DSC per case.
struct CaseScores {
  std::string dataset;
  std::string submission;
  TaskKind task = TaskKind::classification;
  std::vector<std::string> case_ids;
  std::vector<int> labels;
  std::vector<std::vector<double>> scores;
  std::vector<double> dsc;

  std::size_t size() const { return case_ids.size(); }
  void validate() const;
};

/// Throws DataError unless both cover the same task and identical case list.
void require_aligned(const CaseScores& a, const CaseScores& b);

/// Columns case_id,label,score_0..score_{k-1} or case_id,dsc.
std::string to_csv(const CaseScores& cs);
CaseScores parse_case_scores(const std::string& text, const std::string& dataset, const std::string& submission);
CaseScores read_case_scores(const std::string& path, const std::string& dataset, const std::string& submission);

}  // namespace mf::evalrank
