#include "mf/evalrank/case_scores.hpp"

#include <sstream>

#include "mf/error.hpp"
#include "mf/io/csv.hpp"

namespace mf::evalrank {

void CaseScores::validate() const {
  const std::string who = dataset + "/" + submission;
  if (case_ids.empty()) throw DataError(who + ": no cases");
  if (task == TaskKind::classification) {
    if (labels.size() != case_ids.size() || scores.size() != case_ids.size()) {
      throw DataError(who + ": labels and scores must cover every case");
    }
    const std::size_t k = scores.front().size();
    if (k < 2) throw DataError(who + ": at least two class scores required");
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i].size() != k) throw DataError(who + ": ragged score rows");
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) throw DataError(who + ": label out of range");
    }
  } else if (dsc.size() != case_ids.size()) {
    throw DataError(who + ": dsc must cover every case");
  }
}

void require_aligned(const CaseScores& a, const CaseScores& b) {
  if (a.task != b.task) throw DataError("cannot compare classification and segmentation results");
  if (a.case_ids != b.case_ids) {
    throw DataError(a.submission + " and " + b.submission + " on " + a.dataset + " do not share the same case list");
  }
  if (a.task == TaskKind::classification && a.labels != b.labels) {
    throw DataError(a.submission + " and " + b.submission + " disagree on true labels");
  }
}

std::string to_csv(const CaseScores& cs) {
  std::ostringstream os;
  if (cs.task == TaskKind::segmentation) {
    os << "case_id,dsc\n";
    for (std::size_t i = 0; i < cs.size(); ++i) os << cs.case_ids[i] << ',' << io::format_exact(cs.dsc[i]) << '\n';
    return os.str();
  }
  const std::size_t k = cs.scores.empty() ? 0 : cs.scores.front().size();
  os << "case_id,label";
  for (std::size_t c = 0; c < k; ++c) os << ",score_" << c;
  os << '\n';
  for (std::size_t i = 0; i < cs.size(); ++i) {
    os << cs.case_ids[i] << ',' << cs.labels[i];
    for (double s : cs.scores[i]) os << ',' << io::format_exact(s);
    os << '\n';
  }
  return os.str();
}

CaseScores parse_case_scores(const std::string& text, const std::string& dataset, const std::string& submission) {
  const io::CsvTable t = io::parse_csv(text);
  CaseScores cs;
  cs.dataset = dataset;
  cs.submission = submission;
  const std::string ctx = dataset + "/" + submission;
  const std::size_t id_col = t.column("case_id");
  if (t.has_column("dsc")) {
    cs.task = TaskKind::segmentation;
    const std::size_t d = t.column("dsc");
    for (const auto& row : t.rows) {
      cs.case_ids.push_back(row[id_col]);
      cs.dsc.push_back(io::parse_double(row[d], ctx));
    }
  } else {
    cs.task = TaskKind::classification;
    const std::size_t label_col = t.column("label");
    std::vector<std::size_t> score_cols;
    for (std::size_t c = 0;; ++c) {
      const std::string name = "score_" + std::to_string(c);
      if (!t.has_column(name)) break;
      score_cols.push_back(t.column(name));
    }
    for (const auto& row : t.rows) {
      cs.case_ids.push_back(row[id_col]);
      cs.labels.push_back(static_cast<int>(io::parse_int(row[label_col], ctx)));
      std::vector<double> s;
      for (auto c : score_cols) s.push_back(io::parse_double(row[c], ctx));
      cs.scores.push_back(std::move(s));
    }
  }
  cs.validate();
  return cs;
}

CaseScores read_case_scores(const std::string& path, const std::string& dataset, const std::string& submission) {
  return parse_case_scores(io::read_text(path), dataset, submission);
}

}  // namespace mf::evalrank
