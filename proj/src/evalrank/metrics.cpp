#include "mf/evalrank/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "mf/error.hpp"

namespace mf::evalrank {

namespace {

// 1-based midranks of values.
std::vector<double> midranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double auc_binary(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc: scores and labels differ in length");
  const auto ranks = midranks(scores);
  double pos_rank_sum = 0.0;
  std::int64_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      pos_rank_sum += ranks[i];
      ++n_pos;
    } else if (labels[i] == 0) {
      ++n_neg;
    } else {
      throw DataError("auc: binary labels must be 0 or 1");
    }
  }
  if (n_pos == 0 || n_neg == 0) throw DataError("auc: both classes must be present");
  const double u = pos_rank_sum - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auc_macro(const std::vector<std::vector<double>>& scores, const std::vector<int>& labels,
                 std::vector<std::string>* warnings) {
  if (scores.size() != labels.size()) throw DimensionError("auc: scores and labels differ in length");
  if (scores.empty()) throw DataError("auc: no cases");
  const std::size_t k = scores.front().size();
  for (const auto& row : scores) {
    if (row.size() != k) throw DimensionError("auc: ragged score matrix");
  }
  std::vector<std::int64_t> counts(k, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw DataError("auc: label " + std::to_string(y) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  const auto present = std::count_if(counts.begin(), counts.end(), [](std::int64_t c) { return c > 0; });
  if (present < 2) throw DataError("auc: at least two classes must be present");

  auto column_auc = [&](std::size_t c) {
    std::vector<double> col(scores.size());
    std::vector<int> bin(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      col[i] = scores[i][c];
      bin[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
    }
    return auc_binary(col, bin);
  };
  if (k == 2) return column_auc(1);

  double total = 0.0;
  int used = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      if (warnings) warnings->push_back("auc: class " + std::to_string(c) + " absent from labels, skipped");
      continue;
    }
    total += column_auc(c);
    ++used;
  }
  return total / used;
}

double f1_macro(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw DimensionError("f1: prediction and truth differ in length");
  if (truth.empty()) throw DataError("f1: no cases");
  int k = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] < 0 || truth[i] < 0) throw DataError("f1: negative class id");
    k = std::max({k, predicted[i] + 1, truth[i] + 1});
  }
  std::vector<std::int64_t> tp(k, 0), fp(k, 0), fn(k, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == truth[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[truth[i]];
    }
  }
  double total = 0.0;
  int used = 0;
  for (int c = 0; c < k; ++c) {
    const std::int64_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;
    total += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    ++used;
  }
  return total / used;
}

double dsc(const std::vector<int>& predicted, const std::vector<int>& truth, int num_classes, bool ignore_background) {
  if (predicted.size() != truth.size()) throw DimensionError("dsc: masks differ in size");
  if (truth.empty()) throw DataError("dsc: empty masks");
  std::vector<std::int64_t> inter(num_classes, 0), p(num_classes, 0), t(num_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] < 0 || predicted[i] >= num_classes || truth[i] < 0 || truth[i] >= num_classes) {
      throw DataError("dsc: class id out of range");
    }
    ++p[predicted[i]];
    ++t[truth[i]];
    if (predicted[i] == truth[i]) ++inter[truth[i]];
  }
  double total = 0.0;
  int used = 0;
  for (int c = ignore_background ? 1 : 0; c < num_classes; ++c) {
    if (p[c] + t[c] == 0) continue;
    total += 2.0 * static_cast<double>(inter[c]) / static_cast<double>(p[c] + t[c]);
    ++used;
  }
  return used == 0 ? 1.0 : total / used;
}

std::vector<int> argmax_rows(const std::vector<std::vector<double>>& scores) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (const auto& row : scores) {
    out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

}  // namespace mf::evalrank
