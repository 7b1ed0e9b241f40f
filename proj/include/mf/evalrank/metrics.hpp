#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mf::evalrank {

/// Rank-statistic AUC with midranks for ties (a tied positive/negative pair
/// counts one half). labels are 0/1; both classes must be present.
double auc_binary(const std::vector<double>& scores, const std::vector<int>& labels);

/// One-vs-rest AUC averaged over classes. scores[i][c] is the score of case
/// i for class c. With two classes this is the binary AUC of column 1.
/// Classes absent from labels are skipped and, when warnings is given,
/// reported there. At least two classes must be present.
double auc_macro(const std::vector<std::vector<double>>& scores, const std::vector<int>& labels,
                 std::vector<std::string>* warnings = nullptr);

/// Mean over classes of 2TP / (2TP + FP + FN); classes absent from both
/// predictions and labels are skipped.
double f1_macro(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Per-case Dice averaged over foreground classes (class 0 is background
/// when ignore_background). Classes empty in both masks are skipped; if all
/// are skipped the case scores 1.
double dsc(const std::vector<int>& predicted, const std::vector<int>& truth, int num_classes,
           bool ignore_background = true);

/// Index of the largest score in each row (first on ties).
std::vector<int> argmax_rows(const std::vector<std::vector<double>>& scores);

}  // namespace mf::evalrank
