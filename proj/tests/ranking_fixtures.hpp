#pragma once

// Win counts, normalized ranks and geometric means transcribed from the
// published ranking tables. A missing cell (no result) is std::nullopt.

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fixtures {

using Cell = std::optional<std::pair<int, double>>;

struct Row {
  std::string submission;
  std::vector<Cell> cells;  // one per dataset
  std::optional<double> geomean;
};

struct RankingTable {
  std::string name;
  std::vector<std::string> datasets;
  std::vector<Row> rows;
};

inline constexpr std::nullopt_t kNone = std::nullopt;

inline Cell c(int wins, double score) { return std::make_pair(wins, score); }

inline const RankingTable& classification_scratch() {
  static const RankingTable t{
      "classification [T,T,T,T]",
      {"ImageWoof", "Path", "Derma", "Pneumonia", "OrganS"},
      {
          {"pool3", {c(8, 0.72), c(2, 0.34), c(2, 0.79), c(5, 0.9), c(11, 0.9)}, 0.691},
          {"pool5", {c(8, 0.72), c(4, 0.55), c(2, 0.79), c(1, 0.41), c(1, 0.2)}, 0.484},
          {"pool7", {c(9, 0.9), c(8, 0.79), c(1, 0.52), c(1, 0.41), c(2, 0.38)}, 0.563},
          {"conv3", {c(8, 0.72), c(9, 0.86), c(0, 0.24), c(1, 0.41), c(8, 0.76)}, 0.541},
          {"conv5", {c(5, 0.48), c(12, 0.97), c(2, 0.79), c(1, 0.41), c(6, 0.58)}, 0.616},
          {"conv7", {c(4, 0.38), c(12, 0.97), c(0, 0.24), c(7, 1.0), c(7, 0.65)}, 0.563},
          {"gconv3", {c(9, 0.9), c(4, 0.55), c(2, 0.79), c(5, 0.9), c(8, 0.76)}, 0.767},
          {"gconv5", {c(7, 0.58), c(6, 0.72), c(1, 0.52), c(1, 0.41), c(2, 0.38)}, 0.508},
          {"gconv7", {c(5, 0.48), c(4, 0.55), c(0, 0.24), c(3, 0.76), c(4, 0.52)}, 0.477},
          {"lattn3", {c(2, 0.27), c(0, 0.13), c(2, 0.79), c(1, 0.41), c(2, 0.38)}, 0.34},
          {"lattn5", {c(2, 0.27), c(0, 0.13), c(0, 0.24), c(1, 0.41), c(0, 0.1)}, 0.205},
          {"lattn7", {c(1, 0.17), c(2, 0.34), c(0, 0.24), c(1, 0.41), c(1, 0.2)}, 0.259},
          {"gattn", {c(0, 0.1), c(4, 0.55), c(13, 1.0), c(0, 0.1), c(13, 1.0)}, 0.353},
          {"identity", {c(11, 1.0), c(1, 0.24), c(1, 0.52), c(3, 0.76), c(11, 0.9)}, 0.609},
      }};
  return t;
}

inline const RankingTable& classification_pretrained() {
  static const RankingTable t{
      "classification [P,P,T,T]",
      {"ImageWoof", "Path", "Derma", "Pneumonia", "OrganS"},
      {
          {"pool3", {c(2, 0.36), c(1, 0.18), c(0, 0.52), c(0, 0.36), c(6, 0.52)}, 0.366},
          {"pool5", {c(2, 0.36), c(3, 0.36), c(0, 0.52), c(0, 0.36), c(14, 0.95)}, 0.474},
          {"pool7", {c(6, 0.68), c(8, 0.74), c(0, 0.52), c(0, 0.36), c(1, 0.26)}, 0.477},
          {"conv3", {c(3, 0.58), c(1, 0.18), c(0, 0.52), c(0, 0.36), c(6, 0.52)}, 0.401},
          {"conv5", {c(0, 0.15), c(4, 0.42), c(0, 0.52), c(0, 0.36), c(11, 0.89)}, 0.405},
          {"conv7", {c(0, 0.15), c(7, 0.55), c(0, 0.52), c(0, 0.36), c(7, 0.71)}, 0.409},
          {"gconv3", {c(2, 0.36), c(2, 0.29), c(0, 0.52), c(5, 0.95), c(1, 0.26)}, 0.422},
          {"gconv5", {c(0, 0.15), c(2, 0.29), c(0, 0.52), c(4, 0.81), c(6, 0.52)}, 0.396},
          {"gconv7", {c(13, 0.81), c(14, 0.89), c(0, 0.52), c(0, 0.36), c(1, 0.26)}, 0.514},
          {"lattn3", {c(3, 0.58), c(8, 0.74), c(0, 0.52), c(0, 0.36), c(1, 0.26)}, 0.462},
          {"lattn5", {c(2, 0.36), c(7, 0.55), c(0, 0.52), c(7, 1.0), c(7, 0.71)}, 0.595},
          {"lattn7", {c(3, 0.58), c(7, 0.55), c(0, 0.52), c(0, 0.36), c(7, 0.71)}, 0.533},
          {"lattn3_warm", {c(10, 0.74), c(8, 0.74), c(0, 0.52), c(0, 0.36), c(8, 0.84)}, 0.613},
          {"lattn5_warm", {c(15, 0.95), c(7, 0.55), c(0, 0.52), c(4, 0.81), c(1, 0.26)}, 0.565},
          {"lattn7_warm", {c(15, 0.95), c(14, 0.89), c(0, 0.52), c(0, 0.36), c(15, 1.0)}, 0.695},
          {"gattn", {c(2, 0.36), c(14, 0.89), c(0, 0.52), c(1, 0.68), c(4, 0.42)}, 0.546},
          {"gattn_warm", {c(15, 0.95), c(17, 1.0), c(0, 0.52), c(4, 0.81), c(0, 0.1)}, 0.526},
          {"identity", {c(13, 0.81), c(0, 0.1), c(17, 1.0), c(4, 0.81), c(7, 0.71)}, 0.543},
      }};
  return t;
}

// The K=9 rows were only run on Tiger and have no aggregated rank; global
// attention did not finish on Tiger.
inline const RankingTable& segmentation_scratch() {
  static const RankingTable t{
      "segmentation [T,T,T,T]",
      {"JSRT", "GRAZ", "Tiger"},
      {
          {"pool3", {c(4, 0.55), c(2, 0.45), c(6, 0.92)}, 0.608},
          {"pool5", {c(3, 0.45), c(2, 0.45), c(2, 0.55)}, 0.478},
          {"pool7", {c(1, 0.27), c(2, 0.45), c(2, 0.55)}, 0.406},
          {"pool9", {kNone, kNone, c(6, 0.92)}, std::nullopt},
          {"conv3", {c(8, 0.69), c(5, 0.72), c(10, 1.0)}, 0.793},
          {"conv5", {c(10, 1.0), c(6, 0.79), c(1, 0.41)}, 0.687},
          {"conv7", {c(9, 0.86), c(10, 1.0), c(1, 0.41)}, 0.707},
          {"conv9", {kNone, kNone, c(3, 0.69)}, std::nullopt},
          {"gconv3", {c(9, 0.86), c(2, 0.45), c(2, 0.55)}, 0.596},
          {"gconv5", {c(8, 0.69), c(9, 0.93), c(5, 0.83)}, 0.811},
          {"gconv7", {c(9, 0.86), c(8, 0.86), c(4, 0.77)}, 0.832},
          {"gconv9", {kNone, kNone, c(3, 0.69)}, std::nullopt},
          {"lattn3", {c(0, 0.1), c(2, 0.45), c(0, 0.21)}, 0.212},
          {"lattn5", {c(4, 0.55), c(2, 0.45), c(0, 0.21)}, 0.374},
          {"lattn7", {c(1, 0.27), c(2, 0.45), c(0, 0.21)}, 0.296},
          {"lattn9", {kNone, kNone, c(0, 0.21)}, std::nullopt},
          {"gattn", {c(1, 0.27), c(0, 0.13), kNone}, 0.192},
          {"identity", {c(1, 0.27), c(0, 0.13), c(0, 0.21)}, 0.198},
      }};
  return t;
}

// A round-robin verdict matrix over the 14 [T,T,T,T] classification
// submissions (table order) that realizes the ImageWoof win column. Entry
// [i][j] for i < j: 'A' row wins, 'B' column wins, 'T' no significant
// difference. Only the upper triangle is read.
inline const std::vector<std::string>& imagewoof_verdicts() {
  static const std::vector<std::string> m{
      "-BAAAAABTAATAT", ".-AAAABABBATAT", "..-AAAAABAAAAB", "...-AAAAAAATAB", "....-ABBAAABAB",
      ".....-BBAAATAB", "......-AAAAAAB", ".......-AAATAB", "........-AAATB", ".........-BTAB",
      "..........-TAB", "...........-TB", "............-B", ".............-",
  };
  return m;
}

inline const std::vector<int>& imagewoof_wins() {
  static const std::vector<int> w{8, 8, 9, 8, 5, 4, 9, 7, 5, 2, 2, 1, 0, 11};
  return w;
}

inline std::vector<const RankingTable*> all_tables() {
  return {&classification_scratch(), &classification_pretrained(), &segmentation_scratch()};
}

}  // namespace fixtures
