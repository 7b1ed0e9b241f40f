#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mf/io/ini.hpp"
#include "mf/metaformer/config.hpp"
#include "mf/trainer/config.hpp"

namespace mf::cli {

struct RunSection {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 keeps the OpenMP default
  std::string out = "out";
  friend bool operator==(const RunSection&, const RunSection&) = default;
};

struct DataSection {
  std::string source = "synthetic";  // synthetic | squares | folder
  std::string dir;
  std::int64_t n = 64;
  std::int64_t size = 32;
  std::int64_t channels = 3;
  double shift = 0.5;
  double noise = 0.5;
  double val_fraction = 0.25;
  std::string val_dir;
  std::uint64_t seed = 0;
  friend bool operator==(const DataSection&, const DataSection&) = default;
};

struct EvalSection {
  std::string checkpoint;
  std::string dataset = "dataset";
  std::string submission = "submission";
  friend bool operator==(const EvalSection&, const EvalSection&) = default;
};

struct InferSection {
  std::string checkpoint;
  std::string image;
  std::int64_t patch_h = 768;
  std::int64_t patch_w = 768;
  double overlap = 0.25;
  std::string weighting = "gaussian";  // gaussian | uniform
  bool dump_logits = false;
  friend bool operator==(const InferSection&, const InferSection&) = default;
};

struct FlopsSection {
  std::int64_t input = 768;
  std::int64_t kernel = 7;
  bool macs = false;
  friend bool operator==(const FlopsSection&, const FlopsSection&) = default;
};

struct ParamsSection {
  std::vector<std::string> signatures{"identity", "pool3", "gconv3", "gconv5", "gconv7", "lattn7",
                                      "conv3",    "conv5", "conv7",  "gattn"};
  friend bool operator==(const ParamsSection&, const ParamsSection&) = default;
};

struct RankSection {
  std::string cases_dir;  // files named <dataset>__<submission>.csv
  std::string wins_csv;   // columns dataset,submission,wins
  std::string comparator = "auto";  // auto | bootstrap | wilcoxon
  std::int64_t repeats = 5000;
  double alpha = 0.05;
  bool two_sided = true;
  bool allow_missing = false;
  friend bool operator==(const RankSection&, const RankSection&) = default;
};

/// Every section a run may configure. Unknown sections or keys are
/// rejected; to_text() emits the fully resolved configuration and parses
/// back to an equal value.
struct RunConfig {
  RunSection run;
  metaformer::ModelConfig model;
  trainer::TrainConfig train;
  DataSection data;
  EvalSection eval;
  InferSection infer;
  FlopsSection flops;
  ParamsSection params;
  RankSection rank;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string to_text() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

}  // namespace mf::cli
