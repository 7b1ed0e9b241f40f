#include "mf/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "mf/complexity/complexity.hpp"
#include "mf/error.hpp"
#include "mf/evalrank/case_scores.hpp"
#include "mf/evalrank/metrics.hpp"
#include "mf/evalrank/ranking.hpp"
#include "mf/evalrank/sliding_window.hpp"
#include "mf/io/csv.hpp"
#include "mf/io/pnm.hpp"
#include "mf/io/svg.hpp"
#include "mf/kernels/kernels.hpp"
#include "mf/metaformer/checkpoint.hpp"
#include "mf/metaformer/model.hpp"
#include "mf/trainer/data.hpp"
#include "mf/trainer/train.hpp"

namespace mf::cli {

namespace fs = std::filesystem;

namespace {

fs::path prepare(const RunConfig& cfg, std::ostream& log) {
  const fs::path out(cfg.run.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
  if (cfg.run.threads > 0) kernels::set_threads(cfg.run.threads);
  const std::string text = cfg.to_text();
  io::write_text((out / "resolved.ini").string(), text);
  log << "# resolved config\n" << text << "# end resolved config\n";
  return out;
}

trainer::Dataset load_data(const DataSection& d, const std::string& dir, std::int64_t num_classes) {
  if (d.source == "synthetic") return trainer::synthetic_separable(d.n, d.size, d.channels, d.seed, d.shift, d.noise);
  if (d.source == "squares") return trainer::synthetic_squares(d.n, d.size, d.channels, d.seed);
  if (dir.empty()) throw ConfigError("[data] dir is required for folder data");
  // A folder holding pairs.csv is a segmentation set.
  if (fs::exists(fs::path(dir) / "pairs.csv")) return trainer::load_segmentation_folder(dir, num_classes);
  return trainer::load_classification_folder(dir, num_classes);
}

std::vector<double> softmax_row(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += (p[i] = std::exp(z[i] - mx));
  for (auto& v : p) v /= total;
  return p;
}

std::vector<int> argmax_map(const Tensor& logits) {
  const std::int64_t K = logits.size(1), HW = logits.size(2) * logits.size(3);
  const auto d = logits.data();
  std::vector<int> out(static_cast<std::size_t>(HW));
  for (std::int64_t p = 0; p < HW; ++p) {
    int best = 0;
    for (std::int64_t k = 1; k < K; ++k) {
      if (d[k * HW + p] > d[best * HW + p]) best = static_cast<int>(k);
    }
    out[p] = best;
  }
  return out;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
  if (dynamic_cast<const NumericError*>(&e)) return kNumericAbort;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return kDataError;
  return 1;
}

void cmd_flops(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = prepare(cfg, log);
  const auto reports = complexity::stage_sweep(cfg.model, cfg.flops.input, cfg.flops.kernel, cfg.flops.macs);
  io::write_text((out / "flops.csv").string(), complexity::to_csv(reports));

  io::BarChart chart;
  chart.title = "Token mixer FLOPs per stage (" + std::to_string(cfg.flops.input) + "x" +
                std::to_string(cfg.flops.input) + " input, K=" + std::to_string(cfg.flops.kernel) + ")";
  chart.y_label = "FLOPs (log scale)";
  for (auto kind : mixers::all_kinds()) chart.series.push_back(mixers::kind_name(kind));
  for (std::int64_t s = 0; s < metaformer::ModelConfig::kStages; ++s) {
    chart.groups.push_back("stage " + std::to_string(s));
    std::vector<double> row;
    for (const auto& r : reports) {
      if (r.stage == s) row.push_back(static_cast<double>(r.flops));
    }
    chart.values.push_back(row);
  }
  io::write_text((out / "flops.svg").string(), io::grouped_bar_chart_svg(chart));
  log << "wrote " << reports.size() << " rows to " << (out / "flops.csv").string() << "\n";
}

void cmd_params(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = prepare(cfg, log);
  std::ostringstream csv;
  csv << "signature,backbone_ex_mixers,mixers,pos_emb,head,total,total_m\n";
  for (const auto& sig : cfg.params.signatures) {
    metaformer::ModelConfig m = cfg.model;
    m.signature = metaformer::parse_signature(sig, m.heads_divisor);
    const auto pb = metaformer::count_params(m);
    char total_m[32];
    std::snprintf(total_m, sizeof total_m, "%.2f", static_cast<double>(pb.total()) / 1e6);
    csv << '"' << metaformer::signature_string(m.signature) << "\"," << pb.backbone_ex_mixers << ',' << pb.mixers
        << ',' << pb.pos_emb << ',' << pb.head << ',' << pb.total() << ',' << total_m << '\n';
    log << sig << ": " << total_m << "M\n";
  }
  io::write_text((out / "params.csv").string(), csv.str());
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = prepare(cfg, log);
  trainer::Dataset all = load_data(cfg.data, cfg.data.dir, cfg.model.num_classes);
  trainer::Dataset train_set, val_set;
  bool has_val = false;
  if (!cfg.data.val_dir.empty()) {
    train_set = all;
    val_set = load_data(cfg.data, cfg.data.val_dir, cfg.model.num_classes);
    has_val = true;
  } else if (cfg.data.val_fraction > 0) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(all.size()));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(cfg.data.seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = static_cast<std::int64_t>(std::floor(cfg.data.val_fraction * static_cast<double>(all.size())));
    if (n_val > 0 && n_val < all.size()) {
      val_set = all.subset({idx.begin(), idx.begin() + n_val});
      train_set = all.subset({idx.begin() + n_val, idx.end()});
      has_val = true;
    } else {
      train_set = all;
    }
  } else {
    train_set = all;
  }

  metaformer::MetaFormer model(cfg.model, cfg.run.seed);
  std::ofstream log_csv(out / "train_log.csv", std::ios::trunc);
  if (!log_csv) throw DataError("cannot write training log");
  trainer::TrainLog train_log(&log_csv);
  trainer::TrainOptions opts;
  opts.validation = has_val ? &val_set : nullptr;
  opts.log = &train_log;
  trainer::TrainConfig tc = cfg.train;
  tc.seed = cfg.run.seed;
  const auto result = trainer::train(model, train_set, tc, opts);
  metaformer::save_checkpoint(model, (out / "checkpoint.mfck").string());

  std::ostringstream summary;
  summary << "steps,final_loss,train_accuracy,best_val,best_step\n"
          << result.steps << ',' << io::format_exact(result.final_loss) << ','
          << io::format_exact(result.train_accuracy) << ',';
  if (result.best_val) summary << io::format_exact(*result.best_val);
  summary << ',' << result.best_step << '\n';
  io::write_text((out / "summary.csv").string(), summary.str());
  log << "trained " << result.steps << " steps, final loss " << result.final_loss << ", train accuracy "
      << result.train_accuracy << "\n";
}

void cmd_eval(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = prepare(cfg, log);
  if (cfg.eval.checkpoint.empty()) throw ConfigError("[eval] checkpoint is required");
  auto model = metaformer::load_checkpoint(cfg.eval.checkpoint);
  const auto data = load_data(cfg.data, cfg.data.dir, model.config().num_classes);
  const Tensor logits = trainer::predict(model, data.images);

  evalrank::CaseScores cs;
  cs.dataset = cfg.eval.dataset;
  cs.submission = cfg.eval.submission;
  for (std::int64_t i = 0; i < data.size(); ++i) {
    cs.case_ids.push_back(data.ids.empty() ? "case" + std::to_string(i) : data.ids[static_cast<std::size_t>(i)]);
  }
  std::ostringstream metrics;
  metrics << "metric,value\n";
  const std::int64_t K = logits.size(1);
  if (!data.segmentation()) {
    cs.task = evalrank::TaskKind::classification;
    for (std::int64_t i = 0; i < data.size(); ++i) {
      cs.labels.push_back(static_cast<int>(data.labels[static_cast<std::size_t>(i)]));
      cs.scores.push_back(softmax_row(logits.data().subspan(static_cast<std::size_t>(i * K), static_cast<std::size_t>(K))));
    }
    const double auc = evalrank::auc_macro(cs.scores, cs.labels);
    const double f1 = evalrank::f1_macro(evalrank::argmax_rows(cs.scores), cs.labels);
    metrics << "auc," << io::format_exact(auc) << "\nf1_macro," << io::format_exact(f1) << '\n';
    log << "auc " << auc << ", macro-F1 " << f1 << "\n";
  } else {
    cs.task = evalrank::TaskKind::segmentation;
    const std::int64_t H = logits.size(2), W = logits.size(3);
    const std::size_t plane = static_cast<std::size_t>(K * H * W);
    double total = 0.0;
    for (std::int64_t i = 0; i < data.size(); ++i) {
      Tensor one({1, K, H, W}, std::vector<double>(logits.data().begin() + i * plane,
                                                    logits.data().begin() + (i + 1) * plane));
      const auto pred = argmax_map(one);
      const std::vector<int> truth(data.masks.begin() + i * H * W, data.masks.begin() + (i + 1) * H * W);
      const double d = evalrank::dsc(pred, truth, static_cast<int>(K), true);
      cs.dsc.push_back(d);
      total += d;
    }
    metrics << "dsc_mean," << io::format_exact(total / static_cast<double>(data.size())) << '\n';
    log << "mean DSC " << total / static_cast<double>(data.size()) << "\n";
  }
  io::write_text((out / "cases.csv").string(), evalrank::to_csv(cs));
  io::write_text((out / "metrics.csv").string(), metrics.str());
}

void cmd_rank(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = prepare(cfg, log);
  using WinList = std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::int64_t>>>>;
  WinList wins;
  auto slot = [&](const std::string& dataset) -> std::vector<std::pair<std::string, std::int64_t>>& {
    for (auto& [d, list] : wins) {
      if (d == dataset) return list;
    }
    wins.emplace_back(dataset, std::vector<std::pair<std::string, std::int64_t>>{});
    return wins.back().second;
  };

  if (!cfg.rank.wins_csv.empty()) {
    const auto t = io::read_csv(cfg.rank.wins_csv);
    const auto dc = t.column("dataset"), sc = t.column("submission"), wc = t.column("wins");
    for (const auto& row : t.rows) slot(row[dc]).emplace_back(row[sc], io::parse_int(row[wc], cfg.rank.wins_csv));
  } else if (!cfg.rank.cases_dir.empty()) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(cfg.rank.cases_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::map<std::string, std::vector<evalrank::CaseScores>> by_dataset;
    std::vector<std::string> dataset_order;
    for (const auto& f : files) {
      const std::string stem = f.stem().string();
      const auto sep = stem.find("__");
      if (sep == std::string::npos) throw DataError(f.string() + ": expected <dataset>__<submission>.csv");
      const std::string ds = stem.substr(0, sep);
      if (!by_dataset.count(ds)) dataset_order.push_back(ds);
      by_dataset[ds].push_back(evalrank::read_case_scores(f.string(), ds, stem.substr(sep + 2)));
    }
    if (by_dataset.empty()) throw DataError(cfg.rank.cases_dir + ": no case score files");
    for (const auto& ds : dataset_order) {
      const auto& subs = by_dataset[ds];
      std::string comparator = cfg.rank.comparator;
      if (comparator == "auto") {
        comparator = subs.front().task == evalrank::TaskKind::segmentation ? "wilcoxon" : "bootstrap";
      }
      evalrank::Comparator cmp;
      if (comparator == "wilcoxon") {
        cmp = evalrank::wilcoxon_comparator({cfg.rank.alpha, cfg.rank.two_sided, 25});
      } else {
        cmp = evalrank::bootstrap_comparator({cfg.rank.repeats, cfg.rank.alpha, cfg.run.seed});
      }
      const auto w = evalrank::pairwise_wins(subs, cmp);
      auto& list = slot(ds);
      for (std::size_t i = 0; i < subs.size(); ++i) list.emplace_back(subs[i].submission, w[i]);
      log << ds << ": " << subs.size() << " submissions compared with " << comparator << "\n";
    }
  } else {
    throw ConfigError("[rank] needs wins_csv or cases_dir");
  }

  const auto table = evalrank::rank_from_wins(wins, cfg.rank.allow_missing);
  io::write_text((out / "rank.csv").string(), table.to_csv());
  for (const auto& g : table.global) log << g.submission << " " << g.geomean << "\n";
}

void cmd_infer(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = prepare(cfg, log);
  if (cfg.infer.checkpoint.empty() || cfg.infer.image.empty()) {
    throw ConfigError("[infer] checkpoint and image are required");
  }
  auto model = metaformer::load_checkpoint(cfg.infer.checkpoint);
  if (model.config().head != metaformer::HeadKind::segment) {
    throw ConfigError("[infer] checkpoint must hold a segmentation model");
  }
  const auto img = io::read_pnm(cfg.infer.image);
  if (img.channels != model.config().in_channels) {
    throw DataError("image has " + std::to_string(img.channels) + " channels, model expects " +
                    std::to_string(model.config().in_channels));
  }
  Tensor image({1, img.channels, img.height, img.width});
  auto d = image.mutable_data();
  for (std::int64_t c = 0; c < img.channels; ++c) {
    for (std::int64_t y = 0; y < img.height; ++y) {
      for (std::int64_t x = 0; x < img.width; ++x) d[(c * img.height + y) * img.width + x] = img.at(y, x, c) / 255.0;
    }
  }
  evalrank::SlidingWindowOptions sw;
  sw.patch_h = cfg.infer.patch_h;
  sw.patch_w = cfg.infer.patch_w;
  sw.overlap = cfg.infer.overlap;
  sw.weighting = cfg.infer.weighting == "uniform" ? evalrank::WindowWeighting::uniform
                                                   : evalrank::WindowWeighting::gaussian;
  const Tensor logits = evalrank::sliding_window_infer(
      [&](const Tensor& patch) { return model.forward(patch); }, image, sw);
  const auto mask = argmax_map(logits);
  io::Image8 m;
  m.width = img.width;
  m.height = img.height;
  m.channels = 1;
  for (int v : mask) m.pixels.push_back(static_cast<std::uint8_t>(v));
  io::write_pnm((out / "mask.pgm").string(), m);
  if (cfg.infer.dump_logits) {
    std::ofstream os(out / "logits.bin", std::ios::binary | std::ios::trunc);
    const auto ld = logits.data();
    os.write(reinterpret_cast<const char*>(ld.data()), static_cast<std::streamsize>(ld.size() * sizeof(double)));
    if (!os) throw DataError("failed writing logits");
  }
  log << "wrote mask " << (out / "mask.pgm").string() << "\n";
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"flops", "params", "train", "eval", "rank", "infer"};
  return names;
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    if (name == "flops") {
      cmd_flops(cfg, log);
    } else if (name == "params") {
      cmd_params(cfg, log);
    } else if (name == "train") {
      cmd_train(cfg, log);
    } else if (name == "eval") {
      cmd_eval(cfg, log);
    } else if (name == "rank") {
      cmd_rank(cfg, log);
    } else if (name == "infer") {
      cmd_infer(cfg, log);
    } else {
      throw ConfigError("unknown command '" + name + "'");
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kOk;
}

}  // namespace mf::cli
