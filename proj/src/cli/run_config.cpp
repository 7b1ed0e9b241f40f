#include "mf/cli/run_config.hpp"

#include <set>

#include "mf/error.hpp"

namespace mf::cli {

namespace {

std::uint64_t read_seed(io::SectionReader& r, std::uint64_t fallback) {
  const auto v = r.get_int("seed", static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError("seed must be non-negative");
  return static_cast<std::uint64_t>(v);
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

const char* flag(bool b) { return b ? "true" : "false"; }

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  const auto doc = io::IniDocument::parse(text);
  static const std::set<std::string> known{"run", "model", "train", "data", "eval", "infer", "flops", "params", "rank"};
  for (const auto& name : doc.section_names()) {
    if (!known.count(name)) throw ConfigError("unknown config section [" + name + "]");
  }
  RunConfig c;
  {
    io::SectionReader r(doc, "run");
    c.run.seed = read_seed(r, c.run.seed);
    c.run.threads = static_cast<int>(r.get_int("threads", c.run.threads));
    c.run.out = r.get_string("out", c.run.out);
    r.finish();
  }
  c.model = metaformer::ModelConfig::read(doc);
  c.train = trainer::TrainConfig::read(doc);
  // One seed drives the whole run; [train] seed may only restate it.
  if (doc.has_section("train")) {
    for (const auto& [k, v] : doc.section("train")) {
      if (k == "seed" && c.train.seed != c.run.seed) {
        throw ConfigError("[train] seed differs from [run] seed; set the seed in [run]");
      }
    }
  }
  c.train.seed = c.run.seed;
  {
    io::SectionReader r(doc, "data");
    auto& d = c.data;
    d.source = r.get_string("source", d.source);
    if (d.source != "synthetic" && d.source != "squares" && d.source != "folder") {
      throw ConfigError("[data] source must be synthetic, squares or folder");
    }
    d.dir = r.get_string("dir", d.dir);
    d.n = r.get_int("n", d.n);
    d.size = r.get_int("size", d.size);
    d.channels = r.get_int("channels", d.channels);
    d.shift = r.get_double("shift", d.shift);
    d.noise = r.get_double("noise", d.noise);
    d.val_fraction = r.get_double("val_fraction", d.val_fraction);
    if (!(d.val_fraction >= 0 && d.val_fraction < 1)) throw ConfigError("[data] val_fraction must lie in [0, 1)");
    d.val_dir = r.get_string("val_dir", d.val_dir);
    d.seed = read_seed(r, d.seed);
    r.finish();
  }
  {
    io::SectionReader r(doc, "eval");
    c.eval.checkpoint = r.get_string("checkpoint", c.eval.checkpoint);
    c.eval.dataset = r.get_string("dataset", c.eval.dataset);
    c.eval.submission = r.get_string("submission", c.eval.submission);
    r.finish();
  }
  {
    io::SectionReader r(doc, "infer");
    auto& i = c.infer;
    i.checkpoint = r.get_string("checkpoint", i.checkpoint);
    i.image = r.get_string("image", i.image);
    i.patch_h = r.get_int("patch_h", i.patch_h);
    i.patch_w = r.get_int("patch_w", i.patch_w);
    i.overlap = r.get_double("overlap", i.overlap);
    i.weighting = r.get_string("weighting", i.weighting);
    if (i.weighting != "gaussian" && i.weighting != "uniform") {
      throw ConfigError("[infer] weighting must be gaussian or uniform");
    }
    i.dump_logits = r.get_bool("dump_logits", i.dump_logits);
    r.finish();
  }
  {
    io::SectionReader r(doc, "flops");
    c.flops.input = r.get_int("input", c.flops.input);
    c.flops.kernel = r.get_int("kernel", c.flops.kernel);
    c.flops.macs = r.get_bool("macs", c.flops.macs);
    r.finish();
  }
  {
    io::SectionReader r(doc, "params");
    c.params.signatures = r.get_list("signatures", ';', c.params.signatures);
    r.finish();
  }
  {
    io::SectionReader r(doc, "rank");
    auto& k = c.rank;
    k.cases_dir = r.get_string("cases_dir", k.cases_dir);
    k.wins_csv = r.get_string("wins_csv", k.wins_csv);
    k.comparator = r.get_string("comparator", k.comparator);
    if (k.comparator != "auto" && k.comparator != "bootstrap" && k.comparator != "wilcoxon") {
      throw ConfigError("[rank] comparator must be auto, bootstrap or wilcoxon");
    }
    k.repeats = r.get_int("repeats", k.repeats);
    k.alpha = r.get_double("alpha", k.alpha);
    k.two_sided = r.get_bool("two_sided", k.two_sided);
    k.allow_missing = r.get_bool("allow_missing", k.allow_missing);
    r.finish();
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  const auto doc = io::IniDocument::load(path);
  return parse(doc.to_text());
}

std::string RunConfig::to_text() const {
  io::IniDocument doc;
  doc.set("run", "seed", std::to_string(run.seed));
  doc.set("run", "threads", std::to_string(run.threads));
  doc.set("run", "out", run.out);
  model.write(doc);
  train.write(doc);
  doc.set("data", "source", data.source);
  doc.set("data", "dir", data.dir);
  doc.set("data", "n", std::to_string(data.n));
  doc.set("data", "size", std::to_string(data.size));
  doc.set("data", "channels", std::to_string(data.channels));
  doc.set("data", "shift", io::format_double(data.shift));
  doc.set("data", "noise", io::format_double(data.noise));
  doc.set("data", "val_fraction", io::format_double(data.val_fraction));
  doc.set("data", "val_dir", data.val_dir);
  doc.set("data", "seed", std::to_string(data.seed));
  doc.set("eval", "checkpoint", eval.checkpoint);
  doc.set("eval", "dataset", eval.dataset);
  doc.set("eval", "submission", eval.submission);
  doc.set("infer", "checkpoint", infer.checkpoint);
  doc.set("infer", "image", infer.image);
  doc.set("infer", "patch_h", std::to_string(infer.patch_h));
  doc.set("infer", "patch_w", std::to_string(infer.patch_w));
  doc.set("infer", "overlap", io::format_double(infer.overlap));
  doc.set("infer", "weighting", infer.weighting);
  doc.set("infer", "dump_logits", flag(infer.dump_logits));
  doc.set("flops", "input", std::to_string(flops.input));
  doc.set("flops", "kernel", std::to_string(flops.kernel));
  doc.set("flops", "macs", flag(flops.macs));
  doc.set("params", "signatures", join(params.signatures, "; "));
  doc.set("rank", "cases_dir", rank.cases_dir);
  doc.set("rank", "wins_csv", rank.wins_csv);
  doc.set("rank", "comparator", rank.comparator);
  doc.set("rank", "repeats", std::to_string(rank.repeats));
  doc.set("rank", "alpha", io::format_double(rank.alpha));
  doc.set("rank", "two_sided", flag(rank.two_sided));
  doc.set("rank", "allow_missing", flag(rank.allow_missing));
  return doc.to_text();
}

}  // namespace mf::cli
