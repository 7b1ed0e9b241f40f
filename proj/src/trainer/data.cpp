#include "mf/trainer/data.hpp"

#include <filesystem>

#include "mf/error.hpp"
#include "mf/io/csv.hpp"
#include "mf/io/pnm.hpp"

namespace mf::trainer {

Dataset Dataset::subset(const std::vector<std::int64_t>& indices) const {
  const std::int64_t C = images.size(1), H = images.size(2), W = images.size(3);
  const std::int64_t plane = C * H * W;
  Dataset out;
  out.num_classes = num_classes;
  out.images = Tensor({static_cast<std::int64_t>(indices.size()), C, H, W});
  auto dst = out.images.mutable_data();
  const auto src = images.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::int64_t j = indices[i];
    if (j < 0 || j >= size()) throw DimensionError("dataset: index out of range");
    std::copy(src.begin() + j * plane, src.begin() + (j + 1) * plane, dst.begin() + static_cast<std::int64_t>(i) * plane);
    if (!labels.empty()) out.labels.push_back(labels[j]);
    if (!masks.empty()) {
      out.masks.insert(out.masks.end(), masks.begin() + j * H * W, masks.begin() + (j + 1) * H * W);
    }
    if (!ids.empty()) out.ids.push_back(ids[j]);
  }
  return out;
}

std::vector<std::int64_t> Dataset::class_counts() const {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (auto y : segmentation() ? masks : labels) {
    if (y < 0 || y >= num_classes) throw DataError("dataset: class id " + std::to_string(y) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

Dataset synthetic_separable(std::int64_t n, std::int64_t size, std::int64_t channels, std::uint64_t seed,
                            double shift, double noise) {
  if (n < 2 || size < 1 || channels < 2) throw ConfigError("synthetic set needs n >= 2 and at least 2 channels");
  Rng rng(seed);
  Dataset d;
  d.num_classes = 2;
  d.images = normal({n, channels, size, size}, 0.0, noise, rng);
  auto px = d.images.mutable_data();
  const std::int64_t plane = size * size;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t y = i % 2;
    const double s = y == 1 ? shift : -shift;
    for (std::int64_t p = 0; p < plane; ++p) {
      px[(i * channels + 0) * plane + p] += s;
      px[(i * channels + 1) * plane + p] -= s;
    }
    d.labels.push_back(y);
    d.ids.push_back("syn" + std::to_string(i));
  }
  return d;
}

Dataset synthetic_squares(std::int64_t n, std::int64_t size, std::int64_t channels, std::uint64_t seed) {
  if (n < 1 || size < 8 || channels < 1) throw ConfigError("synthetic squares need n >= 1 and size >= 8");
  Rng rng(seed);
  Dataset d;
  d.num_classes = 2;
  d.images = normal({n, channels, size, size}, 0.0, 0.2, rng);
  d.masks.assign(static_cast<std::size_t>(n * size * size), 0);
  auto px = d.images.mutable_data();
  std::uniform_int_distribution<std::int64_t> side(size / 4, size / 2);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t s = side(rng);
    std::uniform_int_distribution<std::int64_t> pos(0, size - s);
    const std::int64_t top = pos(rng), left = pos(rng);
    for (std::int64_t y = top; y < top + s; ++y) {
      for (std::int64_t x = left; x < left + s; ++x) {
        d.masks[(i * size + y) * size + x] = 1;
        for (std::int64_t c = 0; c < channels; ++c) px[((i * channels + c) * size + y) * size + x] += 1.0;
      }
    }
    d.ids.push_back("sq" + std::to_string(i));
  }
  return d;
}

namespace {

void append_image(std::vector<double>& buf, const io::Image8& img) {
  for (std::int64_t c = 0; c < img.channels; ++c) {
    for (std::int64_t y = 0; y < img.height; ++y) {
      for (std::int64_t x = 0; x < img.width; ++x) buf.push_back(img.at(y, x, c) / 255.0);
    }
  }
}

struct Frame {
  std::int64_t channels = -1, height = -1, width = -1;

  void check(const io::Image8& img, const std::string& name) {
    if (channels < 0) {
      channels = img.channels;
      height = img.height;
      width = img.width;
    } else if (img.channels != channels || img.height != height || img.width != width) {
      throw DataError(name + ": every image in a folder must share one size and channel count");
    }
  }
};

}  // namespace

Dataset load_classification_folder(const std::string& dir, std::int64_t num_classes) {
  const std::filesystem::path root(dir);
  const auto table = io::read_csv((root / "labels.csv").string());
  const auto file_col = table.column("file");
  const auto label_col = table.column("label");
  if (table.rows.empty()) throw DataError(dir + ": labels.csv lists no images");
  Dataset d;
  d.num_classes = num_classes;
  std::vector<double> buf;
  Frame frame;
  for (const auto& row : table.rows) {
    const auto img = io::read_pnm((root / row[file_col]).string());
    frame.check(img, row[file_col]);
    append_image(buf, img);
    const auto y = io::parse_int(row[label_col], "labels.csv");
    if (y < 0 || y >= num_classes) throw DataError(row[file_col] + ": label out of range");
    d.labels.push_back(y);
    d.ids.push_back(row[file_col]);
  }
  d.images = Tensor({static_cast<std::int64_t>(d.labels.size()), frame.channels, frame.height, frame.width},
                    std::move(buf));
  return d;
}

Dataset load_segmentation_folder(const std::string& dir, std::int64_t num_classes) {
  const std::filesystem::path root(dir);
  const auto table = io::read_csv((root / "pairs.csv").string());
  const auto image_col = table.column("image");
  const auto mask_col = table.column("mask");
  if (table.rows.empty()) throw DataError(dir + ": pairs.csv lists no images");
  Dataset d;
  d.num_classes = num_classes;
  std::vector<double> buf;
  Frame frame;
  for (const auto& row : table.rows) {
    const auto img = io::read_pnm((root / row[image_col]).string());
    frame.check(img, row[image_col]);
    append_image(buf, img);
    const auto mask = io::read_pnm((root / row[mask_col]).string());
    if (mask.channels != 1 || mask.height != img.height || mask.width != img.width) {
      throw DataError(row[mask_col] + ": mask must be a single-channel image matching its input");
    }
    for (auto v : mask.pixels) {
      if (v >= num_classes) throw DataError(row[mask_col] + ": class id out of range");
      d.masks.push_back(v);
    }
    d.ids.push_back(row[image_col]);
  }
  d.images = Tensor({static_cast<std::int64_t>(d.ids.size()), frame.channels, frame.height, frame.width},
                    std::move(buf));
  return d;
}

}  // namespace mf::trainer
