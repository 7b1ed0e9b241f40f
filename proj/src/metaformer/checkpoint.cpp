#include "mf/metaformer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "mf/error.hpp"

namespace mf::metaformer {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'M', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), is_(path, std::ios::binary) {
    if (!is_) throw DataError("cannot open checkpoint " + path);
  }

  template <typename T>
  T get() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is_) throw DataError("checkpoint " + path_ + " is truncated");
    return v;
  }

  std::string get_string(std::uint32_t limit = 1u << 24) {
    const auto n = get<std::uint32_t>();
    if (n > limit) throw DataError("checkpoint " + path_ + " has an implausible string length");
    std::string s(n, '\0');
    is_.read(s.data(), n);
    if (!is_) throw DataError("checkpoint " + path_ + " is truncated");
    return s;
  }

  void header() {
    char magic[8];
    is_.read(magic, 8);
    if (!is_ || std::memcmp(magic, kMagic, 8) != 0) throw DataError(path_ + " is not a checkpoint");
    const auto version = get<std::uint32_t>();
    if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  }

  std::map<std::string, Tensor> tensors() {
    std::map<std::string, Tensor> out;
    const auto count = get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name = get_string(4096);
      const auto ndim = get<std::uint32_t>();
      if (ndim > 8) throw DataError("checkpoint tensor " + name + " has too many axes");
      Shape shape(ndim);
      for (auto& d : shape) {
        d = get<std::int64_t>();
        if (d < 0) throw DataError("checkpoint tensor " + name + " has a negative extent");
      }
      std::vector<double> data(static_cast<std::size_t>(numel(shape)));
      is_.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
      if (!is_) throw DataError("checkpoint " + path_ + " is truncated");
      out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return out;
  }

 private:
  std::string path_;
  std::ifstream is_;
};

void restore(MetaFormer& model, const std::map<std::string, Tensor>& stored) {
  auto params = model.named_parameters();
  if (params.size() != stored.size()) {
    throw DataError("checkpoint holds " + std::to_string(stored.size()) + " tensors, model has " +
                    std::to_string(params.size()));
  }
  for (const auto& p : params) {
    auto it = stored.find(p.name);
    if (it == stored.end()) throw DataError("checkpoint is missing " + p.name);
    if (it->second.shape() != p.tensor.shape()) {
      throw DataError("checkpoint tensor " + p.name + " has shape " + shape_str(it->second.shape()) +
                      ", model expects " + shape_str(p.tensor.shape()));
    }
  }
  for (auto& p : params) {
    const auto src = stored.at(p.name).data();
    auto dst = p.tensor.mutable_data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace

void save_checkpoint(MetaFormer& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path);
  os.write(kMagic, 8);
  put<std::uint32_t>(os, kVersion);
  put_string(os, model.config().to_text());
  const auto params = model.named_parameters();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_string(os, p.name);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensor.dim()));
    for (auto d : p.tensor.shape()) put<std::int64_t>(os, d);
    const auto data = p.tensor.data();
    os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!os) throw DataError("failed writing checkpoint " + path);
}

ModelConfig read_checkpoint_config(const std::string& path) {
  Reader r(path);
  r.header();
  return ModelConfig::parse(r.get_string());
}

MetaFormer load_checkpoint(const std::string& path) {
  Reader r(path);
  r.header();
  MetaFormer model(ModelConfig::parse(r.get_string()), 0);
  restore(model, r.tensors());
  return model;
}

void restore_checkpoint(MetaFormer& model, const std::string& path) {
  Reader r(path);
  r.header();
  r.get_string();
  restore(model, r.tensors());
}

}  // namespace mf::metaformer
