#include "splat/param_store.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "splat/rng.hpp"

namespace splat {

namespace {
constexpr char kMagic[8] = {'S', 'P', 'L', 'A', 'T', 'P', 'B', '1'};

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("param store: truncated file");
  return v;
}
}  // namespace

Tensor& ParamStore::create(const std::string& path, std::vector<int> shape, Init init,
                           double stddev) {
  if (params_.count(path))
    throw std::runtime_error("param store: duplicate parameter path '" + path + "'");
  const int64_t n = shape_numel(shape);
  std::vector<double> values(static_cast<size_t>(n));
  switch (init) {
    case Init::Zeros:
      break;
    case Init::Ones:
      values.assign(values.size(), 1.0);
      break;
    case Init::TruncNormal: {
      Rng rng(Rng::mix(seed_, fnv1a(path.c_str())));
      for (double& v : values) v = rng.next_trunc_normal(stddev);
      break;
    }
  }
  Tensor t = Tensor::from_values(std::move(shape), std::move(values), /*requires_grad=*/true);
  auto [it, ok] = params_.emplace(path, std::move(t));
  return it->second;
}

Tensor& ParamStore::at(const std::string& path) {
  auto it = params_.find(path);
  if (it == params_.end())
    throw std::runtime_error("param store: unknown parameter path '" + path + "'");
  return it->second;
}

const Tensor& ParamStore::at(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end())
    throw std::runtime_error("param store: unknown parameter path '" + path + "'");
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [path, t] : params_) t.zero_grad();
}

int64_t ParamStore::total_coords() const {
  int64_t n = 0;
  for (const auto& [path, t] : params_) n += t.numel();
  return n;
}

void ParamStore::save(const std::string& file) const {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("param store: cannot open '" + file + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  write_raw<uint64_t>(os, seed_);
  write_raw<uint64_t>(os, params_.size());
  for (const auto& [path, t] : params_) {
    write_raw<uint32_t>(os, static_cast<uint32_t>(path.size()));
    os.write(path.data(), static_cast<std::streamsize>(path.size()));
    write_raw<uint32_t>(os, static_cast<uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_raw<int64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.values().data()),
             static_cast<std::streamsize>(t.values().size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("param store: write failed for '" + file + "'");
}

ParamStore ParamStore::load(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("param store: cannot open '" + file + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("param store: '" + file + "' is not a parameter file (bad magic)");
  const uint64_t seed = read_raw<uint64_t>(is);
  const uint64_t count = read_raw<uint64_t>(is);
  ParamStore store(seed);
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t path_len = read_raw<uint32_t>(is);
    std::string path(path_len, '\0');
    is.read(path.data(), path_len);
    const uint32_t ndim = read_raw<uint32_t>(is);
    std::vector<int> shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(read_raw<int64_t>(is));
    const int64_t n = shape_numel(shape);
    std::vector<double> values(static_cast<size_t>(n));
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!is) throw std::runtime_error("param store: truncated file '" + file + "'");
    store.params_.emplace(path,
                          Tensor::from_values(std::move(shape), std::move(values), true));
  }
  return store;
}

}  // namespace splat
