#include "jcas/nn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace jcas::nn {

namespace {

constexpr char kMagic[4] = {'J', 'C', 'N', 'N'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw CheckpointError("truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

}  // namespace

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.values.size() != t.shape.size()) throw CheckpointError("tensor " + t.name + " size mismatch");
    put_u32(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(os, static_cast<std::uint32_t>(t.shape.n));
    put_u32(os, static_cast<std::uint32_t>(t.shape.h));
    put_u32(os, static_cast<std::uint32_t>(t.shape.w));
    put_u32(os, static_cast<std::uint32_t>(t.shape.c));
    os.write(reinterpret_cast<const char*>(t.values.data()),
             static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  }
  if (!os) throw CheckpointError("write failed: " + path.string());
}

std::vector<NamedTensor> read_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError(path.string() + ": not a JCNN file");
  }
  const int version = is.get();
  if (version != kVersion) throw CheckpointError("unsupported JCNN version " + std::to_string(version));
  const std::uint32_t count = get_u32(is);
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const std::uint32_t len = get_u32(is);
    t.name.resize(len);
    if (!is.read(t.name.data(), len)) throw CheckpointError("truncated checkpoint");
    t.shape.n = get_u32(is);
    t.shape.h = get_u32(is);
    t.shape.w = get_u32(is);
    t.shape.c = get_u32(is);
    t.values.resize(t.shape.size());
    if (!is.read(reinterpret_cast<char*>(t.values.data()),
                 static_cast<std::streamsize>(t.values.size() * sizeof(float)))) {
      throw CheckpointError("truncated checkpoint");
    }
    out.push_back(std::move(t));
  }
  return out;
}

template <typename T>
static NamedTensor to_named(const std::string& name, const Tensor<T>& t) {
  return {name, t.shape(), std::vector<float>(t.vec().begin(), t.vec().end())};
}

template <typename T>
void save_params(const std::filesystem::path& path, const ParamList<T>& params,
                 const std::vector<const ParamStore<T>*>& adam) {
  std::vector<NamedTensor> ts;
  for (const auto* p : params) ts.push_back(to_named(p->name, p->value));
  for (std::size_t s = 0; s < adam.size(); ++s) {
    const auto* store = adam[s];
    const std::string prefix = "adam" + std::to_string(s);
    for (std::size_t i = 0; i < store->size(); ++i) {
      const auto& name = const_cast<ParamStore<T>*>(store)->param(i).name;
      ts.push_back(to_named(prefix + "/m/" + name, store->first_moment(i)));
      ts.push_back(to_named(prefix + "/v/" + name, store->second_moment(i)));
    }
    // The step counter fits exactly in a float for any realistic run length.
    ts.push_back({prefix + "/t", Shape{1, 1, 1, 1}, {static_cast<float>(store->steps())}});
  }
  write_tensors(path, ts);
}

template <typename T>
void load_params(const std::filesystem::path& path, const ParamList<T>& params,
                 const std::vector<ParamStore<T>*>& adam) {
  std::map<std::string, NamedTensor> byname;
  for (auto& t : read_tensors(path)) byname.emplace(t.name, std::move(t));
  auto fetch = [&](const std::string& name, Tensor<T>& dst) {
    auto it = byname.find(name);
    if (it == byname.end()) throw CheckpointError("checkpoint lacks tensor " + name);
    if (it->second.shape != dst.shape()) {
      throw CheckpointError("tensor " + name + " has shape " + it->second.shape.str() + ", expected " +
                            dst.shape().str());
    }
    std::copy(it->second.values.begin(), it->second.values.end(), dst.vec().begin());
  };
  for (auto* p : params) fetch(p->name, p->value);
  for (std::size_t s = 0; s < adam.size(); ++s) {
    auto* store = adam[s];
    const std::string prefix = "adam" + std::to_string(s);
    for (std::size_t i = 0; i < store->size(); ++i) {
      fetch(prefix + "/m/" + store->param(i).name, store->first_moment(i));
      fetch(prefix + "/v/" + store->param(i).name, store->second_moment(i));
    }
    auto it = byname.find(prefix + "/t");
    if (it == byname.end()) throw CheckpointError("checkpoint lacks " + prefix + "/t");
    store->set_steps(static_cast<std::uint64_t>(it->second.values.at(0)));
  }
}

template <typename T>
std::vector<std::vector<T>> snapshot(const ParamList<T>& params) {
  std::vector<std::vector<T>> s;
  s.reserve(params.size());
  for (const auto* p : params) s.push_back(p->value.vec());
  return s;
}

template <typename T>
void restore(const ParamList<T>& params, const std::vector<std::vector<T>>& snap) {
  if (snap.size() != params.size()) throw CheckpointError("snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (snap[i].size() != params[i]->value.size()) throw CheckpointError("snapshot shape mismatch");
    params[i]->value.vec() = snap[i];
  }
}

// ---------------------------------------------------------------- gradcheck

double relative_error(double analytic, double numeric, double floor) {
  const double d = std::abs(analytic - numeric);
  return d / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradcheckResult gradcheck(const std::function<double()>& loss, const std::vector<GradProbe>& probes,
                          double eps, double floor) {
  GradcheckResult r;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    double* v = probes[i].value;
    const double orig = *v;
    *v = orig + eps;
    const double lp = loss();
    *v = orig - eps;
    const double lm = loss();
    *v = orig;
    const double num = (lp - lm) / (2.0 * eps);
    const double e = relative_error(probes[i].analytic, num, floor);
    if (e > r.max_rel_error || i == 0) {
      r.max_rel_error = std::max(r.max_rel_error, e);
      r.worst = "probe " + std::to_string(i) + ": analytic " + std::to_string(probes[i].analytic) +
                " numeric " + std::to_string(num);
    }
    ++r.coordinates;
  }
  return r;
}

std::vector<GradProbe> sample_param_probes(const ParamList<double>& params, std::size_t count, Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p]->trainable) continue;
    for (std::size_t j = 0; j < params[p]->value.size(); ++j) all.emplace_back(p, j);
  }
  std::shuffle(all.begin(), all.end(), rng);
  if (all.size() > count) all.resize(count);
  std::vector<GradProbe> out;
  for (auto [p, j] : all) out.push_back({&params[p]->value[j], params[p]->grad[j]});
  return out;
}

std::vector<GradProbe> sample_tensor_probes(Tensor<double>& value, const Tensor<double>& grad,
                                            std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(value.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  if (idx.size() > count) idx.resize(count);
  std::vector<GradProbe> out;
  for (auto j : idx) out.push_back({&value[j], grad[j]});
  return out;
}

GradcheckResult gradcheck_layer(Layer<double>& layer, Tensor<double> x, Mode mode, Rng& rng,
                                std::size_t param_coords, std::size_t input_coords, double eps,
                                double floor) {
  const Shape os = layer.output_shape(x.shape());
  Tensor<double> r(os);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (auto& v : r.vec()) v = nd(rng);

  ParamList<double> params;
  layer.collect(params);
  for (auto* p : params) p->grad.fill(0.0);
  layer.forward(x, mode);
  const Tensor<double> gx = layer.backward(r);

  auto loss = [&]() {
    const Tensor<double> y = layer.forward(x, mode);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  auto probes = sample_param_probes(params, param_coords, rng);
  auto in_probes = sample_tensor_probes(x, gx, input_coords, rng);
  probes.insert(probes.end(), in_probes.begin(), in_probes.end());
  return gradcheck(loss, probes, eps, floor);
}

#define JCAS_CKPT(T)                                                                              \
  template void save_params<T>(const std::filesystem::path&, const ParamList<T>&,                 \
                               const std::vector<const ParamStore<T>*>&);                         \
  template void load_params<T>(const std::filesystem::path&, const ParamList<T>&,                 \
                               const std::vector<ParamStore<T>*>&);                               \
  template std::vector<std::vector<T>> snapshot<T>(const ParamList<T>&);                          \
  template void restore<T>(const ParamList<T>&, const std::vector<std::vector<T>>&);

JCAS_CKPT(float)
JCAS_CKPT(double)

}  // namespace jcas::nn
