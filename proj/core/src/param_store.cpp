#include "maligan/param_store.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace maligan {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor& ParamStore::add(const std::string& name, Shape shape) {
  if (params_.count(name)) throw std::invalid_argument("ParamStore::add: duplicate parameter " + name);
  auto [it, ok] = params_.emplace(name, Tensor(std::move(shape)));
  it->second.ensure_grad();
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
  return it->second;
}

std::size_t ParamStore::flat_size() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.numel();
  return n;
}

std::vector<double> ParamStore::flat_values() const {
  std::vector<double> out;
  out.reserve(flat_size());
  for (const auto& [_, t] : params_) out.insert(out.end(), t.values.begin(), t.values.end());
  return out;
}

std::vector<double> ParamStore::flat_grads() const {
  std::vector<double> out;
  out.reserve(flat_size());
  for (const auto& [_, t] : params_) {
    if (t.grad.empty())
      out.insert(out.end(), t.numel(), 0.0);
    else
      out.insert(out.end(), t.grad.begin(), t.grad.end());
  }
  return out;
}

void ParamStore::set_flat_values(std::span<const double> v) {
  if (v.size() != flat_size())
    throw std::invalid_argument("ParamStore::set_flat_values: length mismatch");
  std::size_t off = 0;
  for (auto& [_, t] : params_) {
    std::copy(v.begin() + off, v.begin() + off + t.numel(), t.values.begin());
    off += t.numel();
  }
}

void ParamStore::add_flat_to_grads(std::span<const double> g) {
  if (g.size() != flat_size())
    throw std::invalid_argument("ParamStore::add_flat_to_grads: length mismatch");
  std::size_t off = 0;
  for (auto& [_, t] : params_) {
    t.ensure_grad();
    for (std::size_t i = 0; i < t.numel(); ++i) t.grad[i] += g[off + i];
    off += t.numel();
  }
}

void ParamStore::zero_grads() {
  for (auto& [_, t] : params_) t.zero_grad();
}

namespace {
void require_finite_grads(const std::map<std::string, Tensor>& params) {
  for (const auto& [name, t] : params)
    for (double g : t.grad)
      if (!std::isfinite(g))
        throw std::runtime_error("optimizer step aborted: non-finite gradient in parameter " + name);
}
}  // namespace

void ParamStore::sgd_step(double lr) {
  if (lr <= 0.0) throw std::invalid_argument("sgd_step: lr must be positive");
  require_finite_grads(params_);
  for (auto& [_, t] : params_) {
    t.ensure_grad();
    for (std::size_t i = 0; i < t.numel(); ++i) t.values[i] -= lr * t.grad[i];
  }
  zero_grads();
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
  if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be positive");
  require_finite_grads(params_);
  ++adam_t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t_));
  for (auto& [name, t] : params_) {
    t.ensure_grad();
    auto& st = adam_[name];
    if (st.m.size() != t.numel()) {
      st.m.assign(t.numel(), 0.0);
      st.v.assign(t.numel(), 0.0);
    }
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double g = t.grad[i];
      st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * g;
      st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * g * g;
      const double mhat = st.m[i] / bc1;
      const double vhat = st.v[i] / bc2;
      t.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  zero_grads();
}

namespace {

constexpr char kMagic[8] = {'M', 'A', 'L', 'I', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void ParamStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, kVersion);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params_.size()));
  for (const auto& [name, t] : params_) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.values.data()),
             static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

void ParamStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto count = read_pod<std::uint32_t>(is);
  std::map<std::string, Tensor> loaded;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto ndim = read_pod<std::uint32_t>(is);
    Shape shape(ndim);
    for (auto& d : shape) d = read_pod<std::uint64_t>(is);
    Tensor t{shape};
    is.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    t.ensure_grad();
    loaded.emplace(std::move(name), std::move(t));
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  params_ = std::move(loaded);
  adam_.clear();
  adam_t_ = 0;
}

}  // namespace maligan
