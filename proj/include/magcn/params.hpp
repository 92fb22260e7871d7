#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "magcn/tensor.hpp"

namespace magcn {

/// Seeded generator with distribution code of our own, so that streams are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

  /// Independent child stream derived from this one.
  Rng fork() { return Rng(next() ^ 0x9e3779b97f4a7c15ULL); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// One serialized parameter: name, shape and row-major values.
struct ParamRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;

  bool operator==(const ParamRecord&) const = default;
};

/// Ordered, named collection of trainable leaf tensors.
class ParamStore {
 public:
  /// Registers a trainable leaf. Names must be unique.
  Tensor add(const std::string& name, Tensor value);
  Tensor add_uniform(const std::string& name, Shape shape, double bound, Rng& rng);
  /// Glorot/Xavier uniform for a fan_in x fan_out matrix.
  Tensor add_xavier(const std::string& name, std::size_t fan_in, std::size_t fan_out, Rng& rng);
  Tensor add_constant(const std::string& name, Shape shape, double value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  /// Total scalar count over all tensors.
  std::size_t parameter_count() const;

  void zero_grad();
  std::vector<ParamRecord> snapshot() const;
  /// Overwrites values in place; every record must match a registered name and shape.
  void restore(const std::vector<ParamRecord>& records);

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace magcn
