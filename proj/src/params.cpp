#include "magcn/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "magcn/errors.hpp"

namespace magcn {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ContractError("Rng::index on empty range");
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return static_cast<std::size_t>(v % n);
}

Tensor ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name: " + name);
  Tensor leaf = value.detach(true);
  index_.emplace(name, items_.size());
  items_.emplace_back(name, leaf);
  return leaf;
}

Tensor ParamStore::add_uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return add(name, Tensor(std::move(shape), std::move(values)));
}

Tensor ParamStore::add_xavier(const std::string& name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = fan_in + fan_out ? std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)) : 0.0;
  return add_uniform(name, {fan_in, fan_out}, bound, rng);
}

Tensor ParamStore::add_constant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor::full(std::move(shape), value));
}

const Tensor& ParamStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return items_[it->second].second;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : items_) t.zero_grad();
}

std::vector<ParamRecord> ParamStore::snapshot() const {
  std::vector<ParamRecord> out;
  out.reserve(items_.size());
  for (const auto& [name, t] : items_) out.push_back({name, t.shape(), {t.data().begin(), t.data().end()}});
  return out;
}

void ParamStore::restore(const std::vector<ParamRecord>& records) {
  for (const auto& r : records) {
    const auto it = index_.find(r.name);
    if (it == index_.end()) throw ValidationError("unknown parameter in snapshot: " + r.name);
    Tensor t = items_[it->second].second;
    if (t.shape() != r.shape) {
      throw DimensionError("parameter " + r.name + " has shape " + shape_str(t.shape()) + ", snapshot has " +
                           shape_str(r.shape));
    }
    std::copy(r.values.begin(), r.values.end(), t.mutable_data().begin());
  }
}

}  // namespace magcn
