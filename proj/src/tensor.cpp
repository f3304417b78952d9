#include "s2p/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "s2p/error.hpp"

namespace s2p {

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Array& ParameterSet::add(std::string name, std::size_t rows, std::size_t cols, Init init,
                         RngStream& rng) {
  if (index_.count(name)) throw Error(ErrorKind::contract, "duplicate parameter " + name);
  Parameter p;
  p.name = name;
  p.value = Array(rows, cols);
  p.first_moment = Array(rows, cols);
  p.second_moment = Array(rows, cols);
  if (init == Init::glorot_uniform) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& v : p.value.values()) v = (2.0 * rng.uniform() - 1.0) * a;
  }
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return params_.back().value;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorKind::index, "no parameter named " + std::string(name));
  return it->second;
}

bool ParameterSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }
const Array& ParameterSet::value(std::string_view name) const { return params_[index_of(name)].value; }
Array& ParameterSet::mutable_value(std::string_view name) { return params_[index_of(name)].value; }
const Parameter& ParameterSet::at(std::string_view name) const { return params_[index_of(name)]; }
Parameter& ParameterSet::at(std::string_view name) { return params_[index_of(name)]; }

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::set_frozen(bool frozen) {
  for (auto& p : params_) p.frozen = frozen;
}

bool ParameterSet::all_frozen() const {
  return std::all_of(params_.begin(), params_.end(), [](const Parameter& p) { return p.frozen; });
}

bool ParameterSet::any_frozen() const {
  return std::any_of(params_.begin(), params_.end(), [](const Parameter& p) { return p.frozen; });
}

static bool bitwise_equal(const Array& a, const Array& b) {
  return a.same_shape(b) && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool ParameterSet::same_values(const ParameterSet& o) const {
  if (params_.size() != o.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != o.params_[i].name) return false;
    if (!bitwise_equal(params_[i].value, o.params_[i].value)) return false;
  }
  return true;
}

bool ParameterSet::operator==(const ParameterSet& o) const {
  if (!same_values(o)) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = o.params_[i];
    if (a.frozen != b.frozen || a.step != b.step) return false;
    if (!bitwise_equal(a.first_moment, b.first_moment)) return false;
    if (!bitwise_equal(a.second_moment, b.second_moment)) return false;
  }
  return true;
}

Gradients Gradients::zeros_like(const ParameterSet& params, bool skip_frozen) {
  Gradients g;
  for (const auto& p : params.entries()) {
    if (skip_frozen && p.frozen) continue;
    g.grads_.emplace(p.name, Array(p.value.rows(), p.value.cols()));
  }
  return g;
}

Array& Gradients::operator[](std::string_view name) {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw Error(ErrorKind::index, "no gradient named " + std::string(name));
  return it->second;
}

const Array* Gradients::find(std::string_view name) const {
  auto it = grads_.find(name);
  return it == grads_.end() ? nullptr : &it->second;
}

Array* Gradients::find(std::string_view name) {
  auto it = grads_.find(name);
  return it == grads_.end() ? nullptr : &it->second;
}

void Gradients::erase(std::string_view name) {
  auto it = grads_.find(name);
  if (it != grads_.end()) grads_.erase(it);
}

void Gradients::scale(double factor) {
  for (auto& [_, a] : grads_)
    for (double& v : a.values()) v *= factor;
}

void Gradients::zero() {
  for (auto& [_, a] : grads_) a.fill(0.0);
}

void Gradients::add(const Gradients& other) {
  for (const auto& [name, a] : other.grads_) {
    Array* mine = find(name);
    if (!mine) {
      grads_.emplace(name, a);
      continue;
    }
    if (!mine->same_shape(a)) throw Error(ErrorKind::shape, "gradient shape mismatch for " + name);
    blas::axpy(1.0, a.values(), mine->values());
  }
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& [_, a] : grads_) s += blas::dot(a.values(), a.values());
  return s;
}

namespace blas {

void gemv_acc(const Array& w, std::span<const double> x, std::span<double> y) {
  const std::size_t rows = w.rows(), cols = w.cols();
  if (x.size() != cols || y.size() != rows) throw Error(ErrorKind::shape, "gemv dimension mismatch");
  const double* wp = w.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = wp + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

void gemv_t_acc(const Array& w, std::span<const double> dy, std::span<double> dx) {
  const std::size_t rows = w.rows(), cols = w.cols();
  if (dy.size() != rows || dx.size() != cols) throw Error(ErrorKind::shape, "gemv_t dimension mismatch");
  const double* wp = w.data();
  double* out = dx.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    const double* row = wp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += row[c] * g;
  }
}

void ger_acc(Array& dw, std::span<const double> dy, std::span<const double> x) {
  const std::size_t rows = dw.rows(), cols = dw.cols();
  if (dy.size() != rows || x.size() != cols) throw Error(ErrorKind::shape, "ger dimension mismatch");
  double* wp = dw.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    double* row = wp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += g * x[c];
  }
}

void add_column(const Array& w, std::size_t col, std::span<double> y) {
  if (col >= w.cols() || y.size() != w.rows()) throw Error(ErrorKind::shape, "column index mismatch");
  const std::size_t cols = w.cols();
  const double* wp = w.data() + col;
  for (std::size_t r = 0; r < y.size(); ++r) y[r] += wp[r * cols];
}

void add_to_column(Array& dw, std::size_t col, std::span<const double> dy) {
  if (col >= dw.cols() || dy.size() != dw.rows()) throw Error(ErrorKind::shape, "column index mismatch");
  const std::size_t cols = dw.cols();
  double* wp = dw.data() + col;
  for (std::size_t r = 0; r < dy.size(); ++r) wp[r * cols] += dy[r];
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::shape, "axpy size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::shape, "dot size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace blas
}  // namespace s2p
