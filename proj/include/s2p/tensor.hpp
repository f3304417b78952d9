#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "s2p/rng.hpp"

namespace s2p {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Vectors are (n x 1).
class Array {
 public:
  Array() = default;
  Array(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool same_shape(const Array& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  void fill(double v);

  bool operator==(const Array& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Init { zeros, glorot_uniform };

struct Parameter {
  std::string name;
  Array value;
  bool frozen = false;
  // Adaptive-moment optimizer state.
  Array first_moment;
  Array second_moment;
  std::uint64_t step = 0;
};

// Named parameter arrays in insertion order. Shapes are fixed once added.
class ParameterSet {
 public:
  Array& add(std::string name, std::size_t rows, std::size_t cols, Init init, RngStream& rng);

  bool contains(std::string_view name) const;
  const Array& value(std::string_view name) const;
  Array& mutable_value(std::string_view name);
  const Parameter& at(std::string_view name) const;
  Parameter& at(std::string_view name);

  std::vector<Parameter>& entries() noexcept { return params_; }
  const std::vector<Parameter>& entries() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const;

  void set_frozen(bool frozen);
  bool all_frozen() const;
  bool any_frozen() const;

  // Bitwise equality of values (optimizer state ignored).
  bool same_values(const ParameterSet& o) const;
  bool operator==(const ParameterSet& o) const;

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Gradient arrays keyed by parameter name.
class Gradients {
 public:
  Gradients() = default;
  // Zero arrays for every parameter (frozen ones too, unless skip_frozen).
  static Gradients zeros_like(const ParameterSet& params, bool skip_frozen = false);

  Array& operator[](std::string_view name);
  const Array* find(std::string_view name) const;
  Array* find(std::string_view name);
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  void erase(std::string_view name);
  std::size_t size() const noexcept { return grads_.size(); }

  void scale(double factor);
  void zero();
  void add(const Gradients& other);
  double squared_norm() const;

  auto begin() const { return grads_.begin(); }
  auto end() const { return grads_.end(); }

 private:
  std::map<std::string, Array, std::less<>> grads_;
};

// Small dense kernels shared by the primitives.
namespace blas {
// y += W x, W is (out x in).
void gemv_acc(const Array& w, std::span<const double> x, std::span<double> y);
// dx += W^T dy.
void gemv_t_acc(const Array& w, std::span<const double> dy, std::span<double> dx);
// dW += dy x^T.
void ger_acc(Array& dw, std::span<const double> dy, std::span<const double> x);
// y += W[:, col].
void add_column(const Array& w, std::size_t col, std::span<double> y);
// dW[:, col] += dy.
void add_to_column(Array& dw, std::size_t col, std::span<const double> dy);
void axpy(double a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);
}  // namespace blas

}  // namespace s2p
