#include "symcanon/tensor.hpp"

#include <functional>
#include <numeric>

#include "symcanon/error.hpp"

namespace symcanon {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const std::vector<std::size_t>& shape) {
  require(!shape.empty(), "tensor shape must have at least one dimension");
  for (auto d : shape) require(d >= 1, "tensor dimensions must be >= 1, got " + shape_str(shape));
}

}  // namespace

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  require(product(shape_) == data_.size(), "tensor data length " + std::to_string(data_.size()) +
                                          " does not match shape " + symcanon::shape_str(shape_));
}

Tensor Tensor::row(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    require(row.size() == c, "ragged rows in Tensor::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

double Tensor::item() const {
  require(data_.size() == 1, "item() on tensor of shape " + symcanon::shape_str(shape_));
  return data_[0];
}

std::string Tensor::shape_str() const { return symcanon::shape_str(shape_); }

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

}  // namespace symcanon
