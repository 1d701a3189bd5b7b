#include "tubeground/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "tubeground/errors.hpp"

namespace tubeground {
namespace {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (const std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {
  if (shape_.size() > 3) throw ContractViolation("tensor rank > 3 unsupported");
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.size() > 3) throw ContractViolation("tensor rank > 3 unsupported");
  if (data_.size() != shape_size(shape_)) {
    throw ContractViolation("tensor data size does not match shape");
  }
}

Tensor Tensor::scalar(double v) {
  Tensor t{std::vector<std::size_t>{}};
  t.data_ = {v};
  return t;
}

Tensor Tensor::zeros(std::initializer_list<std::size_t> shape) {
  return Tensor(std::vector<std::size_t>(shape));
}

Tensor Tensor::full(std::initializer_list<std::size_t> shape, double v) {
  Tensor t{std::vector<std::size_t>(shape)};
  t.fill(v);
  return t;
}

Tensor Tensor::row(const std::vector<double>& values) {
  return Tensor({1, values.size()}, values);
}

Tensor Tensor::vec(const std::vector<double>& values) {
  return Tensor({values.size()}, values);
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ContractViolation("from_rows requires at least one row");
  const std::size_t cols = rows.front().size();
  Tensor t({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ContractViolation("ragged rows in from_rows");
    for (std::size_t j = 0; j < cols; ++j) t.at(i, j) = rows[i][j];
  }
  return t;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ", ";
    os << shape_[i];
  }
  os << ")";
  return os.str();
}

double& Tensor::at(std::size_t i) {
  return data_[i];
}
double Tensor::at(std::size_t i) const {
  return data_[i];
}

double& Tensor::at(std::size_t i, std::size_t j) {
  return data_[i * shape_[1] + j];
}
double Tensor::at(std::size_t i, std::size_t j) const {
  return data_[i * shape_[1] + j];
}

double& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}
double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ContractViolation("item() on tensor of size " + std::to_string(data_.size()));
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  for (const double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double v) {
  std::fill(data_.begin(), data_.end(), v);
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ContractViolation("reshape size mismatch");
  }
  return Tensor(std::move(shape), data_);
}

}  // namespace tubeground
