#include "splitgan/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "splitgan/errors.hpp"

namespace splitgan {

namespace {
std::size_t numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (numel(shape_) != data_.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape_) + " wants " +
                     std::to_string(numel(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = v;
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ContractError("item: tensor " + shape_str() + " has " +
                        std::to_string(data_.size()) + " elements, expected 1");
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  // 0*v is exactly 0 for finite v and NaN for Inf/NaN, so one vectorizable
  // accumulation pass replaces a branch per element.
  double acc = 0.0;
  for (double v : data_) acc += 0.0 * v;
  return acc == 0.0;
}

std::string Tensor::shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::string Tensor::shape_str() const { return shape_str(shape_); }

}  // namespace splitgan
