#include "brainleaks/tensor.hpp"

#include <numeric>
#include <sstream>

namespace brainleaks {

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (Index e : shape_) {
    if (e <= 0) throw DimensionError("tensor extent must be positive, got " + shape_string(shape_));
  }
  data_ = Vector::Zero(shape_size(shape_));
}

Tensor::Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::scalar(double v) {
  Vector d(1);
  d[0] = v;
  return Tensor({1}, std::move(d));
}

Tensor Tensor::from_matrix(const Matrix& m) {
  Tensor t({m.rows(), m.cols()});
  t.matrix() = m;
  return t;
}

Tensor Tensor::from_vector(const Vector& v) {
  return Tensor({v.size()}, v);
}

Eigen::Map<RowMatrix> Tensor::matrix() {
  if (rank() != 2) throw DimensionError("matrix view requires rank-2 tensor, got " + shape_string(shape_));
  return {data_.data(), shape_[0], shape_[1]};
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  if (rank() != 2) throw DimensionError("matrix view requires rank-2 tensor, got " + shape_string(shape_));
  return {data_.data(), shape_[0], shape_[1]};
}

void Tensor::require_finite(const char* where) const {
  if (!data_.allFinite()) throw DomainError(std::string(where) + ": non-finite value in tensor");
}

void Tensor::require_shape(const Shape& expected, const char* where) const {
  if (shape_ != expected) {
    throw DimensionError(std::string(where) + ": expected shape " + shape_string(expected) +
                         ", got " + shape_string(shape_));
  }
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  return e / e.sum();
}

}  // namespace brainleaks
