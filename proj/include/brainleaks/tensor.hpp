#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "brainleaks/errors.hpp"

namespace brainleaks {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

using Shape = std::vector<Index>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense real-valued tensor: explicit shape over a flat buffer in row-major
// logical order. Rank-2 tensors expose an Eigen matrix view so the heavy
// lifting stays inside Eigen kernels.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, Vector data);

  static Tensor scalar(double v);
  static Tensor from_matrix(const Matrix& m);
  static Tensor from_vector(const Vector& v);

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index extent(Index dim) const { return shape_.at(static_cast<size_t>(dim)); }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }
  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Rank-2 views/copies. The flat buffer is row-major, hence the RowMatrix map.
  Eigen::Map<RowMatrix> matrix();
  Eigen::Map<const RowMatrix> matrix() const;
  Matrix to_matrix() const { return matrix(); }

  void require_finite(const char* where) const;
  void require_shape(const Shape& expected, const char* where) const;

 private:
  Shape shape_;
  Vector data_;
};

// Numerically stable softmax of a logit vector.
Vector softmax(const Vector& logits);

}  // namespace brainleaks
