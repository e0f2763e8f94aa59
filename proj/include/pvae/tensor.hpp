#pragma once

#include <Eigen/Dense>
#include <initializer_list>
#include <vector>

#include "pvae/errors.hpp"

namespace pvae {

using Index = Eigen::Index;
using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense 64-bit float tensor: a shape plus row-major flat storage.
// Rank 1 tensors are treated as row vectors by the 2-d views.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<Index> shape);
  Tensor(std::vector<Index> shape, std::vector<double> data);

  static Tensor zeros(std::vector<Index> shape);
  static Tensor full(std::vector<Index> shape, double value);
  static Tensor scalar(double value);
  static Tensor row(std::initializer_list<double> values);  // shape {n}
  static Tensor from_matrix(const RowMatrixXd& m);          // shape {r, c}

  const std::vector<Index>& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }

  // 2-d view dimensions: rank-1 tensors are 1 x n, rank-2 are m x n.
  Index rows() const;
  Index cols() const;

  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }
  double& at(Index r, Index c) { return data_[r * cols() + c]; }
  double at(Index r, Index c) const { return data_[r * cols() + c]; }

  Eigen::Map<RowMatrixXd> mat();
  Eigen::Map<const RowMatrixXd> mat() const;
  Eigen::Map<Eigen::VectorXd> flat() { return {data_.data(), data_.size()}; }
  Eigen::Map<const Eigen::VectorXd> flat() const {
    return {data_.data(), data_.size()};
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const { return data_.allFinite(); }

  void set_zero() { data_.setZero(); }

 private:
  std::vector<Index> shape_;
  Eigen::VectorXd data_;
};

Index shape_product(const std::vector<Index>& shape);

}  // namespace pvae
