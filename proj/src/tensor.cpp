#include "pvae/tensor.hpp"

#include <string>

namespace pvae {

Index shape_product(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d < 1) throw ShapeError("tensor dimensions must be >= 1");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<Index> shape) : shape_(std::move(shape)) {
  data_ = Eigen::VectorXd::Zero(shape_product(shape_));
}

Tensor::Tensor(std::vector<Index> shape, std::vector<double> data)
    : shape_(std::move(shape)) {
  Index n = shape_product(shape_);
  if (n != static_cast<Index>(data.size()))
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape product " + std::to_string(n));
  data_ = Eigen::Map<const Eigen::VectorXd>(data.data(), n);
}

Tensor Tensor::zeros(std::vector<Index> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<Index> shape, double value) {
  Tensor t(std::move(shape));
  t.data_.setConstant(value);
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor({static_cast<Index>(values.size())},
                std::vector<double>(values));
}

Tensor Tensor::from_matrix(const RowMatrixXd& m) {
  Tensor t({m.rows(), m.cols()});
  t.mat() = m;
  return t;
}

Index Tensor::rows() const {
  if (rank() <= 1) return 1;
  if (rank() == 2) return shape_[0];
  throw ShapeError("2-d view requires rank <= 2");
}

Index Tensor::cols() const {
  if (rank() == 0) return 1;
  return shape_.back();
}

Eigen::Map<RowMatrixXd> Tensor::mat() {
  return {data_.data(), rows(), cols()};
}

Eigen::Map<const RowMatrixXd> Tensor::mat() const {
  return {data_.data(), rows(), cols()};
}

}  // namespace pvae
