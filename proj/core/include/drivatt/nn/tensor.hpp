#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace drivatt::nn {

std::size_t volume(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

// Dense row-major tensor of doubles. Feature maps are [C, H, W];
// convolution kernels are [O, C, K, K].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, v); }

  const std::vector<int>& shape() const { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double item() const;
  void fill(double v);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

// Direct 2D cross-correlation. x: [C, H, W]; weight: [O, C, K, K];
// bias: [O] or nullptr. Output [O, Ho, Wo] with
// Ho = (H + 2*pad - K) / stride + 1.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, int stride, int pad);

// Softmax over all elements.
Tensor softmax(const Tensor& logits);

}  // namespace drivatt::nn
