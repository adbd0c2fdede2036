#include "drivatt/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "drivatt/errors.hpp"

namespace drivatt::nn {

std::size_t volume(const std::vector<int>& shape) {
  std::size_t v = 1;
  for (int d : shape) {
    if (d <= 0) throw InvalidArgument("tensor dimensions must be positive: " + shape_string(shape));
    v *= static_cast<std::size_t>(d);
  }
  return v;
}

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  data_.assign(volume(shape_), fill);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != volume(shape_))
    throw ShapeMismatch("tensor data size does not match shape " + shape_string(shape_));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeMismatch("item() requires a single-element tensor");
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

namespace {

// Output columns ox with 0 <= ox*stride - pad + k < extent.
void valid_range(int out_extent, int in_extent, int stride, int pad, int k, int& lo, int& hi) {
  const int off = k - pad;
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  hi = (in_extent - 1 - off) >= 0 ? (in_extent - 1 - off) / stride : -1;
  hi = std::min(hi, out_extent - 1);
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, int stride, int pad) {
  if (x.rank() != 3 || weight.rank() != 4) throw ShapeMismatch("conv2d expects [C,H,W] input and [O,C,K,K] kernel");
  const int c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int c_out = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != c_in || weight.dim(3) != k)
    throw ShapeMismatch("conv2d kernel " + shape_string(weight.shape()) + " does not match input " +
                        shape_string(x.shape()));
  if (bias && (bias->rank() != 1 || bias->dim(0) != c_out)) throw ShapeMismatch("conv2d bias shape mismatch");
  if (stride <= 0 || pad < 0) throw InvalidArgument("conv2d stride must be positive and padding non-negative");
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (w + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ShapeMismatch("conv2d output would be empty");

  Tensor out({c_out, ho, wo}, 0.0);
  const double* xd = x.data().data();
  const double* wd = weight.data().data();
  double* od = out.data().data();
  for (int o = 0; o < c_out; ++o) {
    double* oplane = od + static_cast<std::size_t>(o) * ho * wo;
    if (bias) std::fill(oplane, oplane + static_cast<std::size_t>(ho) * wo, (*bias)[static_cast<std::size_t>(o)]);
    for (int c = 0; c < c_in; ++c) {
      const double* xplane = xd + static_cast<std::size_t>(c) * h * w;
      for (int ky = 0; ky < k; ++ky) {
        int oy_lo, oy_hi;
        valid_range(ho, h, stride, pad, ky, oy_lo, oy_hi);
        for (int kx = 0; kx < k; ++kx) {
          const double wv = wd[((static_cast<std::size_t>(o) * c_in + c) * k + ky) * k + kx];
          if (wv == 0.0) continue;
          int ox_lo, ox_hi;
          valid_range(wo, w, stride, pad, kx, ox_lo, ox_hi);
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const double* xrow = xplane + static_cast<std::size_t>(oy * stride - pad + ky) * w;
            double* orow = oplane + static_cast<std::size_t>(oy) * wo;
            for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += wv * xrow[ox * stride - pad + kx];
          }
        }
      }
    }
  }
  return out;
}

Tensor softmax(const Tensor& logits) {
  Tensor out = logits;
  double mx = -INFINITY;
  for (double v : out.data()) mx = std::max(mx, v);
  double total = 0.0;
  for (double& v : out.data()) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : out.data()) v /= total;
  return out;
}

}  // namespace drivatt::nn
