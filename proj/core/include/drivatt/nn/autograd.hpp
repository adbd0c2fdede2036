#pragma once

// Minimal tape-free reverse-mode differentiation: every op returns a node
// that remembers its parents and how to push its gradient back to them.

#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "drivatt/nn/tensor.hpp"

namespace drivatt::nn {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  // Zero-initialized on first use.
  Tensor& grad_buffer();
  void zero_grad() { grad = Tensor(); }
};

Var constant(Tensor value);
Var parameter(Tensor value);

// Seeds d(root)/d(root) = 1 and propagates to every reachable node that
// requires a gradient. Gradients accumulate into existing buffers.
void backward(const Var& root);

bool grad_enabled();

// Disables graph recording in scope (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- ops ----

// x: [C,H,W]; weight: [O,C,K,K]; bias: [O] or null.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
Var add(const Var& a, const Var& b);
Var scale(const Var& x, double s);
Var relu(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
// Concatenates [C1,H,W] and [C2,H,W] along channels.
Var concat_channels(const Var& a, const Var& b);
// Inverted dropout: zeroes each element with probability `rate` and
// rescales the survivors by 1/(1-rate).
Var dropout(const Var& x, double rate, std::mt19937_64& rng);
// weight: [M,N]; x: [N]; bias: [M].
Var affine(const Var& weight, const Var& x, const Var& bias);
// Weighted sum of the slices of `stack` ([N, ...]) by `coeffs` ([N]).
Var mix(const Var& coeffs, const Var& stack);
// -sum_i target_i * log softmax(logits)_i, softmax over all elements.
Var softmax_cross_entropy(const Var& logits, const Tensor& target);

}  // namespace drivatt::nn
