#pragma once

#include <string>
#include <utility>
#include <vector>

#include "drivatt/nn/autograd.hpp"

namespace drivatt::nn {

// Ordered collection of named trainable tensors.
class ParameterSet {
 public:
  Var add(std::string name, Tensor init);

  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  // Returns nullptr when absent.
  Var find(const std::string& name) const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Var>> entries_;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Coupled L2 penalty: the gradient is augmented by weight_decay * theta.
  double weight_decay = 1e-4;
};

class Adam {
 public:
  Adam(const ParameterSet& params, AdamConfig cfg);

  // Applies one update using the accumulated gradients. Parameters with no
  // gradient are treated as having zero loss gradient.
  void step();
  long steps() const { return steps_; }

 private:
  struct Slot {
    Var param;
    std::vector<double> m;
    std::vector<double> v;
  };
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  long steps_ = 0;
};

}  // namespace drivatt::nn
