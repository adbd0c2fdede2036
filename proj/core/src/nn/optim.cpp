#include "drivatt/nn/optim.hpp"

#include <cmath>

#include "drivatt/errors.hpp"

namespace drivatt::nn {

Var ParameterSet::add(std::string name, Tensor init) {
  if (find(name)) throw InvalidArgument("duplicate parameter name: " + name);
  Var v = parameter(std::move(init));
  entries_.emplace_back(std::move(name), v);
  return v;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : entries_) n += v->value.size();
  return n;
}

Var ParameterSet::find(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  return nullptr;
}

void ParameterSet::zero_grad() {
  for (auto& [name, v] : entries_) v->zero_grad();
}

Adam::Adam(const ParameterSet& params, AdamConfig cfg) : cfg_(cfg) {
  if (cfg.learning_rate < 0.0 || cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0 ||
      !(cfg.epsilon > 0.0) || cfg.weight_decay < 0.0)
    throw InvalidArgument("invalid Adam configuration");
  for (const auto& [name, v] : params.entries())
    slots_.push_back({v, std::vector<double>(v->value.size(), 0.0), std::vector<double>(v->value.size(), 0.0)});
}

void Adam::step() {
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (Slot& s : slots_) {
    auto theta = s.param->value.data();
    const bool has_grad = !s.param->grad.empty();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = (has_grad ? s.param->grad[i] : 0.0) + cfg_.weight_decay * theta[i];
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = s.m[i] / bc1;
      const double v_hat = s.v[i] / bc2;
      const double update = cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
      if (update != 0.0) theta[i] -= update;
    }
  }
}

}  // namespace drivatt::nn
