#include "drivatt/nn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "drivatt/errors.hpp"

namespace drivatt::nn {
namespace {

thread_local bool g_grad_enabled = true;

bool any_requires_grad(const std::vector<Var>& parents) {
  return std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p && p->requires_grad; });
}

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled && any_requires_grad(parents)) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(fn);
  }
  return node;
}

void accumulate(const Var& target, std::span<const double> g) {
  if (!target || !target->requires_grad) return;
  auto dst = target->grad_buffer().data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeMismatch(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                        shape_string(b.shape()) + " differ");
}

void valid_range(int out_extent, int in_extent, int stride, int pad, int k, int& lo, int& hi) {
  const int off = k - pad;
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  hi = (in_extent - 1 - off) >= 0 ? (in_extent - 1 - off) / stride : -1;
  hi = std::min(hi, out_extent - 1);
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, int stride, int pad, Tensor* dx,
                     Tensor* dw, Tensor* db) {
  const int c_in = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int c_out = w.dim(0), k = w.dim(2);
  const int ho = dy.dim(1), wo = dy.dim(2);
  const double* xp = x.data().data();
  const double* wp = w.data().data();
  const double* gp = dy.data().data();
  for (int o = 0; o < c_out; ++o) {
    const double* gplane = gp + static_cast<std::size_t>(o) * ho * wo;
    if (db) {
      double s = 0.0;
      for (std::size_t i = 0; i < static_cast<std::size_t>(ho) * wo; ++i) s += gplane[i];
      (*db)[static_cast<std::size_t>(o)] += s;
    }
    for (int c = 0; c < c_in; ++c) {
      const double* xplane = xp + static_cast<std::size_t>(c) * h * wd;
      double* dxplane = dx ? dx->data().data() + static_cast<std::size_t>(c) * h * wd : nullptr;
      for (int ky = 0; ky < k; ++ky) {
        int oy_lo, oy_hi;
        valid_range(ho, h, stride, pad, ky, oy_lo, oy_hi);
        for (int kx = 0; kx < k; ++kx) {
          const std::size_t widx = ((static_cast<std::size_t>(o) * c_in + c) * k + ky) * k + kx;
          const double wv = wp[widx];
          int ox_lo, ox_hi;
          valid_range(wo, wd, stride, pad, kx, ox_lo, ox_hi);
          double wgrad = 0.0;
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const std::size_t in_row = static_cast<std::size_t>(oy * stride - pad + ky) * wd;
            const double* grow = gplane + static_cast<std::size_t>(oy) * wo;
            const double* xrow = xplane + in_row;
            for (int ox = ox_lo; ox <= ox_hi; ++ox) wgrad += grow[ox] * xrow[ox * stride - pad + kx];
            if (dxplane) {
              double* dxrow = dxplane + in_row;
              for (int ox = ox_lo; ox <= ox_hi; ++ox) dxrow[ox * stride - pad + kx] += wv * grow[ox];
            }
          }
          if (dw) (*dw)[widx] += wgrad;
        }
      }
    }
  }
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return node;
}

Var parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return node;
}

void backward(const Var& root) {
  if (!root || !root->requires_grad) return;
  if (root->value.size() != 1) throw ShapeMismatch("backward() needs a scalar root");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p && p->requires_grad && p->backward_fn && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  Tensor out = nn::conv2d(x->value, weight->value, bias ? &bias->value : nullptr, stride, pad);
  return make_node(std::move(out), {x, weight, bias}, [x, weight, bias, stride, pad](Node& self) {
    Tensor* dx = x->requires_grad ? &x->grad_buffer() : nullptr;
    Tensor* dw = weight->requires_grad ? &weight->grad_buffer() : nullptr;
    Tensor* db = bias && bias->requires_grad ? &bias->grad_buffer() : nullptr;
    conv2d_backward(x->value, weight->value, self.grad, stride, pad, dx, dw, db);
  });
}

Var add(const Var& a, const Var& b) {
  require_same(a->value, b->value, "add");
  Tensor out = a->value;
  auto od = out.data();
  auto bd = b->value.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    accumulate(a, self.grad.data());
    accumulate(b, self.grad.data());
  });
}

Var scale(const Var& x, double s) {
  Tensor out = x->value;
  for (double& v : out.data()) v *= s;
  return make_node(std::move(out), {x}, [x, s](Node& self) {
    if (!x->requires_grad) return;
    auto dx = x->grad_buffer().data();
    auto g = self.grad.data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += s * g[i];
  });
}

Var relu(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return make_node(std::move(out), {x}, [x](Node& self) {
    if (!x->requires_grad) return;
    auto dx = x->grad_buffer().data();
    auto in = x->value.data();
    auto g = self.grad.data();
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (in[i] > 0.0) dx[i] += g[i];
  });
}

Var tanh(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.data()) v = std::tanh(v);
  return make_node(std::move(out), {x}, [x](Node& self) {
    if (!x->requires_grad) return;
    auto dx = x->grad_buffer().data();
    auto y = self.value.data();
    auto g = self.grad.data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(const Var& x) {
  Tensor out = x->value;
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  return make_node(std::move(out), {x}, [x](Node& self) {
    if (!x->requires_grad) return;
    auto dx = x->grad_buffer().data();
    auto y = self.value.data();
    auto g = self.grad.data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
    throw ShapeMismatch("concat_channels: " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  Tensor out({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
  std::copy(av.data().begin(), av.data().end(), out.data().begin());
  std::copy(bv.data().begin(), bv.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(av.size()));
  const std::size_t split = av.size();
  return make_node(std::move(out), {a, b}, [a, b, split](Node& self) {
    auto g = self.grad.data();
    accumulate(a, g.subspan(0, split));
    accumulate(b, g.subspan(split));
  });
}

Var dropout(const Var& x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidArgument("dropout rate must be in [0, 1)");
  if (rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  Tensor mask(x->value.shape(), 0.0);
  for (double& m : mask.data()) m = keep(rng) ? inv : 0.0;
  Tensor out = x->value;
  auto od = out.data();
  auto md = mask.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= md[i];
  return make_node(std::move(out), {x}, [x, mask = std::move(mask)](Node& self) {
    if (!x->requires_grad) return;
    auto dx = x->grad_buffer().data();
    auto g = self.grad.data();
    auto md = mask.data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * md[i];
  });
}

Var affine(const Var& weight, const Var& x, const Var& bias) {
  const Tensor& w = weight->value;
  if (w.rank() != 2 || x->value.size() != static_cast<std::size_t>(w.dim(1)) ||
      bias->value.size() != static_cast<std::size_t>(w.dim(0)))
    throw ShapeMismatch("affine: weight " + shape_string(w.shape()) + " incompatible with input/bias");
  const int m = w.dim(0), n = w.dim(1);
  Tensor out({m}, 0.0);
  for (int i = 0; i < m; ++i) {
    double s = bias->value[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) s += w[static_cast<std::size_t>(i * n + j)] * x->value[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s;
  }
  return make_node(std::move(out), {weight, x, bias}, [weight, x, bias, m, n](Node& self) {
    const auto g = self.grad.data();
    if (weight->requires_grad) {
      auto dw = weight->grad_buffer().data();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          dw[static_cast<std::size_t>(i * n + j)] += g[static_cast<std::size_t>(i)] * x->value[static_cast<std::size_t>(j)];
    }
    if (x->requires_grad) {
      auto dx = x->grad_buffer().data();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          dx[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i)] * weight->value[static_cast<std::size_t>(i * n + j)];
    }
    accumulate(bias, g);
  });
}

Var mix(const Var& coeffs, const Var& stack) {
  const Tensor& s = stack->value;
  const int n = s.dim(0);
  if (coeffs->value.size() != static_cast<std::size_t>(n))
    throw ShapeMismatch("mix: coefficient count does not match stack depth");
  std::vector<int> slice_shape(s.shape().begin() + 1, s.shape().end());
  if (slice_shape.empty()) slice_shape = {1};
  const std::size_t slice = s.size() / static_cast<std::size_t>(n);
  Tensor out(slice_shape, 0.0);
  for (int k = 0; k < n; ++k) {
    const double r = coeffs->value[static_cast<std::size_t>(k)];
    const double* src = s.data().data() + static_cast<std::size_t>(k) * slice;
    for (std::size_t i = 0; i < slice; ++i) out[i] += r * src[i];
  }
  return make_node(std::move(out), {coeffs, stack}, [coeffs, stack, n, slice](Node& self) {
    const auto g = self.grad.data();
    if (coeffs->requires_grad) {
      auto dc = coeffs->grad_buffer().data();
      for (int k = 0; k < n; ++k) {
        const double* src = stack->value.data().data() + static_cast<std::size_t>(k) * slice;
        double acc = 0.0;
        for (std::size_t i = 0; i < slice; ++i) acc += g[i] * src[i];
        dc[static_cast<std::size_t>(k)] += acc;
      }
    }
    if (stack->requires_grad) {
      auto ds = stack->grad_buffer().data();
      for (int k = 0; k < n; ++k) {
        const double r = coeffs->value[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < slice; ++i) ds[static_cast<std::size_t>(k) * slice + i] += r * g[i];
      }
    }
  });
}

Var softmax_cross_entropy(const Var& logits, const Tensor& target) {
  if (logits->value.size() != target.size()) throw ShapeMismatch("softmax_cross_entropy: size mismatch");
  Tensor prob = nn::softmax(logits->value);
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target[i] != 0.0) loss -= target[i] * std::log(std::max(prob[i], 1e-300));
  double target_mass = 0.0;
  for (double t : target.data()) target_mass += t;
  return make_node(Tensor::scalar(loss), {logits},
                   [logits, prob = std::move(prob), target, target_mass](Node& self) {
                     if (!logits->requires_grad) return;
                     const double g = self.grad[0];
                     auto dl = logits->grad_buffer().data();
                     for (std::size_t i = 0; i < dl.size(); ++i)
                       dl[i] += g * (target_mass * prob[i] - target[i]);
                   });
}

}  // namespace drivatt::nn
