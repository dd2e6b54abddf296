#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cyclemon/rng.hpp"

namespace cyclemon::ad {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty unless gradients are tracked

  Tensor() = default;
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor of(std::vector<std::size_t> shape, std::vector<double> values);

  std::size_t size() const { return values.size(); }
  void ensure_grad();  // allocate + zero
  void zero_grad();
};

// Eager reverse-mode tape: each op computes its output immediately and
// records a closure that adds into the input gradients. One tape per forward
// pass; parameter tensors live outside the tape and accumulate gradients
// across passes until zero_grad().
class Tape {
public:
  using Id = std::size_t;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Tape-owned leaf. track_grad makes its gradient available after backward.
  Id value(Tensor t, bool track_grad = false);
  // External parameter leaf; gradients accumulate into p->grad.
  Id param(Tensor* p);

  // x: C_in x H x W, k: C_out x C_in x kH x kW, b: C_out. Valid convolution,
  // no padding.
  Id conv2d(Id x, Id k, Id b, std::size_t stride_h, std::size_t stride_w);
  // x: n, w: m x n, b: m.
  Id dense(Id x, Id w, Id b);
  Id relu(Id x);
  // Inverted dropout; identity when training == false.
  Id dropout(Id x, double rate, Rng& rng, bool training);
  Id flatten(Id x);
  Id concat(const std::vector<Id>& parts);  // 1-D inputs
  // Returns a scalar loss node; softmax probabilities are kept for backward.
  Id softmax_cross_entropy(Id logits, int target);

  const Tensor& val(Id id) const;
  const std::vector<double>& grad(Id id) const;
  // Seeds d(root)/d(root) = 1 and walks the tape in reverse. root must be a
  // scalar.
  void backward(Id root);

private:
  struct Node {
    Tensor own;
    Tensor* external = nullptr;
    bool track = false;
    std::function<void()> back;  // empty for leaves
  };

  Tensor& data(Id id);
  const Tensor& data(Id id) const;
  Id push(Node node);

  std::vector<Node> nodes_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction over a fixed set of parameter tensors.
class Adam {
public:
  explicit Adam(std::vector<Tensor*> params, AdamConfig cfg = {});
  void step();  // consumes param .grad buffers
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long steps() const { return t_; }

private:
  struct Slot {
    std::vector<double> m, v;
  };
  std::vector<Tensor*> params_;
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  long t_ = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
  double tolerance = 0.0;
  bool pass = false;
};

// run(with_grad) must rebuild the forward pass from the current parameter
// values and return the scalar loss; with_grad == true additionally runs
// backward so gradients land in the parameter tensors. Probes every element
// of every listed parameter with central differences of step h.
GradCheckReport grad_check(
    const std::function<double(bool with_grad)>& run,
    const std::vector<std::pair<std::string, Tensor*>>& params,
    double h = 1e-4, double tolerance = 1e-4);

}  // namespace cyclemon::ad
