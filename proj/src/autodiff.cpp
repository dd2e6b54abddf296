#include "cyclemon/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "cyclemon/error.hpp"
#include "cyclemon/kernels.hpp"

namespace cyclemon::ad {

namespace {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.values.assign(shape_size(shape), 0.0);
  t.shape = std::move(shape);
  return t;
}

Tensor Tensor::of(std::vector<std::size_t> shape, std::vector<double> values) {
  if (shape_size(shape) != values.size())
    raise_numeric("ShapeMismatch", "tensor values do not match shape");
  Tensor t;
  t.shape = std::move(shape);
  t.values = std::move(values);
  return t;
}

void Tensor::ensure_grad() { grad.assign(values.size(), 0.0); }

void Tensor::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

Tensor& Tape::data(Id id) {
  Node& n = nodes_.at(id);
  return n.external ? *n.external : n.own;
}

const Tensor& Tape::data(Id id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.own;
}

Tape::Id Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

Tape::Id Tape::value(Tensor t, bool track_grad) {
  Node n;
  n.own = std::move(t);
  n.track = track_grad;
  if (track_grad) n.own.ensure_grad();
  return push(std::move(n));
}

Tape::Id Tape::param(Tensor* p) {
  if (p == nullptr) raise_numeric("ShapeMismatch", "null parameter tensor");
  if (p->grad.size() != p->values.size()) p->ensure_grad();
  Node n;
  n.external = p;
  n.track = true;
  return push(std::move(n));
}

const Tensor& Tape::val(Id id) const { return data(id); }

const std::vector<double>& Tape::grad(Id id) const { return data(id).grad; }

void Tape::backward(Id root) {
  Tensor& r = data(root);
  if (r.size() != 1)
    raise_numeric("ShapeMismatch", "backward root must be a scalar");
  if (r.grad.empty()) r.ensure_grad();
  r.grad[0] += 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.track && n.back) n.back();
  }
}

Tape::Id Tape::conv2d(Id x, Id k, Id b, std::size_t stride_h,
                      std::size_t stride_w) {
  const Tensor& xt = data(x);
  const Tensor& kt = data(k);
  const Tensor& bt = data(b);
  if (xt.shape.size() != 3 || kt.shape.size() != 4 || bt.shape.size() != 1)
    raise_numeric("ShapeMismatch", "conv2d expects x[C,H,W] k[O,C,kH,kW] b[O]");
  const std::size_t cin = xt.shape[0], h = xt.shape[1], w = xt.shape[2];
  const std::size_t cout = kt.shape[0], kh = kt.shape[2], kw = kt.shape[3];
  if (kt.shape[1] != cin || bt.shape[0] != cout)
    raise_numeric("ShapeMismatch", "conv2d channel mismatch");
  if (kh > h || kw > w)
    raise_numeric("ShapeError", "conv2d kernel larger than input");
  if (stride_h < 1 || stride_w < 1)
    raise_numeric("ShapeError", "conv2d strides must be >= 1");
  const std::size_t hout = (h - kh) / stride_h + 1;
  const std::size_t wout = (w - kw) / stride_w + 1;
  const std::size_t plane = hout * wout;
  const std::size_t patch_len = cin * kh * kw;

  Tensor out = Tensor::zeros({cout, hout, wout});
  for (std::size_t o = 0; o < cout; ++o)
    std::fill_n(out.values.data() + o * plane, plane, bt.values[o]);

  std::vector<double> patch(patch_len);
  auto gather = [&](const double* src, std::size_t i, std::size_t j,
                    double* dst) {
    std::size_t p = 0;
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t u = 0; u < kh; ++u) {
        const double* row = src + c * h * w + (i * stride_h + u) * w + j * stride_w;
        std::copy(row, row + kw, dst + p);
        p += kw;
      }
    }
  };

  for (std::size_t i = 0; i < hout; ++i) {
    for (std::size_t j = 0; j < wout; ++j) {
      gather(xt.values.data(), i, j, patch.data());
      kernels::matvec_acc(kt.values.data(), cout, patch_len, patch_len,
                          patch.data(), out.values.data() + i * wout + j,
                          plane);
    }
  }

  Node n;
  n.own = std::move(out);
  n.track = nodes_[x].track || nodes_[k].track || nodes_[b].track;
  if (n.track) {
    n.own.ensure_grad();
    const Id out_id = nodes_.size();
    n.back = [this, x, k, b, out_id, cin, h, w, cout, kh, kw, stride_h,
              stride_w, hout, wout, plane, patch_len]() {
      const Tensor& xt2 = data(x);
      const Tensor& kt2 = data(k);
      Tensor& xg = data(x);
      Tensor& kg = data(k);
      Tensor& bg = data(b);
      const std::vector<double>& gy = data(out_id).grad;

      if (nodes_[b].track) {
        for (std::size_t o = 0; o < cout; ++o)
          bg.grad[o] += kernels::sum(gy.data() + o * plane, plane);
      }
      const bool want_x = nodes_[x].track;
      const bool want_k = nodes_[k].track;
      if (!want_x && !want_k) return;

      std::vector<double> patch2(patch_len);
      std::vector<double> gpatch(patch_len);
      for (std::size_t i = 0; i < hout; ++i) {
        for (std::size_t j = 0; j < wout; ++j) {
          const double* g = gy.data() + i * wout + j;
          if (want_k) {
            std::size_t p = 0;
            for (std::size_t c = 0; c < cin; ++c) {
              for (std::size_t u = 0; u < kh; ++u) {
                const double* row = xt2.values.data() + c * h * w +
                                    (i * stride_h + u) * w + j * stride_w;
                std::copy(row, row + kw, patch2.data() + p);
                p += kw;
              }
            }
            kernels::rank1_acc(g, cout, plane, patch2.data(), patch_len,
                               kg.grad.data(), patch_len);
          }
          if (want_x) {
            std::fill(gpatch.begin(), gpatch.end(), 0.0);
            kernels::matvec_t_acc(kt2.values.data(), cout, patch_len,
                                  patch_len, g, plane, gpatch.data());
            std::size_t p = 0;
            for (std::size_t c = 0; c < cin; ++c) {
              for (std::size_t u = 0; u < kh; ++u) {
                double* row = xg.grad.data() + c * h * w +
                              (i * stride_h + u) * w + j * stride_w;
                kernels::axpy(1.0, gpatch.data() + p, row, kw);
                p += kw;
              }
            }
          }
        }
      }
    };
  }
  return push(std::move(n));
}

Tape::Id Tape::dense(Id x, Id w, Id b) {
  const Tensor& xt = data(x);
  const Tensor& wt = data(w);
  const Tensor& bt = data(b);
  if (xt.shape.size() != 1 || wt.shape.size() != 2 || bt.shape.size() != 1)
    raise_numeric("ShapeMismatch", "dense expects x[n] w[m,n] b[m]");
  const std::size_t nin = xt.shape[0];
  const std::size_t m = wt.shape[0];
  if (wt.shape[1] != nin || bt.shape[0] != m)
    raise_numeric("ShapeMismatch", "dense dimension mismatch");

  Tensor out = Tensor::zeros({m});
  std::copy(bt.values.begin(), bt.values.end(), out.values.begin());
  kernels::matvec_acc(wt.values.data(), m, nin, nin, xt.values.data(),
                      out.values.data(), 1);

  Node n;
  n.own = std::move(out);
  n.track = nodes_[x].track || nodes_[w].track || nodes_[b].track;
  if (n.track) {
    n.own.ensure_grad();
    const Id out_id = nodes_.size();
    n.back = [this, x, w, b, out_id, m, nin]() {
      const std::vector<double>& gy = data(out_id).grad;
      if (nodes_[b].track) kernels::axpy(1.0, gy.data(), data(b).grad.data(), m);
      if (nodes_[w].track) {
        kernels::rank1_acc(gy.data(), m, 1, data(x).values.data(), nin,
                           data(w).grad.data(), nin);
      }
      if (nodes_[x].track) {
        kernels::matvec_t_acc(data(w).values.data(), m, nin, nin, gy.data(), 1,
                              data(x).grad.data());
      }
    };
  }
  return push(std::move(n));
}

Tape::Id Tape::relu(Id x) {
  const Tensor& xt = data(x);
  Tensor out;
  out.shape = xt.shape;
  out.values.resize(xt.size());
  kernels::relu_fwd(xt.values.data(), out.values.data(), xt.size());

  Node n;
  n.own = std::move(out);
  n.track = nodes_[x].track;
  if (n.track) {
    n.own.ensure_grad();
    const Id out_id = nodes_.size();
    n.back = [this, x, out_id]() {
      Tensor& xg = data(x);
      kernels::relu_bwd(xg.values.data(), data(out_id).grad.data(),
                        xg.grad.data(), xg.size());
    };
  }
  return push(std::move(n));
}

Tape::Id Tape::dropout(Id x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0))
    raise_numeric("InvalidRate", "dropout rate must be in [0, 1)");
  const Tensor& xt = data(x);
  Tensor out;
  out.shape = xt.shape;
  out.values.resize(xt.size());

  std::vector<double> mask;
  if (training && rate > 0.0) {
    mask.resize(xt.size());
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < xt.size(); ++i)
      mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    for (std::size_t i = 0; i < xt.size(); ++i)
      out.values[i] = xt.values[i] * mask[i];
  } else {
    out.values = xt.values;
  }

  Node n;
  n.own = std::move(out);
  n.track = nodes_[x].track;
  if (n.track) {
    n.own.ensure_grad();
    const Id out_id = nodes_.size();
    n.back = [this, x, out_id, mask = std::move(mask)]() {
      Tensor& xg = data(x);
      const std::vector<double>& gy = data(out_id).grad;
      if (mask.empty()) {
        kernels::axpy(1.0, gy.data(), xg.grad.data(), xg.size());
      } else {
        for (std::size_t i = 0; i < xg.size(); ++i)
          xg.grad[i] += gy[i] * mask[i];
      }
    };
  }
  return push(std::move(n));
}

Tape::Id Tape::flatten(Id x) {
  const Tensor& xt = data(x);
  Tensor out;
  out.shape = {xt.size()};
  out.values = xt.values;

  Node n;
  n.own = std::move(out);
  n.track = nodes_[x].track;
  if (n.track) {
    n.own.ensure_grad();
    const Id out_id = nodes_.size();
    n.back = [this, x, out_id]() {
      Tensor& xg = data(x);
      kernels::axpy(1.0, data(out_id).grad.data(), xg.grad.data(), xg.size());
    };
  }
  return push(std::move(n));
}

Tape::Id Tape::concat(const std::vector<Id>& parts) {
  if (parts.empty()) raise_numeric("ShapeMismatch", "concat of nothing");
  std::size_t total = 0;
  bool track = false;
  for (Id p : parts) {
    if (data(p).shape.size() != 1)
      raise_numeric("ShapeMismatch", "concat expects 1-D inputs");
    total += data(p).size();
    track = track || nodes_[p].track;
  }
  Tensor out = Tensor::zeros({total});
  std::size_t off = 0;
  for (Id p : parts) {
    const Tensor& t = data(p);
    std::copy(t.values.begin(), t.values.end(), out.values.begin() + off);
    off += t.size();
  }

  Node n;
  n.own = std::move(out);
  n.track = track;
  if (n.track) {
    n.own.ensure_grad();
    const Id out_id = nodes_.size();
    n.back = [this, parts, out_id]() {
      const std::vector<double>& gy = data(out_id).grad;
      std::size_t off2 = 0;
      for (Id p : parts) {
        Tensor& t = data(p);
        if (nodes_[p].track)
          kernels::axpy(1.0, gy.data() + off2, t.grad.data(), t.size());
        off2 += t.size();
      }
    };
  }
  return push(std::move(n));
}

Tape::Id Tape::softmax_cross_entropy(Id logits, int target) {
  const Tensor& lt = data(logits);
  if (lt.shape.size() != 1 || lt.size() < 2)
    raise_numeric("ShapeMismatch", "softmax_cross_entropy expects >= 2 logits");
  const std::size_t c = lt.size();
  if (target < 0 || static_cast<std::size_t>(target) >= c)
    raise_numeric("InvalidTarget", "class code " + std::to_string(target) +
                                       " out of range for " + std::to_string(c) +
                                       " logits");

  const double mx = *std::max_element(lt.values.begin(), lt.values.end());
  std::vector<double> probs(c);
  double z = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    probs[i] = std::exp(lt.values[i] - mx);
    z += probs[i];
  }
  for (double& p : probs) p /= z;
  const double loss =
      std::log(z) - (lt.values[static_cast<std::size_t>(target)] - mx);

  Tensor out = Tensor::zeros({1});
  out.values[0] = loss;

  Node n;
  n.own = std::move(out);
  n.track = nodes_[logits].track;
  if (n.track) {
    n.own.ensure_grad();
    const Id out_id = nodes_.size();
    n.back = [this, logits, out_id, target, probs = std::move(probs)]() {
      Tensor& lg = data(logits);
      const double g = data(out_id).grad[0];
      for (std::size_t i = 0; i < lg.size(); ++i) {
        const double onehot = static_cast<std::size_t>(target) == i ? 1.0 : 0.0;
        lg.grad[i] += g * (probs[i] - onehot);
      }
    };
  }
  return push(std::move(n));
}

Adam::Adam(std::vector<Tensor*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  slots_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    slots_[i].m.assign(params_[i]->size(), 0.0);
    slots_[i].v.assign(params_[i]->size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor* p = params_[i];
    if (p->grad.size() != p->values.size())
      raise_numeric("ShapeMismatch", "adam step without gradients");
    kernels::adam_step(p->values.data(), p->grad.data(), slots_[i].m.data(),
                       slots_[i].v.data(), p->size(), cfg_.lr, cfg_.beta1,
                       cfg_.beta2, cfg_.eps, bc1, bc2);
  }
}

GradCheckReport grad_check(
    const std::function<double(bool)>& run,
    const std::vector<std::pair<std::string, Tensor*>>& params, double h,
    double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;

  for (auto& [name, p] : params) p->ensure_grad();
  run(true);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& [name, p] : params) analytic.push_back(p->grad);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor* p = params[pi].second;
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = p->values[i];
      p->values[i] = saved + h;
      const double f_plus = run(false);
      p->values[i] = saved - h;
      const double f_minus = run(false);
      p->values[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = params[pi].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace cyclemon::ad
