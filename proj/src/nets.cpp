#include "cyclemon/nets.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "cyclemon/error.hpp"
#include "cyclemon/kernels.hpp"

namespace cyclemon::nets {

namespace {

constexpr std::size_t kConvLayers = 10;

void check_hp(const HyperParams& hp) {
  if (hp.n_filters_12 < 1 || hp.kernel_12 < 1 || hp.stride_1 < 1 ||
      hp.fc_neurons < 1)
    raise_usage("InvalidSpec", "hyperparameters must be positive");
  if (!(hp.dropout_rate >= 0.0 && hp.dropout_rate < 1.0))
    raise_usage("InvalidSpec", "dropout rate must be in [0, 1)");
  if (!(hp.initial_lr > 0.0))
    raise_usage("InvalidSpec", "initial learning rate must be positive");
}

LaneConfig build_lane(const HyperParams& hp, std::size_t rows,
                      std::size_t cols) {
  if (rows == 0 || cols == 0)
    raise_usage("InvalidSpec", "lane input must be non-empty");
  if (cols < static_cast<std::size_t>(hp.stride_1))
    raise_usage("InputTooShort",
                "input length " + std::to_string(cols) +
                    " is shorter than stride " + std::to_string(hp.stride_1));

  LaneConfig lane;
  lane.rows = rows;
  lane.cols = cols;
  const std::size_t filters = static_cast<std::size_t>(hp.n_filters_12);
  const std::size_t k12 = static_cast<std::size_t>(hp.kernel_12);

  std::size_t len = cols;
  for (std::size_t layer = 1; layer <= kConvLayers; ++layer) {
    ConvSpec cs;
    cs.filters = filters;
    cs.in_channels = layer == 1 ? 1 : filters;
    cs.kernel_h = layer == 1 ? rows : 1;
    cs.stride_h = 1;
    cs.stride_w = layer == 1 ? static_cast<std::size_t>(hp.stride_1) : 1;
    if (layer <= 2) {
      cs.kernel_w = std::min(k12, len);
    } else {
      // Widths decay geometrically from kernel_12 (layer 2) to 10 (layer 10).
      const double t = static_cast<double>(layer - 2) / 8.0;
      const double target = static_cast<double>(k12) *
                            std::pow(10.0 / static_cast<double>(k12), t);
      const long rounded = std::lround(target);
      const std::size_t width =
          static_cast<std::size_t>(std::max(2L, rounded));
      cs.kernel_w = std::min(width, len);
    }
    cs.out_h = 1;
    cs.out_w = (len - cs.kernel_w) / cs.stride_w + 1;
    len = cs.out_w;
    lane.convs.push_back(cs);
  }
  lane.flat = filters * len;
  return lane;
}

std::size_t argmax_low(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

struct EvalMetrics {
  double loss = 0.0;
  double error = 0.0;
};

std::vector<ad::Tape::Id> lane_nodes(ad::Tape& tape, const NetConfig& net,
                                     const ModelInputs& data,
                                     std::size_t cycle) {
  std::vector<ad::Tape::Id> ids;
  ids.reserve(net.lanes.size());
  for (const auto& lane : data.lanes)
    ids.push_back(tape.value(lane_tensor(lane[cycle])));
  return ids;
}

EvalMetrics eval_indices(const NetConfig& net, ParamSet& params,
                         const ModelInputs& data,
                         const std::vector<std::size_t>& idx) {
  double loss = 0.0;
  std::size_t wrong = 0;
  for (std::size_t i : idx) {
    ad::Tape tape;
    auto ins = lane_nodes(tape, net, data, i);
    const ad::Tape::Id logits =
        forward(tape, net, params, ins, nullptr, false);
    const ad::Tape::Id l = tape.softmax_cross_entropy(logits, data.targets[i]);
    loss += tape.val(l).values[0];
    if (argmax_low(tape.val(logits).values) !=
        static_cast<std::size_t>(data.targets[i]))
      ++wrong;
  }
  const double n = static_cast<double>(idx.size());
  return {loss / n, static_cast<double>(wrong) / n};
}

void check_data(const NetConfig& net, const ModelInputs& data,
                const SplitAssignment& split) {
  if (data.lanes.size() != net.lanes.size())
    raise_data("ShapeMismatch", "lane count does not match the network");
  const std::size_t n = data.targets.size();
  for (std::size_t l = 0; l < data.lanes.size(); ++l) {
    if (data.lanes[l].size() != n)
      raise_data("ShapeMismatch", "lane cycle count does not match targets");
    if (n > 0 && (data.lanes[l][0].rows != net.lanes[l].rows ||
                  data.lanes[l][0].cols != net.lanes[l].cols))
      raise_data("ShapeMismatch", "lane input shape does not match the network");
  }
  auto in_range = [n](const std::vector<std::size_t>& idx) {
    for (std::size_t i : idx)
      if (i >= n) return false;
    return true;
  };
  if (!in_range(split.train) || !in_range(split.val) || !in_range(split.test))
    raise_data("ShapeMismatch", "split index out of range");
}

}  // namespace

NetConfig build_tcocnn(const HyperParams& hp, std::size_t sensors,
                       std::size_t length) {
  check_hp(hp);
  if (sensors == 0) raise_usage("InvalidSpec", "need at least one sensor row");
  NetConfig net;
  net.hp = hp;
  net.lanes.push_back(build_lane(hp, sensors, length));
  net.fc_in = net.lanes[0].flat;
  return net;
}

NetConfig build_2lcnn(
    const HyperParams& hp,
    const std::vector<std::pair<std::size_t, std::size_t>>& lane_shapes) {
  check_hp(hp);
  if (lane_shapes.size() < 2)
    raise_usage("InvalidSpec", "late fusion needs at least two lanes");
  NetConfig net;
  net.hp = hp;
  net.fc_in = 0;
  for (const auto& [rows, cols] : lane_shapes) {
    net.lanes.push_back(build_lane(hp, rows, cols));
    net.fc_in += net.lanes.back().flat;
  }
  return net;
}

std::vector<ad::Tensor*> ParamSet::pointers() {
  std::vector<ad::Tensor*> ps;
  ps.reserve(tensors.size());
  for (auto& t : tensors) ps.push_back(&t);
  return ps;
}

std::vector<std::pair<std::string, ad::Tensor*>> ParamSet::named() {
  std::vector<std::pair<std::string, ad::Tensor*>> ps;
  ps.reserve(tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i)
    ps.emplace_back(names[i], &tensors[i]);
  return ps;
}

void ParamSet::zero_grads() {
  for (auto& t : tensors) {
    if (t.grad.size() != t.values.size())
      t.ensure_grad();
    else
      t.zero_grad();
  }
}

ParamSet init_params(const NetConfig& net, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, Stream::WeightInit);
  ParamSet params;

  auto add = [&](const std::string& name, std::vector<std::size_t> shape,
                 std::size_t fan_in, bool bias) {
    ad::Tensor t = ad::Tensor::zeros(std::move(shape));
    if (!bias) {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (double& v : t.values) v = rng.uniform(-bound, bound);
    }
    t.ensure_grad();
    params.names.push_back(name);
    params.tensors.push_back(std::move(t));
  };

  for (std::size_t l = 0; l < net.lanes.size(); ++l) {
    const LaneConfig& lane = net.lanes[l];
    for (std::size_t i = 0; i < lane.convs.size(); ++i) {
      const ConvSpec& cs = lane.convs[i];
      const std::string base =
          "lane" + std::to_string(l) + ".conv" + std::to_string(i);
      const std::size_t fan_in = cs.in_channels * cs.kernel_h * cs.kernel_w;
      add(base + ".k", {cs.filters, cs.in_channels, cs.kernel_h, cs.kernel_w},
          fan_in, false);
      add(base + ".b", {cs.filters}, 0, true);
    }
  }
  const std::size_t fc = static_cast<std::size_t>(net.hp.fc_neurons);
  add("head.w1", {fc, net.fc_in}, net.fc_in, false);
  add("head.b1", {fc}, 0, true);
  add("head.w2", {net.n_classes, fc}, fc, false);
  add("head.b2", {net.n_classes}, 0, true);
  return params;
}

ad::Tape::Id forward(ad::Tape& tape, const NetConfig& net, ParamSet& params,
                     const std::vector<ad::Tape::Id>& lane_inputs,
                     Rng* dropout_rng, bool training) {
  const std::size_t expected = net.lanes.size() * 2 * kConvLayers + 4;
  if (params.tensors.size() != expected)
    raise_data("ShapeMismatch", "parameter set does not match the network");
  if (lane_inputs.size() != net.lanes.size())
    raise_data("ShapeMismatch", "lane input count does not match the network");
  if (training && dropout_rng == nullptr)
    raise_data("ShapeMismatch", "training forward needs a dropout stream");

  Rng unused(0);
  Rng& drop = dropout_rng ? *dropout_rng : unused;

  std::vector<ad::Tape::Id> flats;
  flats.reserve(net.lanes.size());
  for (std::size_t l = 0; l < net.lanes.size(); ++l) {
    const std::size_t base = l * 2 * kConvLayers;
    ad::Tape::Id x = lane_inputs[l];
    for (std::size_t i = 0; i < kConvLayers; ++i) {
      const ConvSpec& cs = net.lanes[l].convs[i];
      const ad::Tape::Id k = tape.param(&params.tensors[base + 2 * i]);
      const ad::Tape::Id b = tape.param(&params.tensors[base + 2 * i + 1]);
      x = tape.relu(tape.conv2d(x, k, b, cs.stride_h, cs.stride_w));
    }
    flats.push_back(tape.flatten(x));
  }

  ad::Tape::Id merged = flats.size() == 1 ? flats[0] : tape.concat(flats);
  const std::size_t head = net.lanes.size() * 2 * kConvLayers;
  const ad::Tape::Id d =
      tape.dropout(merged, net.hp.dropout_rate, drop, training);
  const ad::Tape::Id w1 = tape.param(&params.tensors[head]);
  const ad::Tape::Id b1 = tape.param(&params.tensors[head + 1]);
  const ad::Tape::Id h = tape.relu(tape.dense(d, w1, b1));
  const ad::Tape::Id w2 = tape.param(&params.tensors[head + 2]);
  const ad::Tape::Id b2 = tape.param(&params.tensors[head + 3]);
  return tape.dense(h, w2, b2);
}

ad::Tensor lane_tensor(const CycleMatrix& m) {
  return ad::Tensor::of({1, m.rows, m.cols}, m.values);
}

TrainOutcome train(const NetConfig& net, const ModelInputs& data,
                   const SplitAssignment& split, const TrainConfig& tc) {
  if (tc.batch_size == 0)
    raise_usage("InvalidSpec", "batch size must be positive");
  check_data(net, data, split);
  const auto start = std::chrono::steady_clock::now();

  TrainOutcome out;
  out.params = init_params(net, tc.seed);
  TrainReport& rep = out.report;
  rep.seed = tc.seed;
  rep.hp = net.hp;

  ad::Adam opt(out.params.pointers(), {net.hp.initial_lr, 0.9, 0.999, 1e-8});

  if (tc.epochs > 0 && (split.train.empty() || split.val.empty()))
    raise_data("TooFewCycles", "training needs non-empty train and val splits");

  const std::size_t decay_at = (2 * tc.epochs + 2) / 3;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_values;

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    opt.set_lr(net.hp.initial_lr * (epoch >= decay_at ? 0.1 : 1.0));
    Rng shuffle_rng = Rng::stream(tc.seed, Stream::BatchShuffle, epoch);
    Rng drop_rng = Rng::stream(tc.seed, Stream::Dropout, epoch);
    std::vector<std::size_t> order = split.train;
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t epoch_wrong = 0;
    for (std::size_t b = 0; b < order.size(); b += tc.batch_size) {
      const std::size_t bn = std::min(tc.batch_size, order.size() - b);
      out.params.zero_grads();
      double batch_loss = 0.0;
      for (std::size_t j = 0; j < bn; ++j) {
        const std::size_t cycle = order[b + j];
        ad::Tape tape;
        auto ins = lane_nodes(tape, net, data, cycle);
        const ad::Tape::Id logits =
            forward(tape, net, out.params, ins, &drop_rng, true);
        const ad::Tape::Id loss =
            tape.softmax_cross_entropy(logits, data.targets[cycle]);
        batch_loss += tape.val(loss).values[0];
        if (argmax_low(tape.val(logits).values) !=
            static_cast<std::size_t>(data.targets[cycle]))
          ++epoch_wrong;
        tape.backward(loss);
      }
      if (!std::isfinite(batch_loss))
        raise_numeric("DivergenceDetected",
                      "non-finite training loss at epoch " +
                          std::to_string(epoch));
      const double inv = 1.0 / static_cast<double>(bn);
      for (ad::Tensor* p : out.params.pointers())
        kernels::scale(inv, p->grad.data(), p->size());
      opt.step();
      epoch_loss += batch_loss;
    }

    rep.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    rep.train_error.push_back(static_cast<double>(epoch_wrong) /
                              static_cast<double>(order.size()));

    const EvalMetrics vm = eval_indices(net, out.params, data, split.val);
    if (!std::isfinite(vm.loss))
      raise_numeric("DivergenceDetected",
                    "non-finite validation loss at epoch " +
                        std::to_string(epoch));
    rep.val_loss.push_back(vm.loss);
    rep.val_error.push_back(vm.error);

    if (vm.loss < best_val) {
      best_val = vm.loss;
      rep.best_epoch = epoch;
      best_values.clear();
      for (const auto& t : out.params.tensors) best_values.push_back(t.values);
    } else if (epoch - rep.best_epoch >= tc.patience) {
      rep.status = TrainStatus::EarlyStopped;
      break;
    }
  }

  if (rep.best_epoch > 0) {
    for (std::size_t i = 0; i < out.params.tensors.size(); ++i)
      out.params.tensors[i].values = best_values[i];
    rep.best_val_loss = rep.val_loss[rep.best_epoch - 1];
    rep.best_val_error = rep.val_error[rep.best_epoch - 1];
  } else if (!split.val.empty()) {
    const EvalMetrics vm = eval_indices(net, out.params, data, split.val);
    rep.best_val_loss = vm.loss;
    rep.best_val_error = vm.error;
  }

  if (tc.eval_test)
    rep.test_error = evaluate(net, out.params, data, split.test);

  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return out;
}

double evaluate(const NetConfig& net, ParamSet& params, const ModelInputs& data,
                const std::vector<std::size_t>& indices) {
  if (indices.empty())
    raise_data("EmptyEvaluation", "no cycles to evaluate");
  check_data(net, data, {});
  std::size_t wrong = 0;
  for (std::size_t i : indices) {
    if (i >= data.targets.size())
      raise_data("ShapeMismatch", "evaluation index out of range");
    std::vector<CycleMatrix> lanes;
    lanes.reserve(data.lanes.size());
    for (const auto& lane : data.lanes) lanes.push_back(lane[i]);
    if (predict(net, params, lanes) != data.targets[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(indices.size());
}

int predict(const NetConfig& net, ParamSet& params,
            const std::vector<CycleMatrix>& lanes) {
  ad::Tape tape;
  std::vector<ad::Tape::Id> ins;
  ins.reserve(lanes.size());
  for (const auto& m : lanes) ins.push_back(tape.value(lane_tensor(m)));
  const ad::Tape::Id logits = forward(tape, net, params, ins, nullptr, false);
  return static_cast<int>(argmax_low(tape.val(logits).values));
}

void save_params(const ParamSet& params, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) raise_data("IoError", "cannot write " + path.string());
  f << "netparams v1\n" << params.tensors.size() << "\n";
  char buf[64];
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const ad::Tensor& t = params.tensors[i];
    f << params.names[i] << " " << t.shape.size();
    for (std::size_t d : t.shape) f << " " << d;
    f << "\n";
    for (std::size_t j = 0; j < t.values.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", t.values[j]);
      f << (j ? " " : "") << buf;
    }
    f << "\n";
  }
  if (!f.good()) raise_data("IoError", "failed writing " + path.string());
}

ParamSet load_params(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) raise_data("IoError", "cannot read " + path.string());
  std::string header;
  std::getline(f, header);
  if (header != "netparams v1")
    raise_data("ParseError", path.string() + ": unknown checkpoint header");
  std::size_t count = 0;
  f >> count;
  ParamSet params;
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    std::size_t ndim = 0;
    if (!(f >> name >> ndim))
      raise_data("ParseError", path.string() + ": truncated tensor header");
    std::vector<std::size_t> shape(ndim);
    std::size_t total = 1;
    for (std::size_t d = 0; d < ndim; ++d) {
      if (!(f >> shape[d]))
        raise_data("ParseError", path.string() + ": truncated shape");
      total *= shape[d];
    }
    std::vector<double> values(total);
    for (std::size_t j = 0; j < total; ++j) {
      if (!(f >> values[j]))
        raise_data("ParseError", path.string() + ": truncated values");
    }
    params.names.push_back(name);
    params.tensors.push_back(
        ad::Tensor::of(std::move(shape), std::move(values)));
    params.tensors.back().ensure_grad();
  }
  return params;
}

}  // namespace cyclemon::nets
