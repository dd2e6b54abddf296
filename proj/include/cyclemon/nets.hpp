#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cyclemon/autodiff.hpp"
#include "cyclemon/preprocess.hpp"
#include "cyclemon/rng.hpp"

namespace cyclemon::nets {

struct HyperParams {
  double initial_lr = 1e-5;
  int n_filters_12 = 32;   // filters of every conv layer
  int kernel_12 = 200;     // kernel width of layers 1-2
  int stride_1 = 150;      // temporal stride of layer 1
  double dropout_rate = 0.4;
  int fc_neurons = 1000;
};

struct ConvSpec {
  std::size_t filters = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
};

struct LaneConfig {
  std::size_t rows = 0;  // sensor axis
  std::size_t cols = 0;  // temporal axis
  std::vector<ConvSpec> convs;
  std::size_t flat = 0;  // flattened size after the conv stack
};

struct NetConfig {
  HyperParams hp;
  std::vector<LaneConfig> lanes;
  std::size_t fc_in = 0;  // sum of lane flats
  std::size_t n_classes = 4;
};

// Single-lane early-fusion network: layer 1 collapses the sensor axis with a
// full-height kernel, then a fixed stack of 9 temporal conv layers whose
// widths decay geometrically from kernel_12 to 10.
NetConfig build_tcocnn(const HyperParams& hp, std::size_t sensors,
                       std::size_t length);

// Late-fusion variant: one independent conv stack per lane (same hyper
// parameters, separate weights), concatenated before the dense head.
NetConfig build_2lcnn(const HyperParams& hp,
                      const std::vector<std::pair<std::size_t, std::size_t>>&
                          lane_shapes);

struct ParamSet {
  std::vector<std::string> names;
  std::vector<ad::Tensor> tensors;

  std::vector<ad::Tensor*> pointers();
  std::vector<std::pair<std::string, ad::Tensor*>> named();
  void zero_grads();
};

// He-style centered uniform init, bound sqrt(6 / fan_in); biases zero. All
// draws come from one WeightInit stream in fixed parameter order.
ParamSet init_params(const NetConfig& net, std::uint64_t seed);

// Builds one forward pass. lane_inputs holds one node per lane with shape
// {1, rows, cols}. Returns the logits node (length n_classes). dropout_rng
// may be null when training == false.
ad::Tape::Id forward(ad::Tape& tape, const NetConfig& net, ParamSet& params,
                     const std::vector<ad::Tape::Id>& lane_inputs,
                     Rng* dropout_rng, bool training);

ad::Tensor lane_tensor(const CycleMatrix& m);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::size_t patience = 10;  // epochs without val-loss improvement
  std::uint64_t seed = 1;
  bool eval_test = false;  // leave false until a selection is final
};

enum class TrainStatus { Completed, EarlyStopped };

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> train_error;
  std::vector<double> val_loss;
  std::vector<double> val_error;
  double best_val_loss = 0.0;
  double best_val_error = 0.0;
  std::size_t best_epoch = 0;  // 1-based; 0 means the initialized weights
  double test_error = -1.0;    // -1 when not evaluated
  TrainStatus status = TrainStatus::Completed;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  HyperParams hp;
};

struct TrainOutcome {
  TrainReport report;
  ParamSet params;  // best-validation weights
};

// Mini-batch Adam with step decay (x0.1 from epoch ceil(2E/3)) and early
// stopping on validation loss; restores the best-validation weights.
// Deterministic given (seed, config).
TrainOutcome train(const NetConfig& net, const ModelInputs& data,
                   const SplitAssignment& split, const TrainConfig& tc);

double evaluate(const NetConfig& net, ParamSet& params, const ModelInputs& data,
                const std::vector<std::size_t>& indices);

// Argmax of the output distribution, ties to the lower class code. Dropout
// is in evaluation mode, so this is a pure function of (weights, input).
int predict(const NetConfig& net, ParamSet& params,
            const std::vector<CycleMatrix>& lanes);

void save_params(const ParamSet& params, const std::filesystem::path& path);
ParamSet load_params(const std::filesystem::path& path);

}  // namespace cyclemon::nets
