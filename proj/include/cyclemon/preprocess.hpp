#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cyclemon/dataset.hpp"

namespace cyclemon {

// Linear interpolation onto a uniform grid; endpoints map exactly. The
// identity when target_len == series length.
std::vector<double> resample_linear(const std::vector<double>& series,
                                    std::size_t target_len = 6000);

// One input row of a fused matrix: either a real sensor or a uniform-noise
// channel (the B&N study's second row).
struct Channel {
  bool noise = false;
  SensorId id = SensorId::PS1;

  static Channel sensor(SensorId sid) { return Channel{false, sid}; }
  static Channel noise_row() { return Channel{true, SensorId::PS1}; }
  std::string name() const { return noise ? "NOISE" : sensor_info(id).name; }
  bool operator==(const Channel& o) const {
    return noise == o.noise && (noise || id == o.id);
  }
};

struct CycleMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
  std::vector<Channel> order;

  CycleMatrix() = default;
  CycleMatrix(std::size_t r, std::size_t c)
      : rows(r), cols(c), values(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double* row(std::size_t r) { return values.data() + r * cols; }
  const double* row(std::size_t r) const { return values.data() + r * cols; }
};

// Fuses the selected sensors of one cycle into a rows x grid matrix. Noise
// channels are filled from the same per-cycle stream as noise_channel(), so
// the row equals noise_channel(n, grid, noise_seed) row `cycle`.
CycleMatrix assemble_matrix(const DataSet& ds, std::size_t cycle,
                            const std::vector<Channel>& channels,
                            std::size_t grid = 6000,
                            std::uint64_t noise_seed = 0);

// Sensor-only convenience overload.
CycleMatrix assemble_matrix(const DataSet& ds, std::size_t cycle,
                            const std::vector<SensorId>& sensors,
                            std::size_t grid = 6000);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;  // floored at kNormEps
};

inline constexpr double kNormEps = 1e-8;

// Per-row z-score statistics pooled over the training matrices only.
NormStats fit_norm(const std::vector<const CycleMatrix*>& training);
CycleMatrix apply_norm(const CycleMatrix& m, const NormStats& stats);
CycleMatrix invert_norm(const CycleMatrix& m, const NormStats& stats);

struct SplitAssignment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

// Uniform random partition with |train| = floor(0.7 n), |val| = floor(0.1 n),
// the remainder to test. Index sets are sorted ascending.
SplitAssignment split_random(std::size_t n, std::uint64_t seed);

// Everything the network trainers consume: per-lane normalized matrices for
// every cycle, plus ordinal targets. Normalization is fitted on the training
// indices only.
struct ModelInputs {
  std::vector<std::vector<CycleMatrix>> lanes;  // lanes[lane][cycle]
  std::vector<int> targets;
  std::vector<NormStats> norm;  // per lane
};

ModelInputs build_model_inputs(const DataSet& ds,
                               const std::vector<std::vector<Channel>>& lanes,
                               std::size_t grid, const SplitAssignment& split,
                               std::uint64_t noise_seed);

}  // namespace cyclemon
