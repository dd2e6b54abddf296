#include "cyclemon/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cyclemon/error.hpp"
#include "cyclemon/rng.hpp"

namespace cyclemon {

std::vector<double> resample_linear(const std::vector<double>& series,
                                    std::size_t target_len) {
  if (series.empty()) raise_data("EmptySeries", "resample of empty series");
  if (target_len < 1) raise_data("InvalidTarget", "target_len must be >= 1");
  const std::size_t l = series.size();
  std::vector<double> out(target_len);
  if (l == 1) {
    std::fill(out.begin(), out.end(), series[0]);
    return out;
  }
  if (target_len == 1) {
    out[0] = series[0];
    return out;
  }
  // lo + frac * (hi - lo) keeps constant series exactly constant; the last
  // sample is pinned so the endpoint is exact for every length ratio
  const double scale = static_cast<double>(l - 1) / static_cast<double>(target_len - 1);
  for (std::size_t k = 0; k + 1 < target_len; ++k) {
    const double pos = static_cast<double>(k) * scale;
    std::size_t i0 = static_cast<std::size_t>(pos);
    if (i0 > l - 2) i0 = l - 2;
    const double frac = pos - static_cast<double>(i0);
    out[k] = series[i0] + frac * (series[i0 + 1] - series[i0]);
  }
  out[target_len - 1] = series[l - 1];
  return out;
}

CycleMatrix assemble_matrix(const DataSet& ds, std::size_t cycle,
                            const std::vector<Channel>& channels,
                            std::size_t grid, std::uint64_t noise_seed) {
  if (channels.empty())
    raise_data("InvalidSpec", "assemble_matrix needs at least one channel");
  if (cycle >= ds.size())
    raise_data("InvalidSpec", "cycle " + std::to_string(cycle) +
                                  " out of range (dataset has " +
                                  std::to_string(ds.size()) + ")");
  CycleMatrix m(channels.size(), grid);
  m.order = channels;
  for (std::size_t r = 0; r < channels.size(); ++r) {
    if (channels[r].noise) {
      Rng rng = Rng::stream(noise_seed, Stream::Noise, cycle);
      double* row = m.row(r);
      for (std::size_t j = 0; j < grid; ++j) row[j] = rng.uniform();
    } else {
      const std::vector<double> row =
          resample_linear(ds.series(cycle, channels[r].id), grid);
      std::copy(row.begin(), row.end(), m.row(r));
    }
  }
  return m;
}

CycleMatrix assemble_matrix(const DataSet& ds, std::size_t cycle,
                            const std::vector<SensorId>& sensors,
                            std::size_t grid) {
  std::vector<Channel> channels;
  channels.reserve(sensors.size());
  for (SensorId id : sensors) channels.push_back(Channel::sensor(id));
  return assemble_matrix(ds, cycle, channels, grid, 0);
}

NormStats fit_norm(const std::vector<const CycleMatrix*>& training) {
  if (training.empty())
    raise_data("ShapeMismatch", "fit_norm on empty training list");
  const std::size_t rows = training[0]->rows;
  const std::size_t cols = training[0]->cols;
  for (const CycleMatrix* m : training) {
    if (m->rows != rows || m->cols != cols)
      raise_data("ShapeMismatch", "inconsistent matrix shapes in fit_norm");
  }
  NormStats stats;
  stats.mean.assign(rows, 0.0);
  stats.std.assign(rows, 0.0);
  const double count = static_cast<double>(training.size() * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (const CycleMatrix* m : training) {
      const double* row = m->row(r);
      for (std::size_t j = 0; j < cols; ++j) s += row[j];
    }
    const double mean = s / count;
    double sq = 0.0;
    for (const CycleMatrix* m : training) {
      const double* row = m->row(r);
      for (std::size_t j = 0; j < cols; ++j) {
        const double d = row[j] - mean;
        sq += d * d;
      }
    }
    stats.mean[r] = mean;
    stats.std[r] = std::max(std::sqrt(sq / count), kNormEps);
  }
  return stats;
}

CycleMatrix apply_norm(const CycleMatrix& m, const NormStats& stats) {
  if (stats.mean.size() != m.rows || stats.std.size() != m.rows)
    raise_data("ShapeMismatch", "norm stats do not match matrix rows");
  CycleMatrix out = m;
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* row = out.row(r);
    const double mean = stats.mean[r];
    const double inv = 1.0 / stats.std[r];
    for (std::size_t j = 0; j < m.cols; ++j) row[j] = (row[j] - mean) * inv;
  }
  return out;
}

CycleMatrix invert_norm(const CycleMatrix& m, const NormStats& stats) {
  if (stats.mean.size() != m.rows || stats.std.size() != m.rows)
    raise_data("ShapeMismatch", "norm stats do not match matrix rows");
  CycleMatrix out = m;
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* row = out.row(r);
    for (std::size_t j = 0; j < m.cols; ++j)
      row[j] = row[j] * stats.std[r] + stats.mean[r];
  }
  return out;
}

SplitAssignment split_random(std::size_t n, std::uint64_t seed) {
  if (n < 10) raise_data("TooFewCycles", "split needs n >= 10, got " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::stream(seed, Stream::DataSplit);
  rng.shuffle(idx);
  const std::size_t n_train = static_cast<std::size_t>(0.7 * static_cast<double>(n));
  const std::size_t n_val = static_cast<std::size_t>(0.1 * static_cast<double>(n));
  SplitAssignment split;
  split.seed = seed;
  split.train.assign(idx.begin(), idx.begin() + n_train);
  split.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  split.test.assign(idx.begin() + n_train + n_val, idx.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

ModelInputs build_model_inputs(const DataSet& ds,
                               const std::vector<std::vector<Channel>>& lanes,
                               std::size_t grid, const SplitAssignment& split,
                               std::uint64_t noise_seed) {
  if (lanes.empty())
    raise_data("InvalidSpec", "build_model_inputs needs at least one lane");
  const std::size_t n = ds.size();
  ModelInputs inputs;
  inputs.lanes.resize(lanes.size());
  inputs.norm.resize(lanes.size());
  inputs.targets.resize(n);
  for (std::size_t c = 0; c < n; ++c)
    inputs.targets[c] = static_cast<int>(ds.cycles[c].target);

  for (std::size_t l = 0; l < lanes.size(); ++l) {
    std::vector<CycleMatrix> raw(n);
    for (std::size_t c = 0; c < n; ++c)
      raw[c] = assemble_matrix(ds, c, lanes[l], grid, noise_seed);
    std::vector<const CycleMatrix*> train_ptrs;
    train_ptrs.reserve(split.train.size());
    for (std::size_t c : split.train) train_ptrs.push_back(&raw[c]);
    inputs.norm[l] = fit_norm(train_ptrs);
    inputs.lanes[l].resize(n);
    for (std::size_t c = 0; c < n; ++c)
      inputs.lanes[l][c] = apply_norm(raw[c], inputs.norm[l]);
  }
  return inputs;
}

}  // namespace cyclemon
