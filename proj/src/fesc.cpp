#include "cyclemon/fesc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "cyclemon/error.hpp"
#include "cyclemon/kernels.hpp"

namespace cyclemon {

Moments extract_moments(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 2) raise_data("TooShort", "moments need at least 2 samples");
  bool constant = true;
  for (double v : series) {
    if (!std::isfinite(v)) raise_data("NonFiniteInput", "series contains non-finite values");
    constant = constant && v == series[0];
  }
  Moments m;
  if (constant) {
    // detect structurally, not via the computed variance: the rounded mean of
    // n copies of c can differ from c by an ulp, and the centered sums then
    // amplify that noise into skew = +-1, kurt = 1 on a flatlined channel
    m.mean = series[0];
    return m;
  }
  m.mean = kernels::sum(series.data(), n) / static_cast<double>(n);
  double s2 = 0.0, s3 = 0.0, s4 = 0.0;
  kernels::central_sums(series.data(), n, m.mean, &s2, &s3, &s4);
  const double m2 = s2 / static_cast<double>(n);
  if (m2 == 0.0) return m;  // std = skew = kurt = 0 for zero variance
  m.std = std::sqrt(m2);
  m.skewness = (s3 / static_cast<double>(n)) / (m2 * m.std);
  m.kurtosis = (s4 / static_cast<double>(n)) / (m2 * m2);
  return m;
}

FeatureMatrix build_feature_matrix(const DataSet& ds,
                                   const std::vector<SensorId>& sensors) {
  if (ds.size() == 0 || sensors.empty())
    raise_data("InvalidSpec", "build_feature_matrix needs cycles and sensors");
  const std::size_t n = ds.size();
  FeatureMatrix fm;
  fm.values = la::Matrix(n, 4 * sensors.size());
  fm.targets.resize(n);
  for (SensorId id : sensors) {
    for (int mo = 0; mo < 4; ++mo)
      fm.descriptors.push_back({id, static_cast<Moment>(mo)});
  }
  for (std::size_t c = 0; c < n; ++c) {
    fm.targets[c] = static_cast<int>(ds.cycles[c].target);
    for (std::size_t s = 0; s < sensors.size(); ++s) {
      const Moments m = extract_moments(ds.series(c, sensors[s]));
      fm.values(c, 4 * s + 0) = m.mean;
      fm.values(c, 4 * s + 1) = m.std;
      fm.values(c, 4 * s + 2) = m.skewness;
      fm.values(c, 4 * s + 3) = m.kurtosis;
    }
  }
  return fm;
}

std::vector<double> pearson_scores(const FeatureMatrix& features) {
  std::vector<std::size_t> rows(features.values.rows);
  std::iota(rows.begin(), rows.end(), 0);
  return pearson_scores(features, rows);
}

std::vector<double> pearson_scores(const FeatureMatrix& features,
                                   const std::vector<std::size_t>& rows) {
  const std::size_t n = rows.size();
  if (n < 3) raise_data("TooShort", "pearson_scores needs at least 3 rows");
  double ty = 0.0;
  for (std::size_t r : rows) ty += features.targets.at(r);
  const double my = ty / static_cast<double>(n);
  double syy = 0.0;
  for (std::size_t r : rows) {
    const double d = features.targets[r] - my;
    syy += d * d;
  }
  int first = features.targets.at(rows[0]);
  bool distinct = false;
  for (std::size_t r : rows)
    if (features.targets[r] != first) distinct = true;
  if (!distinct) raise_data("DegenerateTargets", "pearson needs >= 2 distinct classes");

  const std::size_t cols = features.values.cols;
  std::vector<double> scores(cols, 0.0);
  for (std::size_t j = 0; j < cols; ++j) {
    double tx = 0.0;
    for (std::size_t r : rows) tx += features.values(r, j);
    const double mx = tx / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t r : rows) {
      const double dx = features.values(r, j) - mx;
      sxx += dx * dx;
      sxy += dx * (features.targets[r] - my);
    }
    if (sxx <= 0.0) {
      scores[j] = 0.0;
      continue;
    }
    const double r = sxy / std::sqrt(sxx * syy);
    scores[j] = std::min(std::abs(r), 1.0);
  }
  return scores;
}

std::vector<std::size_t> select_top_k(const std::vector<double>& scores,
                                      std::size_t k) {
  if (k < 1 || k > scores.size())
    raise_data("InvalidK", "k = " + std::to_string(k) + " with " +
                               std::to_string(scores.size()) + " features");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  idx.resize(k);
  return idx;
}

FescModel lda_fit(const la::Matrix& x, const std::vector<int>& y) {
  const std::size_t n = x.rows;
  const std::size_t k = x.cols;
  if (n != y.size() || k < 1)
    raise_data("ShapeMismatch", "lda_fit dimensions");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[y[i]].push_back(i);
  if (by_class.size() < 2)
    raise_data("ClassTooSmall", "lda needs at least 2 classes");
  for (const auto& [code, members] : by_class) {
    if (members.size() < 2)
      raise_data("ClassTooSmall", "class " + std::to_string(code) +
                                      " has fewer than 2 training samples");
  }
  const std::size_t n_classes = by_class.size();

  std::vector<double> grand(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) grand[j] += x(i, j);
  for (double& v : grand) v /= static_cast<double>(n);

  la::Matrix sw(k, k), sb(k, k);
  std::vector<std::vector<double>> mu;
  std::vector<int> codes;
  for (const auto& [code, members] : by_class) {
    std::vector<double> m(k, 0.0);
    for (std::size_t i : members)
      for (std::size_t j = 0; j < k; ++j) m[j] += x(i, j);
    for (double& v : m) v /= static_cast<double>(members.size());
    for (std::size_t i : members) {
      for (std::size_t a = 0; a < k; ++a) {
        const double da = x(i, a) - m[a];
        for (std::size_t b = a; b < k; ++b)
          sw(a, b) += da * (x(i, b) - m[b]);
      }
    }
    const double nc = static_cast<double>(members.size());
    for (std::size_t a = 0; a < k; ++a) {
      const double da = m[a] - grand[a];
      for (std::size_t b = a; b < k; ++b)
        sb(a, b) += nc * da * (m[b] - grand[b]);
    }
    mu.push_back(std::move(m));
    codes.push_back(code);
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      sw(a, b) = sw(b, a);
      sb(a, b) = sb(b, a);
    }
  }

  double trace_w = 0.0;
  for (std::size_t a = 0; a < k; ++a) trace_w += sw(a, a);
  la::Matrix sw_shrunk = sw;
  const double ridge_w =
      std::max(kLdaGamma * trace_w / static_cast<double>(k), 1e-12);
  for (std::size_t a = 0; a < k; ++a) sw_shrunk(a, a) += ridge_w;

  const la::EigenSym eig = la::generalized_eigen_spd(sb, sw_shrunk);
  const std::size_t d = std::min(k, n_classes - 1);

  FescModel model;
  model.projection = la::Matrix(k, d);
  model.eigenvalues.assign(eig.values.begin(), eig.values.begin() + d);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t a = 0; a < k; ++a)
      model.projection(a, j) = eig.vectors(a, j);
  model.class_codes = codes;

  // Projected centroids and pooled within-class covariance in the d-space.
  auto project = [&](const double* row) {
    std::vector<double> z(d, 0.0);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t a = 0; a < k; ++a)
        z[j] += model.projection(a, j) * row[a];
    return z;
  };

  model.class_means = la::Matrix(n_classes, d);
  std::vector<std::vector<double>> class_mu(n_classes);
  for (std::size_t ci = 0; ci < n_classes; ++ci) {
    class_mu[ci] = project(mu[ci].data());
    for (std::size_t j = 0; j < d; ++j)
      model.class_means(ci, j) = class_mu[ci][j];
  }

  la::Matrix pooled(d, d);
  std::size_t ci = 0;
  for (const auto& [code, members] : by_class) {
    for (std::size_t i : members) {
      std::vector<double> z(d, 0.0);
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t a = 0; a < k; ++a)
          z[j] += model.projection(a, j) * x(i, a);
      for (std::size_t aa = 0; aa < d; ++aa)
        for (std::size_t bb = 0; bb < d; ++bb)
          pooled(aa, bb) += (z[aa] - class_mu[ci][aa]) * (z[bb] - class_mu[ci][bb]);
    }
    ++ci;
  }
  const double denom = static_cast<double>(n - n_classes);
  for (double& v : pooled.a) v /= denom;
  double trace_p = 0.0;
  for (std::size_t a = 0; a < d; ++a) trace_p += pooled(a, a);
  const double ridge_p =
      std::max(kLdaGamma * trace_p / static_cast<double>(d), 1e-12);
  for (std::size_t a = 0; a < d; ++a) pooled(a, a) += ridge_p;
  model.pooled_cov_inv = la::invert_spd(pooled);
  return model;
}

AccumulatorClass mahalanobis_classify(const FescModel& model,
                                      const std::vector<double>& x) {
  const std::size_t k = model.projection.rows;
  const std::size_t d = model.projection.cols;
  if (x.size() != k)
    raise_data("ShapeMismatch", "feature vector length " +
                                    std::to_string(x.size()) + ", model expects " +
                                    std::to_string(k));
  std::vector<double> z(d, 0.0);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t a = 0; a < k; ++a)
      z[j] += model.projection(a, j) * x[a];

  double best = 0.0;
  int best_code = -1;
  std::vector<double> diff(d);
  for (std::size_t ci = 0; ci < model.class_codes.size(); ++ci) {
    for (std::size_t j = 0; j < d; ++j) diff[j] = z[j] - model.class_means(ci, j);
    double dist = 0.0;
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        dist += diff[a] * model.pooled_cov_inv(a, b) * diff[b];
    if (best_code < 0 || dist < best) {
      best = dist;
      best_code = model.class_codes[ci];
    }
  }
  return static_cast<AccumulatorClass>(best_code);
}

std::vector<std::size_t> default_k_grid(std::size_t n_features) {
  std::vector<std::size_t> grid;
  for (std::size_t k : {std::size_t{4}, std::size_t{8}, std::size_t{16},
                        std::size_t{32}, n_features}) {
    if (k >= 1 && k <= n_features &&
        std::find(grid.begin(), grid.end(), k) == grid.end())
      grid.push_back(k);
  }
  std::sort(grid.begin(), grid.end());
  return grid;
}

namespace {

// Selected + standardized feature row for one cycle.
std::vector<double> model_features(const FescModel& model, const DataSet& ds,
                                   std::size_t cycle) {
  std::vector<double> out(model.selected.size());
  // Feature columns are (sensor-major, moment-minor) over model.sensors.
  std::vector<Moments> cache(model.sensors.size());
  std::vector<bool> have(model.sensors.size(), false);
  for (std::size_t i = 0; i < model.selected.size(); ++i) {
    const std::size_t col = model.selected[i];
    const std::size_t s = col / 4;
    const std::size_t mo = col % 4;
    if (!have[s]) {
      cache[s] = extract_moments(ds.series(cycle, model.sensors[s]));
      have[s] = true;
    }
    const Moments& m = cache[s];
    const double raw = mo == 0 ? m.mean : mo == 1 ? m.std : mo == 2 ? m.skewness : m.kurtosis;
    out[i] = (raw - model.feat_mean[i]) / model.feat_std[i];
  }
  return out;
}

}  // namespace

FescTrainResult fesc_train(const DataSet& ds,
                           const std::vector<SensorId>& sensors,
                           const SplitAssignment& split,
                           const std::vector<std::size_t>& k_grid) {
  if (k_grid.empty()) raise_data("InvalidK", "empty k grid");
  std::vector<std::size_t> grid = k_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const FeatureMatrix fm = build_feature_matrix(ds, sensors);
  const std::vector<double> scores = pearson_scores(fm, split.train);

  FescTrainResult result;
  bool have_best = false;

  for (std::size_t k : grid) {
    const std::vector<std::size_t> selected = select_top_k(scores, k);

    std::vector<double> fmean(k, 0.0), fstd(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t r : split.train) s += fm.values(r, selected[j]);
      const double mean = s / static_cast<double>(split.train.size());
      double sq = 0.0;
      for (std::size_t r : split.train) {
        const double d = fm.values(r, selected[j]) - mean;
        sq += d * d;
      }
      fmean[j] = mean;
      fstd[j] = std::max(std::sqrt(sq / static_cast<double>(split.train.size())),
                         kNormEps);
    }

    la::Matrix xtr(split.train.size(), k);
    std::vector<int> ytr(split.train.size());
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      const std::size_t r = split.train[i];
      ytr[i] = fm.targets[r];
      for (std::size_t j = 0; j < k; ++j)
        xtr(i, j) = (fm.values(r, selected[j]) - fmean[j]) / fstd[j];
    }

    FescModel model = lda_fit(xtr, ytr);
    model.sensors = sensors;
    model.selected = selected;
    model.feat_mean = fmean;
    model.feat_std = fstd;

    std::size_t wrong = 0;
    std::vector<double> xv(k);
    for (std::size_t r : split.val) {
      for (std::size_t j = 0; j < k; ++j)
        xv[j] = (fm.values(r, selected[j]) - fmean[j]) / fstd[j];
      if (static_cast<int>(mahalanobis_classify(model, xv)) != fm.targets[r])
        ++wrong;
    }
    const double val_err = split.val.empty()
                               ? 0.0
                               : static_cast<double>(wrong) /
                                     static_cast<double>(split.val.size());
    result.k_curve.emplace_back(k, val_err);
    if (!have_best || val_err < result.validation_error) {
      have_best = true;
      result.validation_error = val_err;
      result.model = std::move(model);
    }
  }
  return result;
}

double fesc_evaluate(const FescModel& model, const DataSet& ds,
                     const std::vector<std::size_t>& indices) {
  if (indices.empty()) raise_data("EmptyEvaluation", "no cycles to evaluate");
  std::size_t wrong = 0;
  for (std::size_t c : indices) {
    const std::vector<double> x = model_features(model, ds, c);
    if (mahalanobis_classify(model, x) != ds.cycles[c].target) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(indices.size());
}

namespace {

void write_matrix(std::ostream& out, const char* tag, const la::Matrix& m) {
  char buf[64];
  out << tag << ' ' << m.rows << ' ' << m.cols << '\n';
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out << (c ? " " : "") << buf;
    }
    out << '\n';
  }
}

la::Matrix read_matrix(std::istream& in, const std::string& tag) {
  std::string got;
  std::size_t rows = 0, cols = 0;
  if (!(in >> got >> rows >> cols) || got != tag)
    raise_data("ParseError", "model file: expected matrix tag " + tag);
  la::Matrix m(rows, cols);
  for (double& v : m.a) {
    if (!(in >> v)) raise_data("ParseError", "model file: short matrix " + tag);
  }
  return m;
}

}  // namespace

void save_fesc_model(const FescModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise_data("IoError", "cannot write " + path.string());
  char buf[64];
  out << "fescmodel v" << model.version << '\n';
  out << "sensors " << model.sensors.size();
  for (SensorId id : model.sensors) out << ' ' << sensor_info(id).name;
  out << '\n';
  out << "selected " << model.selected.size();
  for (std::size_t i : model.selected) out << ' ' << i;
  out << '\n';
  out << "norm " << model.feat_mean.size() << '\n';
  for (std::size_t i = 0; i < model.feat_mean.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", model.feat_mean[i]);
    out << buf << ' ';
    std::snprintf(buf, sizeof buf, "%.17g", model.feat_std[i]);
    out << buf << '\n';
  }
  out << "eigenvalues " << model.eigenvalues.size();
  for (double v : model.eigenvalues) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ' ' << buf;
  }
  out << '\n';
  out << "classes " << model.class_codes.size();
  for (int c : model.class_codes) out << ' ' << c;
  out << '\n';
  write_matrix(out, "projection", model.projection);
  write_matrix(out, "class_means", model.class_means);
  write_matrix(out, "pooled_cov_inv", model.pooled_cov_inv);
  if (!out) raise_data("IoError", "short write to " + path.string());
}

FescModel load_fesc_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise_data("IoError", "cannot read " + path.string());
  FescModel model;
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "fescmodel" || version != "v1")
    raise_data("ParseError", "not a v1 fesc model file: " + path.string());
  model.version = 1;

  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "sensors")
    raise_data("ParseError", "model file: expected sensors");
  model.sensors.resize(count);
  for (SensorId& id : model.sensors) {
    std::string name;
    in >> name;
    id = sensor_from_name(name);
  }
  if (!(in >> tag >> count) || tag != "selected")
    raise_data("ParseError", "model file: expected selected");
  model.selected.resize(count);
  for (std::size_t& v : model.selected) in >> v;
  if (!(in >> tag >> count) || tag != "norm")
    raise_data("ParseError", "model file: expected norm");
  model.feat_mean.resize(count);
  model.feat_std.resize(count);
  for (std::size_t i = 0; i < count; ++i) in >> model.feat_mean[i] >> model.feat_std[i];
  if (!(in >> tag >> count) || tag != "eigenvalues")
    raise_data("ParseError", "model file: expected eigenvalues");
  model.eigenvalues.resize(count);
  for (double& v : model.eigenvalues) in >> v;
  if (!(in >> tag >> count) || tag != "classes")
    raise_data("ParseError", "model file: expected classes");
  model.class_codes.resize(count);
  for (int& v : model.class_codes) in >> v;
  if (!in) raise_data("ParseError", "model file: truncated header");
  model.projection = read_matrix(in, "projection");
  model.class_means = read_matrix(in, "class_means");
  model.pooled_cov_inv = read_matrix(in, "pooled_cov_inv");
  return model;
}

}  // namespace cyclemon
