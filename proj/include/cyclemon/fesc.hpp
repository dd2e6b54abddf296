#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "cyclemon/dataset.hpp"
#include "cyclemon/linalg.hpp"
#include "cyclemon/preprocess.hpp"

namespace cyclemon {

enum class Moment : int { Mean = 0, Std = 1, Skewness = 2, Kurtosis = 3 };

struct Moments {
  double mean = 0.0;
  double std = 0.0;       // population (divisor n)
  double skewness = 0.0;  // m3 / m2^1.5, 0 for zero variance
  double kurtosis = 0.0;  // m4 / m2^2 (non-excess), 0 for zero variance
};

Moments extract_moments(const std::vector<double>& series);

struct FeatureDescriptor {
  SensorId sensor;
  Moment moment;
};

// Rows are cycles; columns are (sensor-major, moment-minor) features computed
// on each sensor's native-rate series.
struct FeatureMatrix {
  la::Matrix values;
  std::vector<FeatureDescriptor> descriptors;
  std::vector<int> targets;  // ordinal class codes 0-3
};

FeatureMatrix build_feature_matrix(const DataSet& ds,
                                   const std::vector<SensorId>& sensors);

// |Pearson r| of each column against the ordinal class code, over the given
// cycle rows (all rows by default). Zero-variance columns score 0.
std::vector<double> pearson_scores(const FeatureMatrix& features);
std::vector<double> pearson_scores(const FeatureMatrix& features,
                                   const std::vector<std::size_t>& rows);

std::vector<std::size_t> select_top_k(const std::vector<double>& scores,
                                      std::size_t k);

inline constexpr double kLdaGamma = 1e-4;

struct FescModel {
  int version = 1;
  std::vector<SensorId> sensors;
  std::vector<std::size_t> selected;  // feature column indices, score order
  std::vector<double> feat_mean;      // per selected feature, training stats
  std::vector<double> feat_std;
  la::Matrix projection;         // k x d
  std::vector<double> eigenvalues;  // d leading generalized eigenvalues
  std::vector<int> class_codes;  // distinct fitted codes, ascending
  la::Matrix class_means;        // |class_codes| x d, projected centroids
  la::Matrix pooled_cov_inv;     // d x d
};

// X is n x k, already selected and standardized; y holds ordinal codes.
FescModel lda_fit(const la::Matrix& x, const std::vector<int>& y);

// x is one selected+standardized feature vector of length k.
AccumulatorClass mahalanobis_classify(const FescModel& model,
                                      const std::vector<double>& x);

struct FescTrainResult {
  FescModel model;
  double validation_error = 0.0;
  // (k, validation error) for every grid point, in grid order.
  std::vector<std::pair<std::size_t, double>> k_curve;
};

std::vector<std::size_t> default_k_grid(std::size_t n_features);

FescTrainResult fesc_train(const DataSet& ds,
                           const std::vector<SensorId>& sensors,
                           const SplitAssignment& split,
                           const std::vector<std::size_t>& k_grid);

double fesc_evaluate(const FescModel& model, const DataSet& ds,
                     const std::vector<std::size_t>& indices);

void save_fesc_model(const FescModel& model, const std::filesystem::path& path);
FescModel load_fesc_model(const std::filesystem::path& path);

}  // namespace cyclemon
