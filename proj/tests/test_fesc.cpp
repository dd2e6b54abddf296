#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "cyclemon/error.hpp"
#include "cyclemon/fesc.hpp"
#include "cyclemon/rng.hpp"
#include "support/brute_lda.hpp"

using namespace cyclemon;
using namespace brute;
using la::Matrix;

TEST_CASE("extract_moments on [1..5] and friends") {
  const Moments m = extract_moments({1, 2, 3, 4, 5});
  CHECK(m.mean == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(m.std == doctest::Approx(1.4142135623730951).epsilon(1e-15));
  CHECK(m.skewness == doctest::Approx(0.0).epsilon(1).scale(1e-15));
  CHECK(m.kurtosis == doctest::Approx(1.7).epsilon(1e-15));

  const Moments c = extract_moments({4, 4, 4, 4});
  CHECK(c.mean == 4.0);
  CHECK(c.std == 0.0);
  CHECK(c.skewness == 0.0);  // zero-variance convention
  CHECK(c.kurtosis == 0.0);

  // non-dyadic constant: the rounded mean of n copies lands an ulp off the
  // constant, which must not leak into the higher moments
  const Moments d = extract_moments(std::vector<double>(57, 0.1));
  CHECK(d.mean == 0.1);
  CHECK(d.std == 0.0);
  CHECK(d.skewness == 0.0);
  CHECK(d.kurtosis == 0.0);

  CHECK_THROWS_AS(extract_moments({}), Error);
}

TEST_CASE("extract_moments matches direct central-moment formulas") {
  Rng rng(101);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 2 + rng.below(64);
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-5.0, 5.0);
    if (rep % 37 == 0) {
      const Moments m = extract_moments(std::vector<double>(n, x[0]));
      REQUIRE(m.mean == x[0]);
      REQUIRE(m.std == 0.0);
      REQUIRE(m.skewness == 0.0);
      REQUIRE(m.kurtosis == 0.0);
    }

    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
      const double d = v - mean;
      m2 += d * d;
      m3 += d * d * d;
      m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);

    const Moments m = extract_moments(x);
    REQUIRE(std::fabs(m.mean - mean) < 1e-10);
    REQUIRE(std::fabs(m.std - std::sqrt(m2)) < 1e-10);
    REQUIRE(std::fabs(m.skewness - m3 / std::pow(m2, 1.5)) < 1e-10);
    REQUIRE(std::fabs(m.kurtosis - m4 / (m2 * m2)) < 1e-10);
  }
}

namespace {

DataSet moment_fixture(std::size_t cycles, std::size_t sensors,
                       std::uint64_t seed) {
  SyntheticSpec spec;
  spec.cycles = cycles;
  spec.sensors = sensors;
  spec.informative_sensors = 1;
  spec.seed = seed;
  return generate_synthetic(spec, seed);
}

double pearson_ref(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("build_feature_matrix layout: sensor-major, moment-minor") {
  const DataSet ds = moment_fixture(8, 3, 7);
  const std::vector<SensorId> sensors = {SensorId::PS2, SensorId::PS1};
  const FeatureMatrix f = build_feature_matrix(ds, sensors);
  REQUIRE(f.values.rows == 8);
  REQUIRE(f.values.cols == 8);  // 2 sensors x 4 moments
  REQUIRE(f.descriptors.size() == 8);
  CHECK(f.descriptors[0].sensor == SensorId::PS2);
  CHECK(f.descriptors[0].moment == Moment::Mean);
  CHECK(f.descriptors[3].moment == Moment::Kurtosis);
  CHECK(f.descriptors[4].sensor == SensorId::PS1);

  // column values equal direct moment computation on the native series
  for (std::size_t i = 0; i < 8; ++i) {
    const Moments m = extract_moments(ds.series(i, SensorId::PS2));
    CHECK(f.values(i, 0) == doctest::Approx(m.mean).epsilon(1e-14));
    CHECK(f.values(i, 1) == doctest::Approx(m.std).epsilon(1e-14));
    CHECK(f.values(i, 2) == doctest::Approx(m.skewness).epsilon(1e-12));
    CHECK(f.values(i, 3) == doctest::Approx(m.kurtosis).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < 8; ++i)
    CHECK(f.targets[i] == static_cast<int>(ds.cycles[i].target));
}

TEST_CASE("pearson_scores: frozen value, textbook match, invariances") {
  // fixture frozen against scipy.stats.pearsonr
  FeatureMatrix f;
  f.values = Matrix(8, 2);
  const double col0[] = {0.5, 1.25, -0.75, 2.0, 3.5, -1.0, 0.0, 2.25};
  const double col1[] = {1, 2, 3, 4, 5, 6, 7, 8};
  for (std::size_t i = 0; i < 8; ++i) {
    f.values(i, 0) = col0[i];
    f.values(i, 1) = col1[i];
  }
  f.targets = {0, 0, 1, 1, 2, 2, 3, 3};
  const std::vector<double> s = pearson_scores(f);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(0.10490472951092719).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(0.97590007294853309).epsilon(1e-12));

  // random columns against the textbook formula
  Rng rng(55);
  for (int rep = 0; rep < 200; ++rep) {
    FeatureMatrix g;
    const std::size_t n = 8 + rng.below(40);
    g.values = Matrix(n, 3);
    g.targets.resize(n);
    std::vector<double> yv(n);
    for (std::size_t i = 0; i < n; ++i) {
      g.targets[i] = static_cast<int>(rng.below(4));
      yv[i] = g.targets[i];
      for (std::size_t j = 0; j < 3; ++j) g.values(i, j) = rng.normal();
    }
    const std::vector<double> got = pearson_scores(g);
    for (std::size_t j = 0; j < 3; ++j) {
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = g.values(i, j);
      REQUIRE(std::fabs(got[j] - std::fabs(pearson_ref(col, yv))) < 1e-12);
    }
  }

  // |r| is invariant under positive affine maps and sign flips
  FeatureMatrix h = f;
  for (std::size_t i = 0; i < 8; ++i) h.values(i, 0) = -3.0 * f.values(i, 0) + 10.0;
  const std::vector<double> hs = pearson_scores(h);
  CHECK(hs[0] == doctest::Approx(s[0]).epsilon(1e-12));

  // zero-variance column scores 0
  FeatureMatrix z = f;
  for (std::size_t i = 0; i < 8; ++i) z.values(i, 1) = 42.0;
  CHECK(pearson_scores(z)[1] == 0.0);

  // row-subset overload
  const std::vector<double> sub = pearson_scores(f, {0, 1, 2, 3, 4, 5});
  std::vector<double> c0(6), yv6(6);
  for (std::size_t i = 0; i < 6; ++i) {
    c0[i] = f.values(i, 0);
    yv6[i] = f.targets[i];
  }
  CHECK(sub[0] == doctest::Approx(std::fabs(pearson_ref(c0, yv6))).epsilon(1e-12));
}

TEST_CASE("select_top_k matches a full-sort oracle exactly") {
  Rng rng(66);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<double> scores(n);
    for (double& v : scores) {
      v = rng.uniform();
      if (rng.below(4) == 0) v = 0.5;  // force ties often
    }
    const std::size_t k = 1 + rng.below(n);

    // oracle: stable sort by (-score, index)
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;
    });
    idx.resize(k);

    REQUIRE(select_top_k(scores, k) == idx);
  }
  CHECK_THROWS_AS(select_top_k({0.5, 0.2}, 3), Error);
  CHECK_THROWS_AS(select_top_k({0.5}, 0), Error);
}

TEST_CASE("default_k_grid clips to the feature count") {
  CHECK(default_k_grid(68) ==
        std::vector<std::size_t>{4, 8, 16, 32, 68});
  CHECK(default_k_grid(16) == std::vector<std::size_t>{4, 8, 16});
  CHECK(default_k_grid(20) == std::vector<std::size_t>{4, 8, 16, 20});
  CHECK(default_k_grid(3) == std::vector<std::size_t>{3});
  CHECK(default_k_grid(4) == std::vector<std::size_t>{4});
}

TEST_CASE("lda_fit + mahalanobis_classify agree with brute force on 20 instances") {
  Rng rng(2024);
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t C = 2 + rng.below(3);              // 2..4 classes
    const std::size_t k = 1 + rng.below(8);              // 1..8 features
    const std::size_t per = 5 + rng.below(10);           // samples per class
    const std::size_t n = C * per;
    Matrix x(n, k);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = i % C;
      y[i] = static_cast<int>(c);
      for (std::size_t j = 0; j < k; ++j)
        x(i, j) = rng.normal() + 1.5 * static_cast<double>(c) *
                                     (j == 0 ? 1.0 : 0.3);
    }

    const FescModel model = lda_fit(x, y);
    Matrix sb, swr;
    const BruteLda brute = brute_fit(x, y, &sb, &swr);

    // eigen residuals: S_b w = lambda (S_w + ridge I) w for every kept pair
    const std::size_t d = model.projection.cols;
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<double> w(k), bw(k, 0), ww(k, 0);
      for (std::size_t a = 0; a < k; ++a) w[a] = model.projection(a, j);
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
          bw[a] += sb(a, b) * w[b];
          ww[a] += swr(a, b) * w[b];
        }
      double resid = 0;
      for (std::size_t a = 0; a < k; ++a) {
        const double r = bw[a] - model.eigenvalues[j] * ww[a];
        resid += r * r;
      }
      REQUIRE(std::sqrt(resid) <= 1e-8 * std::max(1.0, model.eigenvalues[j]));
    }

    // 100% prediction agreement on fresh probes
    for (int probe = 0; probe < 30; ++probe) {
      std::vector<double> p(k);
      for (double& v : p) v = rng.normal() * 2.0;
      const AccumulatorClass got = mahalanobis_classify(model, p);
      const int want = brute_classify(brute, p);
      REQUIRE(static_cast<int>(got) == want);
    }
  }
}

TEST_CASE("mahalanobis ties go to the lower class code") {
  // two symmetric classes; probe exactly on the midline
  Matrix x(8, 1);
  std::vector<int> y = {0, 0, 0, 0, 1, 1, 1, 1};
  const double vals[] = {-2, -1.5, -1, -0.5, 0.5, 1, 1.5, 2};
  for (std::size_t i = 0; i < 8; ++i) x(i, 0) = vals[i];
  const FescModel model = lda_fit(x, y);
  CHECK(mahalanobis_classify(model, {0.0}) == AccumulatorClass::Optimal);
}

TEST_CASE("lda_fit input validation") {
  Matrix x(4, 2);
  CHECK_THROWS_AS(lda_fit(x, {0, 0, 0, 0}), Error);        // one class
  CHECK_THROWS_AS(lda_fit(x, {0, 0, 0, 1}), Error);        // class of size 1
  CHECK_THROWS_AS(lda_fit(x, {0, 1}), Error);              // y size mismatch
}

TEST_CASE("fesc_train separates the synthetic classes and records the k curve") {
  const DataSet ds = moment_fixture(40, 3, 12);
  const SplitAssignment split = split_random(ds.size(), 12);
  std::vector<SensorId> sensors;
  for (const SensorInfo& s : ds.manifest) sensors.push_back(s.id);

  const FescTrainResult r =
      fesc_train(ds, sensors, split, default_k_grid(sensors.size() * 4));
  CHECK(r.validation_error <= 0.25);
  REQUIRE(!r.k_curve.empty());
  CHECK(r.k_curve.size() == default_k_grid(12).size());

  // chosen k achieves the minimum of the curve; ties go to the smaller k
  double best = r.k_curve[0].second;
  std::size_t best_k = r.k_curve[0].first;
  for (const auto& [k, err] : r.k_curve) {
    if (err < best) {
      best = err;
      best_k = k;
    }
  }
  CHECK(r.validation_error == best);
  CHECK(r.model.selected.size() == best_k);

  const double test_err = fesc_evaluate(r.model, ds, split.test);
  CHECK(test_err <= 0.5);  // sanity; the informative sensor separates well
  CHECK_THROWS_AS(fesc_evaluate(r.model, ds, {}), Error);
}

TEST_CASE("fesc model round-trips through disk") {
  const DataSet ds = moment_fixture(32, 2, 13);
  const SplitAssignment split = split_random(ds.size(), 13);
  std::vector<SensorId> sensors = {SensorId::PS1, SensorId::PS2};
  const FescTrainResult r = fesc_train(ds, sensors, split, {4, 8});

  const std::filesystem::path path =
      std::filesystem::temp_directory_path() /
      ("cyclemon_fesc_" + std::to_string(std::random_device{}()) + ".txt");
  save_fesc_model(r.model, path);
  const FescModel back = load_fesc_model(path);
  std::filesystem::remove(path);

  CHECK(back.sensors == r.model.sensors);
  CHECK(back.selected == r.model.selected);
  CHECK(back.class_codes == r.model.class_codes);
  REQUIRE(back.projection.a.size() == r.model.projection.a.size());
  for (std::size_t i = 0; i < back.projection.a.size(); ++i)
    CHECK(back.projection.a[i] == r.model.projection.a[i]);
  for (std::size_t i = 0; i < back.pooled_cov_inv.a.size(); ++i)
    CHECK(back.pooled_cov_inv.a[i] == r.model.pooled_cov_inv.a[i]);

  // identical predictions after reload
  const double e1 = fesc_evaluate(r.model, ds, split.test);
  const double e2 = fesc_evaluate(back, ds, split.test);
  CHECK(e1 == e2);
}
