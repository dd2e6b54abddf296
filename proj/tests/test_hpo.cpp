#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cyclemon/error.hpp"
#include "cyclemon/hpo.hpp"
#include "cyclemon/rng.hpp"

using namespace cyclemon;

namespace {

// Pure stub: no training, loss is a fixed function of the trial index.
hpo::TrialRunner loss_by_index(const std::vector<double>& losses) {
  return [losses](std::size_t, std::size_t trial, const nets::HyperParams&,
                  std::uint64_t) -> hpo::TrialOutcome {
    return {losses.at(trial), losses.at(trial) / 10.0};
  };
}

hpo::TestEvaluator const_test(double e) {
  return [e](std::size_t, std::size_t, const nets::HyperParams&,
             std::uint64_t) { return e; };
}

}  // namespace

TEST_CASE("sample_hp: fixed draw order and bounds") {
  const hpo::HyperParamSpace space = hpo::HyperParamSpace::table1();

  Rng a(42);
  Rng b(42);
  const nets::HyperParams hp = hpo::sample_hp(space, a);
  // contract: lr, filters, kernel, stride, dropout, fc in that order
  CHECK(hp.initial_lr ==
        b.log_uniform10(space.lr_exp_lo, space.lr_exp_hi));
  CHECK(hp.n_filters_12 ==
        static_cast<int>(b.uniform_int(space.filters_lo, space.filters_hi)));
  CHECK(hp.kernel_12 ==
        static_cast<int>(b.uniform_int(space.kernel_lo, space.kernel_hi)));
  CHECK(hp.stride_1 ==
        static_cast<int>(b.uniform_int(space.stride_lo, space.stride_hi)));
  CHECK(hp.dropout_rate == b.uniform(space.dropout_lo, space.dropout_hi));
  CHECK(hp.fc_neurons ==
        static_cast<int>(b.uniform_int(space.fc_lo, space.fc_hi)));

  for (const auto& s :
       {hpo::HyperParamSpace::table1(), hpo::HyperParamSpace::desk()}) {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
      const nets::HyperParams d = hpo::sample_hp(s, rng);
      REQUIRE(s.contains(d));
      REQUIRE(d.initial_lr >= 1e-7);
      REQUIRE(d.initial_lr <= 1e-4);
      REQUIRE(d.dropout_rate >= s.dropout_lo);
      REQUIRE(d.dropout_rate <= s.dropout_hi);
    }
  }
}

TEST_CASE("learning-rate decades each get about a third of the draws") {
  const hpo::HyperParamSpace space = hpo::HyperParamSpace::table1();
  Rng rng(2024);
  const int n = 100000;
  int buckets[3] = {0, 0, 0};
  for (int i = 0; i < n; ++i) {
    const nets::HyperParams hp = hpo::sample_hp(space, rng);
    const double e = std::log10(hp.initial_lr);
    REQUIRE(e >= -7.0);
    REQUIRE(e <= -4.0);
    if (e < -6.0)
      ++buckets[0];
    else if (e < -5.0)
      ++buckets[1];
    else
      ++buckets[2];
  }
  for (int share : buckets)
    CHECK(std::fabs(static_cast<double>(share) / n - 1.0 / 3.0) <= 0.02);
}

TEST_CASE("space presets and membership") {
  const hpo::HyperParamSpace full = hpo::HyperParamSpace::table1();
  CHECK(full.kernel_lo == 100);
  CHECK(full.kernel_hi == 300);
  CHECK(full.stride_lo == 100);
  CHECK(full.stride_hi == 175);
  CHECK(full.filters_lo == 10);
  CHECK(full.filters_hi == 100);
  CHECK(full.fc_lo == 500);
  CHECK(full.fc_hi == 2500);

  const hpo::HyperParamSpace desk = hpo::HyperParamSpace::desk();
  CHECK(desk.kernel_lo == 10);
  CHECK(desk.kernel_hi == 30);
  CHECK(desk.stride_lo == 10);
  CHECK(desk.stride_hi == 17);
  CHECK(desk.filters_lo == full.filters_lo);
  CHECK(desk.fc_hi == full.fc_hi);

  nets::HyperParams hp;
  hp.initial_lr = 1e-5;
  hp.n_filters_12 = 50;
  hp.kernel_12 = 20;
  hp.stride_1 = 12;
  hp.dropout_rate = 0.4;
  hp.fc_neurons = 1000;
  CHECK(desk.contains(hp));
  CHECK_FALSE(full.contains(hp));  // kernel 20 is under the full-scale floor
  hp.kernel_12 = 200;
  hp.stride_1 = 150;
  CHECK(full.contains(hp));
  hp.initial_lr = 1e-3;
  CHECK_FALSE(full.contains(hp));
}

TEST_CASE("random_search picks the lowest validation loss") {
  const auto space = hpo::HyperParamSpace::desk();
  const std::vector<double> losses = {2.0, 1.5, 0.9, 0.4, 1.1, 0.4};
  const hpo::SearchResult res = hpo::random_search(
      space, losses.size(), 17, 0, loss_by_index(losses), const_test(0.42));

  CHECK(res.selected == 3);  // 0.4 appears twice; earliest wins
  CHECK(res.selected_test_error == 0.42);
  for (const auto& tr : res.trials) {
    CHECK(tr.validation_loss == losses[tr.index]);
    if (tr.index == res.selected)
      CHECK(tr.test_error == 0.42);
    else
      CHECK(tr.test_error == -1.0);
  }
}

TEST_CASE("trial parameters derive from the master seed, not run order") {
  const auto space = hpo::HyperParamSpace::desk();
  const hpo::SearchResult res = hpo::random_search(
      space, 5, 99, 2, loss_by_index({1, 2, 3, 4, 5}), const_test(0.0));
  for (std::size_t t = 0; t < 5; ++t) {
    Rng rng = Rng::stream(99, Stream::HpoSample, 2, t);
    const nets::HyperParams expect = hpo::sample_hp(space, rng);
    CHECK(res.trials[t].hp.initial_lr == expect.initial_lr);
    CHECK(res.trials[t].hp.fc_neurons == expect.fc_neurons);
    CHECK(res.trials[t].seed == derive_seed(99, Stream::TrialSeed, 2, t));
  }
}

TEST_CASE("diverged trials are excluded from selection") {
  const auto space = hpo::HyperParamSpace::desk();
  auto runner = [](std::size_t, std::size_t trial, const nets::HyperParams&,
                   std::uint64_t) -> hpo::TrialOutcome {
    if (trial == 0) raise_numeric("DivergenceDetected", "boom");
    return {0.5 + static_cast<double>(trial), 0.1};
  };
  const hpo::SearchResult res =
      hpo::random_search(space, 4, 3, 0, runner, const_test(0.1));
  CHECK(res.selected == 1);
  CHECK(res.trials[0].status == hpo::TrialStatus::Diverged);
  CHECK(std::isinf(res.trials[0].validation_loss));
  CHECK(res.trials[0].validation_error == 1.0);
  CHECK(res.trials[1].status == hpo::TrialStatus::Completed);

  auto all_bad = [](std::size_t, std::size_t, const nets::HyperParams&,
                    std::uint64_t) -> hpo::TrialOutcome {
    raise_numeric("DivergenceDetected", "boom");
  };
  try {
    hpo::random_search(space, 3, 3, 0, all_bad, const_test(0.0));
    FAIL("expected NoViableTrial");
  } catch (const Error& e) {
    CHECK(std::string(e.name()) == "NoViableTrial");
  }
}

TEST_CASE("non-divergence failures propagate") {
  const auto space = hpo::HyperParamSpace::desk();
  auto runner = [](std::size_t, std::size_t trial, const nets::HyperParams&,
                   std::uint64_t) -> hpo::TrialOutcome {
    if (trial == 2) throw std::runtime_error("disk on fire");
    return {1.0, 0.1};
  };
  CHECK_THROWS_AS(
      hpo::random_search(space, 4, 1, 0, runner, const_test(0.0)),
      std::runtime_error);
}

TEST_CASE("parallel search matches the serial result") {
  const auto space = hpo::HyperParamSpace::desk();
  // pure, thread-safe runner with a non-trivial loss landscape
  auto runner = [](std::size_t repeat, std::size_t trial,
                   const nets::HyperParams& hp,
                   std::uint64_t seed) -> hpo::TrialOutcome {
    const double v = std::fmod(
        hp.initial_lr * 1e7 + static_cast<double>(trial) * 0.37 +
            static_cast<double>(repeat) +
            static_cast<double>(seed % 1000) * 1e-4,
        3.0);
    return {v, v / 7.0};
  };
  const hpo::SearchResult serial =
      hpo::random_search(space, 16, 5, 1, runner, const_test(0.2), {}, 1);
  const hpo::SearchResult parallel =
      hpo::random_search(space, 16, 5, 1, runner, const_test(0.2), {}, 4);

  CHECK(serial.selected == parallel.selected);
  CHECK(serial.selected_test_error == parallel.selected_test_error);
  REQUIRE(serial.trials.size() == parallel.trials.size());
  for (std::size_t t = 0; t < serial.trials.size(); ++t) {
    CHECK(serial.trials[t].validation_loss ==
          parallel.trials[t].validation_loss);
    CHECK(serial.trials[t].seed == parallel.trials[t].seed);
    CHECK(serial.trials[t].hp.initial_lr == parallel.trials[t].hp.initial_lr);
  }
}

TEST_CASE("selection hook fires after selection, before test evaluation") {
  const auto space = hpo::HyperParamSpace::desk();
  std::vector<std::pair<std::size_t, std::size_t>> seen;
  bool test_error_unset = true;
  auto hook = [&](std::size_t repeat, const hpo::TrialResult& sel) {
    seen.emplace_back(repeat, sel.index);
    test_error_unset = test_error_unset && sel.test_error == -1.0;
  };
  const hpo::TuningReport rep = hpo::repeat_tuning(
      space, 4, 3, 5, loss_by_index({3, 1, 2, 4}), const_test(0.25), hook);
  REQUIRE(seen.size() == 3);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(seen[r].first == r);
    CHECK(seen[r].second == 1);
  }
  CHECK(test_error_unset);
  CHECK(rep.mean_test_error == 0.25);
}

TEST_CASE("repeat_tuning statistics") {
  const auto space = hpo::HyperParamSpace::desk();
  auto eval = [](std::size_t repeat, std::size_t, const nets::HyperParams&,
                 std::uint64_t) {
    return 0.1 * static_cast<double>(repeat + 1);  // 0.1, 0.2, 0.3
  };

  const hpo::TuningReport one = hpo::repeat_tuning(
      space, 3, 1, 11, loss_by_index({2, 1, 3}), eval);
  CHECK_FALSE(one.has_std);
  CHECK(one.repeat_test_errors ==
        std::vector<double>{0.1});
  CHECK(one.mean_test_error == 0.1);

  const hpo::TuningReport three = hpo::repeat_tuning(
      space, 3, 3, 11, loss_by_index({2, 1, 3}), eval);
  REQUIRE(three.has_std);
  CHECK(three.repeat_test_errors.size() == 3);
  CHECK(three.mean_test_error == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(three.std_test_error == doctest::Approx(0.1).epsilon(1e-12));

  // fresh hyperparameter draws per repeat
  CHECK(three.repeats[0].trials[0].hp.initial_lr !=
        three.repeats[1].trials[0].hp.initial_lr);

  CHECK_THROWS_AS(
      hpo::repeat_tuning(space, 0, 1, 1, loss_by_index({1}), eval), Error);
  CHECK_THROWS_AS(
      hpo::repeat_tuning(space, 1, 0, 1, loss_by_index({1}), eval), Error);
}
