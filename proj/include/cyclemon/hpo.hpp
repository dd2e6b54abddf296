#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cyclemon/nets.hpp"
#include "cyclemon/rng.hpp"

namespace cyclemon::hpo {

struct HyperParamSpace {
  double lr_exp_lo = -7.0;
  double lr_exp_hi = -4.0;
  int filters_lo = 10, filters_hi = 100;
  int kernel_lo = 100, kernel_hi = 300;
  int stride_lo = 100, stride_hi = 175;
  double dropout_lo = 0.30, dropout_hi = 0.50;
  int fc_lo = 500, fc_hi = 2500;

  // The full-scale search space (6000-sample grid).
  static HyperParamSpace table1();
  // Kernel and stride scaled to the 600-sample desk grid; other ranges kept.
  static HyperParamSpace desk();

  bool contains(const nets::HyperParams& hp) const;
};

// lr log-uniform, integers uniform inclusive, dropout uniform. Draw order is
// fixed: lr, filters, kernel, stride, dropout, fc.
nets::HyperParams sample_hp(const HyperParamSpace& space, Rng& rng);

enum class TrialStatus { Completed, Diverged };

struct TrialResult {
  std::size_t index = 0;
  nets::HyperParams hp;
  double validation_loss = 0.0;
  double validation_error = 0.0;
  double test_error = -1.0;  // filled only for the selected trial
  std::uint64_t seed = 0;
  TrialStatus status = TrialStatus::Completed;
};

struct TrialOutcome {
  double validation_loss = 0.0;
  double validation_error = 0.0;
};

// Trains one candidate and reports validation metrics. Must be thread-safe
// for jobs > 1 and must not touch the test split.
using TrialRunner = std::function<TrialOutcome(
    std::size_t repeat, std::size_t trial, const nets::HyperParams& hp,
    std::uint64_t seed)>;

// Produces the selected trial's test error, typically by a deterministic
// retrain with the trial's seed. Called once per search, after selection.
using TestEvaluator = std::function<double(
    std::size_t repeat, std::size_t trial, const nets::HyperParams& hp,
    std::uint64_t seed)>;

// Invoked when the selection is final, before any test evaluation.
using SelectionHook =
    std::function<void(std::size_t repeat, const TrialResult& selected)>;

struct SearchResult {
  std::vector<TrialResult> trials;
  std::size_t selected = 0;  // index into trials
  double selected_test_error = -1.0;
};

// Per-trial hyperparameters come from stream (master, HpoSample, repeat,
// trial) and per-trial seeds from derive_seed(master, TrialSeed, repeat,
// trial), so results do not depend on execution order. Trials raising
// DivergenceDetected are recorded and excluded from selection; ties on
// validation loss go to the earliest trial.
SearchResult random_search(const HyperParamSpace& space, std::size_t n_trials,
                           std::uint64_t master_seed, std::size_t repeat_index,
                           const TrialRunner& run_trial,
                           const TestEvaluator& eval_test,
                           const SelectionHook& on_select = {},
                           std::size_t jobs = 1);

struct TuningReport {
  std::vector<SearchResult> repeats;
  std::vector<double> repeat_test_errors;
  double mean_test_error = 0.0;
  double std_test_error = 0.0;  // meaningful only when has_std
  bool has_std = false;         // repeats >= 2
};

// r independent searches over one fixed data split; fresh hyperparameter and
// init randomness per repeat. std uses divisor (r - 1).
TuningReport repeat_tuning(const HyperParamSpace& space, std::size_t n_trials,
                           std::size_t repeats, std::uint64_t master_seed,
                           const TrialRunner& run_trial,
                           const TestEvaluator& eval_test,
                           const SelectionHook& on_select = {},
                           std::size_t jobs = 1);

}  // namespace cyclemon::hpo
