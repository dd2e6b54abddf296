#include "cyclemon/hpo.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "cyclemon/error.hpp"

namespace cyclemon::hpo {

HyperParamSpace HyperParamSpace::table1() { return {}; }

HyperParamSpace HyperParamSpace::desk() {
  HyperParamSpace s;
  s.kernel_lo = 10;
  s.kernel_hi = 30;
  s.stride_lo = 10;
  s.stride_hi = 17;
  return s;
}

bool HyperParamSpace::contains(const nets::HyperParams& hp) const {
  return hp.initial_lr >= std::pow(10.0, lr_exp_lo) &&
         hp.initial_lr <= std::pow(10.0, lr_exp_hi) &&
         hp.n_filters_12 >= filters_lo && hp.n_filters_12 <= filters_hi &&
         hp.kernel_12 >= kernel_lo && hp.kernel_12 <= kernel_hi &&
         hp.stride_1 >= stride_lo && hp.stride_1 <= stride_hi &&
         hp.dropout_rate >= dropout_lo && hp.dropout_rate <= dropout_hi &&
         hp.fc_neurons >= fc_lo && hp.fc_neurons <= fc_hi;
}

nets::HyperParams sample_hp(const HyperParamSpace& space, Rng& rng) {
  nets::HyperParams hp;
  hp.initial_lr = rng.log_uniform10(space.lr_exp_lo, space.lr_exp_hi);
  hp.n_filters_12 =
      static_cast<int>(rng.uniform_int(space.filters_lo, space.filters_hi));
  hp.kernel_12 =
      static_cast<int>(rng.uniform_int(space.kernel_lo, space.kernel_hi));
  hp.stride_1 =
      static_cast<int>(rng.uniform_int(space.stride_lo, space.stride_hi));
  hp.dropout_rate = rng.uniform(space.dropout_lo, space.dropout_hi);
  hp.fc_neurons = static_cast<int>(rng.uniform_int(space.fc_lo, space.fc_hi));
  return hp;
}

namespace {

void run_slice(const TrialRunner& run_trial, std::vector<TrialResult>& trials,
               std::size_t repeat_index, std::atomic<std::size_t>& next,
               std::exception_ptr& failure, std::mutex& failure_mu) {
  for (;;) {
    const std::size_t t = next.fetch_add(1);
    if (t >= trials.size()) return;
    TrialResult& tr = trials[t];
    try {
      const TrialOutcome out = run_trial(repeat_index, t, tr.hp, tr.seed);
      tr.validation_loss = out.validation_loss;
      tr.validation_error = out.validation_error;
      tr.status = TrialStatus::Completed;
    } catch (const Error& e) {
      if (e.name() == "DivergenceDetected") {
        tr.status = TrialStatus::Diverged;
        tr.validation_loss = std::numeric_limits<double>::infinity();
        tr.validation_error = 1.0;
      } else {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
      return;
    }
  }
}

}  // namespace

SearchResult random_search(const HyperParamSpace& space, std::size_t n_trials,
                           std::uint64_t master_seed, std::size_t repeat_index,
                           const TrialRunner& run_trial,
                           const TestEvaluator& eval_test,
                           const SelectionHook& on_select, std::size_t jobs) {
  if (n_trials == 0) raise_usage("InvalidSpec", "need at least one trial");
  if (jobs == 0) jobs = 1;

  SearchResult result;
  result.trials.resize(n_trials);
  for (std::size_t t = 0; t < n_trials; ++t) {
    TrialResult& tr = result.trials[t];
    tr.index = t;
    Rng rng = Rng::stream(master_seed, Stream::HpoSample, repeat_index, t);
    tr.hp = sample_hp(space, rng);
    tr.seed = derive_seed(master_seed, Stream::TrialSeed, repeat_index, t);
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  if (jobs <= 1 || n_trials <= 1) {
    run_slice(run_trial, result.trials, repeat_index, next, failure,
              failure_mu);
  } else {
    std::vector<std::thread> pool;
    const std::size_t workers = std::min(jobs, n_trials);
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back(run_slice, std::cref(run_trial),
                        std::ref(result.trials), repeat_index, std::ref(next),
                        std::ref(failure), std::ref(failure_mu));
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  bool any = false;
  for (const TrialResult& tr : result.trials) {
    if (tr.status != TrialStatus::Completed) continue;
    if (!any || tr.validation_loss <
                    result.trials[result.selected].validation_loss) {
      result.selected = tr.index;
      any = true;
    }
  }
  if (!any)
    raise_numeric("NoViableTrial", "all " + std::to_string(n_trials) +
                                       " trials diverged");

  if (on_select) on_select(repeat_index, result.trials[result.selected]);

  TrialResult& sel = result.trials[result.selected];
  sel.test_error = eval_test(repeat_index, sel.index, sel.hp, sel.seed);
  result.selected_test_error = sel.test_error;
  return result;
}

TuningReport repeat_tuning(const HyperParamSpace& space, std::size_t n_trials,
                           std::size_t repeats, std::uint64_t master_seed,
                           const TrialRunner& run_trial,
                           const TestEvaluator& eval_test,
                           const SelectionHook& on_select, std::size_t jobs) {
  if (repeats == 0) raise_usage("InvalidSpec", "need at least one repeat");
  TuningReport report;
  for (std::size_t r = 0; r < repeats; ++r) {
    report.repeats.push_back(random_search(space, n_trials, master_seed, r,
                                           run_trial, eval_test, on_select,
                                           jobs));
    report.repeat_test_errors.push_back(
        report.repeats.back().selected_test_error);
  }

  double sum = 0.0;
  for (double e : report.repeat_test_errors) sum += e;
  report.mean_test_error = sum / static_cast<double>(repeats);
  if (repeats >= 2) {
    double ss = 0.0;
    for (double e : report.repeat_test_errors) {
      const double d = e - report.mean_test_error;
      ss += d * d;
    }
    report.std_test_error = std::sqrt(ss / static_cast<double>(repeats - 1));
    report.has_std = true;
  }
  return report;
}

}  // namespace cyclemon::hpo
