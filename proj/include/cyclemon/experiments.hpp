#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cyclemon/dataset.hpp"
#include "cyclemon/hpo.hpp"

namespace cyclemon::experiments {

struct ScaleConfig {
  std::string name = "desk";
  std::size_t grid = 600;
  std::size_t n_trials = 10;
  std::size_t repeats = 3;
  std::size_t epochs = 30;
  hpo::HyperParamSpace space = hpo::HyperParamSpace::desk();

  static ScaleConfig desk() { return {}; }
  static ScaleConfig full() {
    return {"full", 6000, 50, 5, 100, hpo::HyperParamSpace::table1()};
  }
};

// Deterministic structured run log (no timestamps). Test-split access is
// gated: test_access throws unless the (config, repeat) selection was
// finalized first, which is what the hygiene audit certifies.
class RunLog {
public:
  struct Entry {
    std::string kind;  // note | trial | select | test | result
    std::string config;
    std::size_t repeat = 0;
    std::string text;
  };

  void note(const std::string& text);
  void trial(const std::string& config, std::size_t repeat, std::size_t trial,
             const std::string& text);
  void finalize_selection(const std::string& config, std::size_t repeat,
                          const std::string& text);
  void test_access(const std::string& config, std::size_t repeat);
  void result(const std::string& config, const std::string& text);

  bool selection_finalized(const std::string& config, std::size_t repeat) const;
  // Replays the entries: every test entry must be preceded by a select entry
  // for the same (config, repeat).
  bool audit_hygiene() const;

  const std::vector<Entry>& entries() const { return entries_; }
  void save(const std::filesystem::path& path) const;

private:
  std::vector<Entry> entries_;
  std::set<std::pair<std::string, std::size_t>> finalized_;
};

// Resumable store of per-trial outcomes keyed by (config, master seed,
// repeat, trial). Thread-safe; values round-trip exactly through the file.
class TrialCache {
public:
  struct ValEntry {
    double val_loss = 0.0;
    double val_error = 0.0;
    bool diverged = false;
  };

  bool lookup_val(const std::string& config, std::uint64_t master,
                  std::size_t repeat, std::size_t trial, ValEntry* out) const;
  void store_val(const std::string& config, std::uint64_t master,
                 std::size_t repeat, std::size_t trial, const ValEntry& e);
  bool lookup_test(const std::string& config, std::uint64_t master,
                   std::size_t repeat, std::size_t trial, double* out) const;
  void store_test(const std::string& config, std::uint64_t master,
                  std::size_t repeat, std::size_t trial, double error);

  std::size_t size() const;
  void load(const std::filesystem::path& path);  // missing file is fine
  void save(const std::filesystem::path& path) const;

private:
  std::map<std::string, ValEntry> val_;
  std::map<std::string, double> test_;
  mutable std::mutex mu_;
};

struct ConfigResult {
  std::string id;
  std::vector<double> repeat_errors;
  double mean_error = 0.0;
  double std_error = 0.0;
  bool has_std = false;
  std::size_t repeats = 0;
  std::uint64_t seed = 0;
};

struct ExperimentResult {
  std::string preset;
  std::vector<ConfigResult> configs;
  std::string best_sensor;   // set by the sweep-derived presets
  std::string worst_sensor;
};

struct Context {
  const DataSet* data = nullptr;
  ScaleConfig scale;
  std::uint64_t master_seed = 1;
  std::size_t jobs = 1;
  std::filesystem::path out_root;  // empty: no files written
  TrialCache* cache = nullptr;     // optional, shared across presets
};

// One full tuning (repeat_tuning over the scale's space) of the model defined
// by the lane channel sets: one lane is an early-fusion TCOCNN, several lanes
// a late-fusion net. The id keys the run log and the trial cache.
ConfigResult tune_channels(Context& ctx, RunLog& log, const std::string& id,
                           const std::vector<std::vector<Channel>>& lanes,
                           const SplitAssignment& split);

// FESC on a sensor subset; the run log records the k grid with per-k
// validation errors.
ExperimentResult run_baseline(Context& ctx,
                              const std::vector<SensorId>& sensors,
                              const std::string& id);
// FESC on all dataset sensors (id "fesc_all").
ExperimentResult run_baseline_all(Context& ctx);
// Early-fusion TCOCNN over all sensors, tuned via repeat_tuning.
ExperimentResult run_cnn_all(Context& ctx);
// One tuning per sensor (the fig4a preset); identifies best and worst sensors.
ExperimentResult run_single_sensor_sweep(Context& ctx);
// Best sensor paired with every other sensor, plus best+best and
// best+noise (the fig4b preset).
ExperimentResult run_pair_studies(Context& ctx);
// Single-lane vs two-lane architecture on the (best, worst) pair.
ExperimentResult run_fusion_comparison(Context& ctx);
// All of the above, sharing one trial cache.
ExperimentResult run_all(Context& ctx);

// Writes results.csv and results.svg under dir. Byte-stable.
void emit_report(const ExperimentResult& result,
                 const std::filesystem::path& dir);

std::string env_text(const Context& ctx);

}  // namespace cyclemon::experiments
