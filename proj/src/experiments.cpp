#include "cyclemon/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cyclemon/error.hpp"
#include "cyclemon/fesc.hpp"
#include "cyclemon/kernels.hpp"
#include "cyclemon/nets.hpp"
#include "cyclemon/preprocess.hpp"
#include "cyclemon/report.hpp"

namespace cyclemon::experiments {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hp_text(const nets::HyperParams& hp) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "lr=%.6g filters=%d kernel=%d stride=%d dropout=%.6g fc=%d",
                hp.initial_lr, hp.n_filters_12, hp.kernel_12, hp.stride_1,
                hp.dropout_rate, hp.fc_neurons);
  return buf;
}

}  // namespace

void RunLog::note(const std::string& text) {
  entries_.push_back({"note", "", 0, text});
}

void RunLog::trial(const std::string& config, std::size_t repeat,
                   std::size_t trial, const std::string& text) {
  entries_.push_back(
      {"trial", config, repeat, "trial " + std::to_string(trial) + " " + text});
}

void RunLog::finalize_selection(const std::string& config, std::size_t repeat,
                                const std::string& text) {
  finalized_.insert({config, repeat});
  entries_.push_back({"select", config, repeat, text});
}

void RunLog::test_access(const std::string& config, std::size_t repeat) {
  if (finalized_.find({config, repeat}) == finalized_.end())
    raise_usage("TestAccessDenied",
                "test split requested before a finalized selection for " +
                    config + " repeat " + std::to_string(repeat));
  entries_.push_back({"test", config, repeat, "test split accessed"});
}

void RunLog::result(const std::string& config, const std::string& text) {
  entries_.push_back({"result", config, 0, text});
}

bool RunLog::selection_finalized(const std::string& config,
                                 std::size_t repeat) const {
  return finalized_.find({config, repeat}) != finalized_.end();
}

bool RunLog::audit_hygiene() const {
  std::set<std::pair<std::string, std::size_t>> seen;
  for (const Entry& e : entries_) {
    if (e.kind == "select") {
      seen.insert({e.config, e.repeat});
    } else if (e.kind == "test") {
      if (seen.find({e.config, e.repeat}) == seen.end()) return false;
    }
  }
  return true;
}

void RunLog::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  for (const Entry& e : entries_) {
    out << e.kind << '\t' << (e.config.empty() ? "-" : e.config) << '\t'
        << e.repeat << '\t' << e.text << '\n';
  }
  report::write_text(path, out.str());
}

namespace {

std::string cache_key(const std::string& config, std::uint64_t master,
                      std::size_t repeat, std::size_t trial) {
  return config + "|" + std::to_string(master) + "|" + std::to_string(repeat) +
         "|" + std::to_string(trial);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace

bool TrialCache::lookup_val(const std::string& config, std::uint64_t master,
                            std::size_t repeat, std::size_t trial,
                            ValEntry* out) const {
  std::lock_guard<std::mutex> lock(mu_);
  const auto it = val_.find(cache_key(config, master, repeat, trial));
  if (it == val_.end()) return false;
  *out = it->second;
  return true;
}

void TrialCache::store_val(const std::string& config, std::uint64_t master,
                           std::size_t repeat, std::size_t trial,
                           const ValEntry& e) {
  std::lock_guard<std::mutex> lock(mu_);
  val_[cache_key(config, master, repeat, trial)] = e;
}

bool TrialCache::lookup_test(const std::string& config, std::uint64_t master,
                             std::size_t repeat, std::size_t trial,
                             double* out) const {
  std::lock_guard<std::mutex> lock(mu_);
  const auto it = test_.find(cache_key(config, master, repeat, trial));
  if (it == test_.end()) return false;
  *out = it->second;
  return true;
}

void TrialCache::store_test(const std::string& config, std::uint64_t master,
                            std::size_t repeat, std::size_t trial,
                            double error) {
  std::lock_guard<std::mutex> lock(mu_);
  test_[cache_key(config, master, repeat, trial)] = error;
}

std::size_t TrialCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return val_.size() + test_.size();
}

void TrialCache::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) return;
  std::lock_guard<std::mutex> lock(mu_);
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto parts = split_tabs(line);
    try {
      if (parts.size() == 8 && parts[0] == "val") {
        const std::string key = parts[1] + "|" + parts[2] + "|" + parts[3] +
                                "|" + parts[4];
        val_[key] = {std::stod(parts[5]), std::stod(parts[6]),
                     parts[7] == "diverged"};
      } else if (parts.size() == 6 && parts[0] == "test") {
        const std::string key = parts[1] + "|" + parts[2] + "|" + parts[3] +
                                "|" + parts[4];
        test_[key] = std::stod(parts[5]);
      }
    } catch (const std::exception&) {
      // a cache is advisory; unreadable rows are simply not reused
    }
  }
}

namespace {

// Splits a cache key back into config|master|repeat|trial. The numeric
// fields never contain '|', so split from the right.
std::vector<std::string> split_key(const std::string& key) {
  std::vector<std::string> tail;
  std::string rest = key;
  for (int i = 0; i < 3; ++i) {
    const std::size_t bar = rest.rfind('|');
    tail.push_back(rest.substr(bar + 1));
    rest.resize(bar);
  }
  return {rest, tail[2], tail[1], tail[0]};
}

}  // namespace

void TrialCache::save(const std::filesystem::path& path) const {
  std::lock_guard<std::mutex> lock(mu_);
  std::ostringstream out;
  for (const auto& [key, e] : val_) {
    const auto parts = split_key(key);
    out << "val\t" << parts[0] << '\t' << parts[1] << '\t' << parts[2] << '\t'
        << parts[3] << '\t' << num17(e.val_loss) << '\t' << num17(e.val_error)
        << '\t' << (e.diverged ? "diverged" : "ok") << '\n';
  }
  for (const auto& [key, err] : test_) {
    const auto parts = split_key(key);
    out << "test\t" << parts[0] << '\t' << parts[1] << '\t' << parts[2] << '\t'
        << parts[3] << '\t' << num17(err) << '\n';
  }
  report::write_text(path, out.str());
}

namespace {

void check_context(const Context& ctx) {
  if (ctx.data == nullptr || ctx.data->size() == 0)
    raise_data("InvalidSpec", "experiment needs a loaded dataset");
}

}  // namespace

ConfigResult tune_channels(Context& ctx, RunLog& log, const std::string& id,
                           const std::vector<std::vector<Channel>>& lanes,
                           const SplitAssignment& split) {
  const ModelInputs inputs =
      build_model_inputs(*ctx.data, lanes, ctx.scale.grid, split,
                         ctx.master_seed);

  auto build_net = [&](const nets::HyperParams& hp) {
    if (lanes.size() == 1)
      return nets::build_tcocnn(hp, lanes[0].size(), ctx.scale.grid);
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    for (const auto& lane : lanes)
      shapes.emplace_back(lane.size(), ctx.scale.grid);
    return nets::build_2lcnn(hp, shapes);
  };

  hpo::TrialRunner runner = [&](std::size_t repeat, std::size_t trial,
                                const nets::HyperParams& hp,
                                std::uint64_t seed) -> hpo::TrialOutcome {
    TrialCache::ValEntry cached;
    if (ctx.cache && ctx.cache->lookup_val(id, ctx.master_seed, repeat, trial,
                                           &cached)) {
      if (cached.diverged)
        raise_numeric("DivergenceDetected", "cached diverged trial");
      return {cached.val_loss, cached.val_error};
    }
    nets::NetConfig net = build_net(hp);
    nets::TrainConfig tc;
    tc.epochs = ctx.scale.epochs;
    tc.seed = seed;
    try {
      const nets::TrainOutcome out = nets::train(net, inputs, split, tc);
      if (ctx.cache)
        ctx.cache->store_val(id, ctx.master_seed, repeat, trial,
                             {out.report.best_val_loss,
                              out.report.best_val_error, false});
      return {out.report.best_val_loss, out.report.best_val_error};
    } catch (const Error& e) {
      if (e.name() == "DivergenceDetected" && ctx.cache)
        ctx.cache->store_val(id, ctx.master_seed, repeat, trial,
                             {0.0, 0.0, true});
      throw;
    }
  };

  hpo::TestEvaluator tester = [&](std::size_t repeat, std::size_t trial,
                                  const nets::HyperParams& hp,
                                  std::uint64_t seed) -> double {
    log.test_access(id, repeat);
    double cached = 0.0;
    if (ctx.cache &&
        ctx.cache->lookup_test(id, ctx.master_seed, repeat, trial, &cached))
      return cached;
    nets::NetConfig net = build_net(hp);
    nets::TrainConfig tc;
    tc.epochs = ctx.scale.epochs;
    tc.seed = seed;
    tc.eval_test = true;
    const nets::TrainOutcome out = nets::train(net, inputs, split, tc);
    if (ctx.cache)
      ctx.cache->store_test(id, ctx.master_seed, repeat, trial,
                            out.report.test_error);
    return out.report.test_error;
  };

  hpo::SelectionHook hook = [&](std::size_t repeat,
                                const hpo::TrialResult& sel) {
    log.finalize_selection(id, repeat,
                           "selected trial " + std::to_string(sel.index) +
                               " val_loss=" + num(sel.validation_loss));
  };

  const hpo::TuningReport rep =
      hpo::repeat_tuning(ctx.scale.space, ctx.scale.n_trials,
                         ctx.scale.repeats, ctx.master_seed, runner, tester,
                         hook, ctx.jobs);

  for (std::size_t r = 0; r < rep.repeats.size(); ++r) {
    for (const hpo::TrialResult& tr : rep.repeats[r].trials) {
      std::string text = hp_text(tr.hp) + " seed=" + std::to_string(tr.seed);
      if (tr.status == hpo::TrialStatus::Diverged)
        text += " diverged";
      else
        text += " val_loss=" + num(tr.validation_loss) +
                " val_error=" + num(tr.validation_error);
      log.trial(id, r, tr.index, text);
    }
    log.result(id, "repeat " + std::to_string(r) +
                       " test_error=" + num(rep.repeat_test_errors[r]));
  }

  ConfigResult cr;
  cr.id = id;
  cr.repeat_errors = rep.repeat_test_errors;
  cr.mean_error = rep.mean_test_error;
  cr.std_error = rep.has_std ? rep.std_test_error : 0.0;
  cr.has_std = rep.has_std;
  cr.repeats = ctx.scale.repeats;
  cr.seed = ctx.master_seed;
  log.result(id, "mean_error=" + num(cr.mean_error) +
                     (cr.has_std ? " std_error=" + num(cr.std_error) : ""));
  return cr;
}

namespace {

void log_header(RunLog& log, const Context& ctx, const std::string& preset) {
  log.note("preset " + preset + " scale=" + ctx.scale.name +
           " grid=" + std::to_string(ctx.scale.grid) +
           " trials=" + std::to_string(ctx.scale.n_trials) +
           " repeats=" + std::to_string(ctx.scale.repeats) +
           " epochs=" + std::to_string(ctx.scale.epochs) +
           " seed=" + std::to_string(ctx.master_seed));
}

SplitAssignment log_split(RunLog& log, const Context& ctx) {
  const SplitAssignment split =
      split_random(ctx.data->size(), ctx.master_seed);
  log.note("split train=" + std::to_string(split.train.size()) +
           " val=" + std::to_string(split.val.size()) +
           " test=" + std::to_string(split.test.size()));
  return split;
}

void finish(Context& ctx, const RunLog& log, const ExperimentResult& res) {
  if (ctx.out_root.empty()) return;
  const std::filesystem::path dir = ctx.out_root / res.preset;
  emit_report(res, dir);
  log.save(dir / "runlog.txt");
  report::write_text(dir / "env.txt", env_text(ctx));
  if (ctx.cache) ctx.cache->save(ctx.out_root / "trial_cache.txt");
}

std::vector<ConfigResult> sweep_configs(Context& ctx, RunLog& log,
                                        const SplitAssignment& split) {
  std::vector<ConfigResult> out;
  for (const SensorInfo& si : ctx.data->manifest) {
    out.push_back(tune_channels(ctx, log, "single:" + std::string(si.name),
                                {{Channel::sensor(si.id)}}, split));
  }
  return out;
}

std::pair<std::size_t, std::size_t> best_worst(
    const std::vector<ConfigResult>& sweep) {
  std::size_t best = 0, worst = 0;
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    if (sweep[i].mean_error < sweep[best].mean_error) best = i;
    if (sweep[i].mean_error > sweep[worst].mean_error) worst = i;
  }
  return {best, worst};
}

}  // namespace

ExperimentResult run_baseline(Context& ctx,
                              const std::vector<SensorId>& sensors,
                              const std::string& id) {
  check_context(ctx);
  if (sensors.empty()) raise_data("InvalidSpec", "baseline needs sensors");
  RunLog log;
  log_header(log, ctx, "baseline");
  const SplitAssignment split = log_split(log, ctx);

  const FescTrainResult fit =
      fesc_train(*ctx.data, sensors, split, default_k_grid(sensors.size() * 4));
  for (std::size_t i = 0; i < fit.k_curve.size(); ++i)
    log.trial(id, 0, i,
              "k=" + std::to_string(fit.k_curve[i].first) +
                  " val_error=" + num(fit.k_curve[i].second));
  log.finalize_selection(
      id, 0,
      "selected k=" + std::to_string(fit.model.selected.size()) +
          " val_error=" + num(fit.validation_error));
  log.test_access(id, 0);
  const double err = fesc_evaluate(fit.model, *ctx.data, split.test);
  log.result(id, "test_error=" + num(err));

  ConfigResult cr;
  cr.id = id;
  cr.repeat_errors = {err};
  cr.mean_error = err;
  cr.has_std = false;
  cr.repeats = 1;
  cr.seed = ctx.master_seed;

  ExperimentResult res;
  res.preset = "baseline";
  res.configs = {cr};
  finish(ctx, log, res);
  return res;
}

ExperimentResult run_baseline_all(Context& ctx) {
  check_context(ctx);
  std::vector<SensorId> sensors;
  for (const SensorInfo& si : ctx.data->manifest) sensors.push_back(si.id);
  return run_baseline(ctx, sensors, "fesc_all");
}

ExperimentResult run_cnn_all(Context& ctx) {
  check_context(ctx);
  RunLog log;
  log_header(log, ctx, "cnn_all");
  const SplitAssignment split = log_split(log, ctx);

  std::vector<Channel> all;
  for (const SensorInfo& si : ctx.data->manifest)
    all.push_back(Channel::sensor(si.id));

  ExperimentResult res;
  res.preset = "cnn_all";
  res.configs = {tune_channels(ctx, log, "cnn_all", {all}, split)};
  finish(ctx, log, res);
  return res;
}

ExperimentResult run_single_sensor_sweep(Context& ctx) {
  check_context(ctx);
  RunLog log;
  log_header(log, ctx, "fig4a");
  const SplitAssignment split = log_split(log, ctx);

  ExperimentResult res;
  res.preset = "fig4a";
  res.configs = sweep_configs(ctx, log, split);
  const auto [best, worst] = best_worst(res.configs);
  res.best_sensor = std::string(ctx.data->manifest[best].name);
  res.worst_sensor = std::string(ctx.data->manifest[worst].name);
  log.note("best sensor " + res.best_sensor + " mean_error=" +
           num(res.configs[best].mean_error) + ", worst sensor " +
           res.worst_sensor + " mean_error=" +
           num(res.configs[worst].mean_error));
  finish(ctx, log, res);
  return res;
}

ExperimentResult run_pair_studies(Context& ctx) {
  check_context(ctx);
  RunLog log;
  log_header(log, ctx, "fig4b");
  const SplitAssignment split = log_split(log, ctx);

  const auto sweep = sweep_configs(ctx, log, split);
  const auto [best, worst] = best_worst(sweep);
  const SensorInfo& bi = ctx.data->manifest[best];
  log.note("pairing against best sensor " + std::string(bi.name));

  ExperimentResult res;
  res.preset = "fig4b";
  res.best_sensor = bi.name;
  res.worst_sensor = ctx.data->manifest[worst].name;
  const std::string bname(bi.name);

  for (const SensorInfo& si : ctx.data->manifest) {
    if (si.id == bi.id) continue;
    res.configs.push_back(tune_channels(
        ctx, log, "pair:" + bname + "+" + std::string(si.name),
        {{Channel::sensor(bi.id), Channel::sensor(si.id)}}, split));
  }
  res.configs.push_back(tune_channels(
      ctx, log, "pair:" + bname + "+" + bname,
      {{Channel::sensor(bi.id), Channel::sensor(bi.id)}}, split));
  res.configs.push_back(tune_channels(
      ctx, log, "pair:" + bname + "+NOISE",
      {{Channel::sensor(bi.id), Channel::noise_row()}}, split));

  finish(ctx, log, res);
  return res;
}

ExperimentResult run_fusion_comparison(Context& ctx) {
  check_context(ctx);
  RunLog log;
  log_header(log, ctx, "fusion");
  const SplitAssignment split = log_split(log, ctx);

  const auto sweep = sweep_configs(ctx, log, split);
  const auto [best, worst] = best_worst(sweep);
  const SensorInfo& bi = ctx.data->manifest[best];
  const SensorInfo& wi = ctx.data->manifest[worst];
  const std::string bname(bi.name), wname(wi.name);
  log.note("fusion pair: best " + bname + ", worst " + wname);

  ExperimentResult res;
  res.preset = "fusion";
  res.best_sensor = bname;
  res.worst_sensor = wname;

  res.configs.push_back(tune_channels(
      ctx, log, "pair:" + bname + "+" + wname,
      {{Channel::sensor(bi.id), Channel::sensor(wi.id)}}, split));
  res.configs.push_back(tune_channels(
      ctx, log, "2l:" + bname + "+" + wname,
      {{Channel::sensor(bi.id)}, {Channel::sensor(wi.id)}}, split));

  finish(ctx, log, res);
  return res;
}

ExperimentResult run_all(Context& ctx) {
  check_context(ctx);
  TrialCache local;
  Context sub = ctx;
  if (sub.cache == nullptr) sub.cache = &local;

  ExperimentResult all;
  all.preset = "all";
  for (auto* fn : {&run_baseline_all, &run_cnn_all, &run_single_sensor_sweep,
                   &run_pair_studies, &run_fusion_comparison}) {
    const ExperimentResult r = (*fn)(sub);
    all.configs.insert(all.configs.end(), r.configs.begin(), r.configs.end());
    if (!r.best_sensor.empty()) {
      all.best_sensor = r.best_sensor;
      all.worst_sensor = r.worst_sensor;
    }
  }
  return all;
}

std::string env_text(const Context& ctx) {
  std::ostringstream o;
  o << "compiler: " << __VERSION__ << "\n";
  o << "kernels: " << kernels::active().name << "\n";
  o << "scale: " << ctx.scale.name << " grid=" << ctx.scale.grid
    << " trials=" << ctx.scale.n_trials << " repeats=" << ctx.scale.repeats
    << " epochs=" << ctx.scale.epochs << "\n";
  o << "master_seed: " << ctx.master_seed << "\n";
  o << "jobs: " << ctx.jobs << "\n";
  if (ctx.data) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(dataset_hash(*ctx.data)));
    o << "dataset: "
      << (ctx.data->provenance == Provenance::Real ? "real" : "synthetic")
      << " cycles=" << ctx.data->size()
      << " sensors=" << ctx.data->manifest.size() << " hash=" << hash << "\n";
  }
  return o.str();
}

}  // namespace cyclemon::experiments
