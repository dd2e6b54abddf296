#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cyclemon/linalg.hpp"

namespace cyclemon {

// The 17 sensors of the hydraulic testbed. Order here fixes the canonical
// sensor order everywhere (manifests, feature layouts, sweeps).
enum class SensorId : int {
  PS1, PS2, PS3, PS4, PS5, PS6,
  EPS1,
  FS1, FS2,
  TS1, TS2, TS3, TS4,
  VS1,
  CE, CP, SE,
};

inline constexpr std::size_t kSensorCount = 17;

struct SensorInfo {
  SensorId id;
  const char* name;
  int rate_hz;          // native sampling rate
  std::size_t samples;  // samples per 60 s cycle == rate * 60
};

const std::array<SensorInfo, kSensorCount>& sensor_manifest();
const SensorInfo& sensor_info(SensorId id);
SensorId sensor_from_name(std::string_view name);

enum class AccumulatorClass : int {
  Optimal = 0,
  LightlyReduced = 1,
  SeverelyReduced = 2,
  CloseToFailure = 3,
};

const char* class_name(AccumulatorClass c);

struct ConditionProfile {
  int cooler_pct = 0;
  int valve_pct = 0;
  int pump_leak = 0;
  int accumulator_bar = 0;
  int stable_flag = 0;
};

struct CycleRecord {
  std::size_t index = 0;
  // Parallel to the owning DataSet's manifest.
  std::vector<std::vector<double>> series;
  ConditionProfile profile;
  AccumulatorClass target = AccumulatorClass::Optimal;
};

enum class Provenance { Real, Synthetic };

// Maps accumulator pre-charge pressures onto the 4 classes by rank: the
// setpoints are read from the profile data, never hard-coded.
class ClassLabeler {
public:
  explicit ClassLabeler(const std::vector<int>& bars);
  AccumulatorClass label_class(int bar) const;
  const std::array<int, 4>& setpoints() const { return setpoints_; }

private:
  std::array<int, 4> setpoints_{};  // descending; [0] -> Optimal
};

struct DataSet {
  std::vector<SensorInfo> manifest;
  std::vector<CycleRecord> cycles;
  std::array<int, 4> setpoints{};
  Provenance provenance = Provenance::Real;

  std::size_t size() const { return cycles.size(); }
  bool has_sensor(SensorId id) const;
  std::size_t manifest_index(SensorId id) const;  // UnknownSensor when absent
  const std::vector<double>& series(std::size_t cycle, SensorId id) const;
  std::array<std::size_t, 4> class_counts() const;
};

// Directory layout: one `<SENSOR>.txt` per sensor (tab-separated, one row per
// cycle, one column per native sample) plus `profile.txt` with five integer
// columns: cooler, valve, pump leakage, accumulator bar, stable flag.
DataSet load_dataset(const std::filesystem::path& dir);
void save_dataset(const DataSet& ds, const std::filesystem::path& dir);

struct SyntheticSpec {
  std::size_t cycles = 0;
  std::size_t sensors = 0;
  std::size_t informative_sensors = 1;
  double amplitude = 1.0;
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;

  // Flat key=value file with exactly these field names.
  static SyntheticSpec from_file(const std::filesystem::path& path);
};

DataSet generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// i.i.d. U[0,1) rows, one per cycle; row i depends only on (seed, i).
la::Matrix noise_channel(std::size_t n_cycles, std::size_t length,
                         std::uint64_t seed);

std::uint64_t dataset_hash(const DataSet& ds);

}  // namespace cyclemon
