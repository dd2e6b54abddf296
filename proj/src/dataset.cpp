#include "cyclemon/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "cyclemon/error.hpp"
#include "cyclemon/rng.hpp"

namespace cyclemon {

namespace fs = std::filesystem;

const std::array<SensorInfo, kSensorCount>& sensor_manifest() {
  static const std::array<SensorInfo, kSensorCount> table = {{
      {SensorId::PS1, "PS1", 100, 6000},
      {SensorId::PS2, "PS2", 100, 6000},
      {SensorId::PS3, "PS3", 100, 6000},
      {SensorId::PS4, "PS4", 100, 6000},
      {SensorId::PS5, "PS5", 100, 6000},
      {SensorId::PS6, "PS6", 100, 6000},
      {SensorId::EPS1, "EPS1", 100, 6000},
      {SensorId::FS1, "FS1", 10, 600},
      {SensorId::FS2, "FS2", 10, 600},
      {SensorId::TS1, "TS1", 1, 60},
      {SensorId::TS2, "TS2", 1, 60},
      {SensorId::TS3, "TS3", 1, 60},
      {SensorId::TS4, "TS4", 1, 60},
      {SensorId::VS1, "VS1", 1, 60},
      {SensorId::CE, "CE", 1, 60},
      {SensorId::CP, "CP", 1, 60},
      {SensorId::SE, "SE", 1, 60},
  }};
  return table;
}

const SensorInfo& sensor_info(SensorId id) {
  return sensor_manifest()[static_cast<std::size_t>(id)];
}

SensorId sensor_from_name(std::string_view name) {
  for (const SensorInfo& s : sensor_manifest()) {
    if (name == s.name) return s.id;
  }
  raise_data("UnknownSensor", "no sensor named '" + std::string(name) + "'");
}

const char* class_name(AccumulatorClass c) {
  switch (c) {
    case AccumulatorClass::Optimal: return "Optimal";
    case AccumulatorClass::LightlyReduced: return "LightlyReduced";
    case AccumulatorClass::SeverelyReduced: return "SeverelyReduced";
    case AccumulatorClass::CloseToFailure: return "CloseToFailure";
  }
  return "?";
}

ClassLabeler::ClassLabeler(const std::vector<int>& bars) {
  std::set<int> distinct(bars.begin(), bars.end());
  if (distinct.size() != 4) {
    raise_data("UnknownSetpoint",
               "expected 4 distinct accumulator setpoints, found " +
                   std::to_string(distinct.size()));
  }
  std::size_t i = 0;
  for (auto it = distinct.rbegin(); it != distinct.rend(); ++it) {
    setpoints_[i++] = *it;
  }
}

AccumulatorClass ClassLabeler::label_class(int bar) const {
  for (std::size_t i = 0; i < 4; ++i) {
    if (setpoints_[i] == bar) return static_cast<AccumulatorClass>(i);
  }
  raise_data("UnknownSetpoint",
             std::to_string(bar) + " bar is not one of the profile setpoints");
}

bool DataSet::has_sensor(SensorId id) const {
  for (const SensorInfo& s : manifest)
    if (s.id == id) return true;
  return false;
}

std::size_t DataSet::manifest_index(SensorId id) const {
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (manifest[i].id == id) return i;
  raise_data("UnknownSensor", std::string("sensor ") + sensor_info(id).name +
                                  " is not in this dataset");
}

const std::vector<double>& DataSet::series(std::size_t cycle,
                                           SensorId id) const {
  return cycles.at(cycle).series[manifest_index(id)];
}

std::array<std::size_t, 4> DataSet::class_counts() const {
  std::array<std::size_t, 4> counts{};
  for (const CycleRecord& c : cycles)
    ++counts[static_cast<std::size_t>(c.target)];
  return counts;
}

namespace {

struct Token {
  const char* begin;
  const char* end;
  std::size_t row;  // 1-based
  std::size_t col;  // 1-based
};

// Splits a whole file into tab-separated tokens, row by row. CR is stripped
// and blank lines (including the trailing newline) are skipped.
template <class Fn>
void scan_table(const std::string& text, Fn&& on_row) {
  std::size_t pos = 0;
  std::size_t row = 0;
  std::vector<Token> tokens;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::size_t end = eol;
    if (end > pos && text[end - 1] == '\r') --end;
    ++row;
    if (end > pos) {
      tokens.clear();
      std::size_t tstart = pos;
      std::size_t col = 0;
      for (std::size_t i = pos; i <= end; ++i) {
        if (i == end || text[i] == '\t') {
          ++col;
          tokens.push_back({text.data() + tstart, text.data() + i, row, col});
          tstart = i + 1;
        }
      }
      on_row(tokens);
    }
    pos = eol + 1;
  }
}

std::string read_file(const fs::path& path, const char* sensor_label) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise_data("MissingSensorFile",
               std::string(sensor_label) + " (" + path.string() + ")");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

double parse_double(const Token& t, const std::string& fname) {
  const char* b = t.begin;
  const char* e = t.end;
  while (b < e && (*b == ' ')) ++b;
  while (e > b && (*(e - 1) == ' ')) --e;
  double v = 0.0;
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{} || res.ptr != e || !std::isfinite(v)) {
    raise_data("ParseError", fname + " row " + std::to_string(t.row) +
                                 " col " + std::to_string(t.col) +
                                 ": bad numeric token '" +
                                 std::string(t.begin, t.end) + "'");
  }
  return v;
}

int parse_int(const Token& t, const std::string& fname) {
  const char* b = t.begin;
  const char* e = t.end;
  while (b < e && (*b == ' ')) ++b;
  while (e > b && (*(e - 1) == ' ')) --e;
  int v = 0;
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{} || res.ptr != e) {
    raise_data("ParseError", fname + " row " + std::to_string(t.row) +
                                 " col " + std::to_string(t.col) +
                                 ": bad integer token '" +
                                 std::string(t.begin, t.end) + "'");
  }
  return v;
}

std::vector<std::vector<double>> read_sensor_file(const fs::path& dir,
                                                  const SensorInfo& info) {
  const fs::path path = dir / (std::string(info.name) + ".txt");
  const std::string text = read_file(path, info.name);
  const std::string fname = std::string(info.name) + ".txt";
  std::vector<std::vector<double>> rows;
  scan_table(text, [&](const std::vector<Token>& tokens) {
    if (tokens.size() != info.samples) {
      raise_data("LengthMismatch",
                 std::string(info.name) + ": expected " +
                     std::to_string(info.samples) + " samples per row, got " +
                     std::to_string(tokens.size()) + " in row " +
                     std::to_string(tokens.empty() ? 0 : tokens[0].row));
    }
    std::vector<double> vals(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i)
      vals[i] = parse_double(tokens[i], fname);
    rows.push_back(std::move(vals));
  });
  return rows;
}

}  // namespace

DataSet load_dataset(const fs::path& dir) {
  const std::string profile_text = read_file(dir / "profile.txt", "profile");
  std::vector<ConditionProfile> profiles;
  scan_table(profile_text, [&](const std::vector<Token>& tokens) {
    if (tokens.size() != 5) {
      raise_data("ParseError", "profile.txt row " +
                                   std::to_string(tokens.empty() ? 0 : tokens[0].row) +
                                   ": expected 5 columns, got " +
                                   std::to_string(tokens.size()));
    }
    ConditionProfile p;
    p.cooler_pct = parse_int(tokens[0], "profile.txt");
    p.valve_pct = parse_int(tokens[1], "profile.txt");
    p.pump_leak = parse_int(tokens[2], "profile.txt");
    p.accumulator_bar = parse_int(tokens[3], "profile.txt");
    p.stable_flag = parse_int(tokens[4], "profile.txt");
    profiles.push_back(p);
  });
  const std::size_t n = profiles.size();

  DataSet ds;
  ds.provenance = Provenance::Real;
  ds.manifest.assign(sensor_manifest().begin(), sensor_manifest().end());
  ds.cycles.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    ds.cycles[c].index = c;
    ds.cycles[c].profile = profiles[c];
    ds.cycles[c].series.resize(kSensorCount);
  }

  for (std::size_t s = 0; s < kSensorCount; ++s) {
    auto rows = read_sensor_file(dir, ds.manifest[s]);
    if (rows.size() != n) {
      raise_data("InconsistentCycleCount",
                 std::string(ds.manifest[s].name) + " has " +
                     std::to_string(rows.size()) + " rows, profile has " +
                     std::to_string(n));
    }
    for (std::size_t c = 0; c < n; ++c)
      ds.cycles[c].series[s] = std::move(rows[c]);
  }

  std::vector<int> bars(n);
  for (std::size_t c = 0; c < n; ++c) bars[c] = profiles[c].accumulator_bar;
  const ClassLabeler labeler(bars);
  ds.setpoints = labeler.setpoints();
  for (std::size_t c = 0; c < n; ++c)
    ds.cycles[c].target = labeler.label_class(profiles[c].accumulator_bar);
  return ds;
}

void save_dataset(const DataSet& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  char buf[64];

  for (std::size_t s = 0; s < ds.manifest.size(); ++s) {
    const fs::path path = dir / (std::string(ds.manifest[s].name) + ".txt");
    std::ofstream out(path, std::ios::binary);
    if (!out) raise_data("IoError", "cannot write " + path.string());
    for (const CycleRecord& c : ds.cycles) {
      const std::vector<double>& v = c.series[s];
      for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        if (i) out.put('\t');
        out << buf;
      }
      out.put('\n');
    }
    if (!out) raise_data("IoError", "short write to " + path.string());
  }

  const fs::path ppath = dir / "profile.txt";
  std::ofstream out(ppath, std::ios::binary);
  if (!out) raise_data("IoError", "cannot write " + ppath.string());
  for (const CycleRecord& c : ds.cycles) {
    out << c.profile.cooler_pct << '\t' << c.profile.valve_pct << '\t'
        << c.profile.pump_leak << '\t' << c.profile.accumulator_bar << '\t'
        << c.profile.stable_flag << '\n';
  }
  if (!out) raise_data("IoError", "short write to " + ppath.string());
}

SyntheticSpec SyntheticSpec::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise_data("MissingSensorFile", "spec file " + path.string());
  SyntheticSpec spec;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t"));
    if (trimmed.empty() || trimmed[0] == '#') continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      raise_data("ParseError", path.filename().string() + " line " +
                                   std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trimmed.substr(0, eq);
    std::string val = trimmed.substr(eq + 1);
    auto strip = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
    };
    strip(key);
    strip(val);
    try {
      if (key == "cycles") spec.cycles = std::stoull(val);
      else if (key == "sensors") spec.sensors = std::stoull(val);
      else if (key == "informative_sensors") spec.informative_sensors = std::stoull(val);
      else if (key == "amplitude") spec.amplitude = std::stod(val);
      else if (key == "noise_sigma") spec.noise_sigma = std::stod(val);
      else if (key == "seed") spec.seed = std::stoull(val);
      else {
        raise_data("ParseError", path.filename().string() + " line " +
                                     std::to_string(lineno) + ": unknown key '" +
                                     key + "'");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      raise_data("ParseError", path.filename().string() + " line " +
                                   std::to_string(lineno) + ": bad value '" +
                                   val + "'");
    }
  }
  return spec;
}

DataSet generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.cycles == 0) raise_data("InvalidSpec", "cycles must be positive");
  if (spec.sensors == 0 || spec.sensors > kSensorCount)
    raise_data("InvalidSpec", "sensors must be in [1, 17]");
  if (spec.informative_sensors > spec.sensors)
    raise_data("InvalidSpec", "informative_sensors exceeds sensors");
  if (spec.amplitude < 0.0 || spec.noise_sigma < 0.0)
    raise_data("InvalidSpec", "amplitude and noise_sigma must be >= 0");

  static constexpr std::array<int, 4> kBars = {130, 115, 100, 90};
  constexpr double kTwoPi = 6.283185307179586476925286766559;

  DataSet ds;
  ds.provenance = Provenance::Synthetic;
  ds.manifest.assign(sensor_manifest().begin(),
                     sensor_manifest().begin() + spec.sensors);
  ds.setpoints = kBars;
  ds.cycles.resize(spec.cycles);

  for (std::size_t c = 0; c < spec.cycles; ++c) {
    CycleRecord& rec = ds.cycles[c];
    rec.index = c;
    const int cls = static_cast<int>(c % 4);
    rec.target = static_cast<AccumulatorClass>(cls);
    rec.profile = {100, 100, 0, kBars[static_cast<std::size_t>(cls)], 1};
    rec.series.resize(spec.sensors);
    for (std::size_t s = 0; s < spec.sensors; ++s) {
      const std::size_t len = ds.manifest[s].samples;
      Rng rng = Rng::stream(seed, Stream::Synthetic, s, c);
      std::vector<double>& v = rec.series[s];
      v.resize(len);
      if (s < spec.informative_sensors) {
        const double lift = spec.amplitude * cls;
        for (std::size_t t = 0; t < len; ++t) {
          const double phase = static_cast<double>(t) / static_cast<double>(len);
          const double tmpl =
              std::sin(kTwoPi * phase) + 0.5 * std::sin(3.0 * kTwoPi * phase + 1.0);
          v[t] = (1.0 + lift) * tmpl + lift + spec.noise_sigma * rng.normal();
        }
      } else {
        for (std::size_t t = 0; t < len; ++t) v[t] = rng.normal();
      }
    }
  }
  return ds;
}

la::Matrix noise_channel(std::size_t n_cycles, std::size_t length,
                         std::uint64_t seed) {
  if (n_cycles == 0 || length == 0)
    raise_data("InvalidSpec", "noise_channel sizes must be positive");
  la::Matrix m(n_cycles, length);
  for (std::size_t r = 0; r < n_cycles; ++r) {
    Rng rng = Rng::stream(seed, Stream::Noise, r);
    for (std::size_t j = 0; j < length; ++j) m(r, j) = rng.uniform();
  }
  return m;
}

namespace {

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void i32(int v) { bytes(&v, sizeof v); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
};

}  // namespace

std::uint64_t dataset_hash(const DataSet& ds) {
  Fnv f;
  f.i32(static_cast<int>(ds.provenance));
  for (const SensorInfo& s : ds.manifest) {
    f.i32(static_cast<int>(s.id));
    f.i32(s.rate_hz);
    f.u64(s.samples);
  }
  for (int sp : ds.setpoints) f.i32(sp);
  for (const CycleRecord& c : ds.cycles) {
    f.i32(c.profile.cooler_pct);
    f.i32(c.profile.valve_pct);
    f.i32(c.profile.pump_leak);
    f.i32(c.profile.accumulator_bar);
    f.i32(c.profile.stable_flag);
    f.i32(static_cast<int>(c.target));
    for (const std::vector<double>& v : c.series) {
      f.u64(v.size());
      for (double x : v) f.f64(x);
    }
  }
  return f.h;
}

}  // namespace cyclemon
