#pragma once

// Scenario files, synthetic cities and demand, and Q-value export.
//
// A scenario directory holds
//   graph.json    {"nodes": [id...], "roads": [{"id","from","to","length_m"}],
//                  "coordinates": {"<node id>": [x, y]}}   (coordinates optional)
//   calls.csv     start_road,end_road,start_time,duration,price
//   drivers.csv   t,total          one row per step, t = 0, 1, ... (sets the horizon)
//   speeds.csv    t,road,speed     '*' matches every step / road; later rows win
//   initial.csv   road,idle        optional; defaults to drivers at t = 0 spread evenly

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fleetgnn/rng.hpp"
#include "fleetgnn/roadnet.hpp"
#include "fleetgnn/scenario.hpp"

namespace fleetgnn {

inline constexpr double kDefaultSpeed = 500.0;  // meters per step

enum class ScenarioErrorKind { Io, Parse, DanglingIndex, SeriesTooShort, Invalid };

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(ScenarioErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ScenarioErrorKind kind() const { return kind_; }

 private:
  ScenarioErrorKind kind_;
};

using Coordinates = std::map<NodeId, std::array<double, 2>>;

struct ScenarioFiles {
  std::filesystem::path graph;
  std::filesystem::path calls;
  std::filesystem::path drivers;
  std::filesystem::path speeds;
  std::optional<std::filesystem::path> initial;

  /// Standard file names inside `dir`; initial.csv is used when present.
  static ScenarioFiles in_directory(const std::filesystem::path& dir) {
    ScenarioFiles f{dir / "graph.json", dir / "calls.csv", dir / "drivers.csv", dir / "speeds.csv",
                    std::nullopt};
    if (std::filesystem::exists(dir / "initial.csv")) f.initial = dir / "initial.csv";
    return f;
  }
};

struct LoadedScenario {
  RoadNetwork network;
  Scenario scenario;
  Coordinates coordinates;
};

namespace io_detail {

inline std::string where(const std::filesystem::path& p, std::size_t line) {
  return p.string() + ":" + std::to_string(line);
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ScenarioError(ScenarioErrorKind::Io, "cannot open " + p.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw ScenarioError(ScenarioErrorKind::Io, "cannot write " + p.string());
  out.precision(17);
  return out;
}

struct CsvRow {
  std::size_t line;
  std::vector<std::string> fields;
};

/// Rows after the header; blank lines and '#' comments are skipped.
inline std::vector<CsvRow> read_csv(const std::filesystem::path& p, std::size_t columns) {
  auto in = open_in(p);
  std::vector<CsvRow> rows;
  std::string line;
  std::size_t n = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    CsvRow row{n, {}};
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.fields.push_back(field);
    if (row.fields.size() != columns) {
      throw ScenarioError(ScenarioErrorKind::Parse, where(p, n) + ": expected " +
                                                        std::to_string(columns) + " fields");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline long to_long(const std::string& s, const std::filesystem::path& p, std::size_t line) {
  try {
    std::size_t used = 0;
    long v = std::stol(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ScenarioError(ScenarioErrorKind::Parse, where(p, line) + ": '" + s + "' is not an integer");
}

inline double to_double(const std::string& s, const std::filesystem::path& p, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ScenarioError(ScenarioErrorKind::Parse, where(p, line) + ": '" + s + "' is not a number");
}

inline RoadId to_road(const std::string& s, std::size_t roads, const std::filesystem::path& p,
                      std::size_t line, const std::string& what) {
  const long v = to_long(s, p, line);
  if (v < 0 || static_cast<std::size_t>(v) >= roads) {
    throw ScenarioError(ScenarioErrorKind::DanglingIndex,
                        where(p, line) + ": " + what + " " + s + " is not a road (have " +
                            std::to_string(roads) + ")");
  }
  return static_cast<RoadId>(v);
}

}  // namespace io_detail

inline std::pair<RoadNetwork, Coordinates> load_graph(const std::filesystem::path& path) {
  auto in = io_detail::open_in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(ScenarioErrorKind::Parse, path.string() + ": " + e.what());
  }
  RoadNetwork net;
  Coordinates coords;
  try {
    for (const auto& n : j.at("nodes")) net.intersections.push_back(n.get<NodeId>());
    for (const auto& r : j.at("roads")) {
      net.roads.push_back({r.at("id").get<RoadId>(), r.at("from").get<NodeId>(),
                           r.at("to").get<NodeId>(), r.at("length_m").get<double>()});
    }
    if (j.contains("coordinates")) {
      for (const auto& [k, v] : j.at("coordinates").items()) {
        coords[std::stoll(k)] = {v.at(0).get<double>(), v.at(1).get<double>()};
      }
    }
  } catch (const std::exception& e) {
    throw ScenarioError(ScenarioErrorKind::Parse, path.string() + ": " + e.what());
  }
  std::sort(net.roads.begin(), net.roads.end(), [](const Road& a, const Road& b) { return a.id < b.id; });
  for (const auto& v : validate(net)) {
    const auto kind = v.kind == ViolationKind::DanglingNode ? ScenarioErrorKind::DanglingIndex
                                                            : ScenarioErrorKind::Invalid;
    throw ScenarioError(kind, path.string() + ": " + v.message);
  }
  return {std::move(net), std::move(coords)};
}

inline LoadedScenario load_scenario(const ScenarioFiles& files) {
  using namespace io_detail;
  LoadedScenario out;
  std::tie(out.network, out.coordinates) = load_graph(files.graph);
  const std::size_t roads = out.network.road_count();
  Scenario& s = out.scenario;

  for (const auto& row : read_csv(files.drivers, 2)) {
    const long t = to_long(row.fields[0], files.drivers, row.line);
    if (t != static_cast<long>(s.total_drivers_series.size())) {
      throw ScenarioError(ScenarioErrorKind::Parse,
                          where(files.drivers, row.line) + ": expected t = " +
                              std::to_string(s.total_drivers_series.size()));
    }
    const long total = to_long(row.fields[1], files.drivers, row.line);
    if (total < 0) throw ScenarioError(ScenarioErrorKind::Parse, where(files.drivers, row.line) + ": negative total");
    s.total_drivers_series.push_back(total);
  }
  if (s.total_drivers_series.empty()) {
    throw ScenarioError(ScenarioErrorKind::SeriesTooShort, files.drivers.string() + ": no driver counts");
  }
  const long horizon = s.horizon();

  for (const auto& row : read_csv(files.calls, 5)) {
    CallRecord c;
    c.start_road = to_road(row.fields[0], roads, files.calls, row.line, "start_road");
    c.end_road = to_road(row.fields[1], roads, files.calls, row.line, "end_road");
    c.start_time = to_long(row.fields[2], files.calls, row.line);
    c.duration = to_long(row.fields[3], files.calls, row.line);
    c.price = to_double(row.fields[4], files.calls, row.line);
    if (c.duration < 1 || c.start_time < 0 || c.price < 0.0) {
      throw ScenarioError(ScenarioErrorKind::Parse, where(files.calls, row.line) + ": invalid call fields");
    }
    if (c.start_time >= horizon) {
      throw ScenarioError(ScenarioErrorKind::SeriesTooShort,
                          where(files.calls, row.line) + ": call starts at " +
                              std::to_string(c.start_time) + " beyond the " +
                              std::to_string(horizon) + "-step driver series");
    }
    s.calls.push_back(c);
  }

  const auto speed_rows = read_csv(files.speeds, 3);
  double default_speed = kDefaultSpeed;
  for (const auto& row : speed_rows) {
    if (row.fields[0] == "*" && row.fields[1] == "*") default_speed = to_double(row.fields[2], files.speeds, row.line);
  }
  s.speeds = SpeedTable(static_cast<std::size_t>(horizon), roads, default_speed);
  for (const auto& row : speed_rows) {
    const double v = to_double(row.fields[2], files.speeds, row.line);
    if (!(v > 0.0)) throw ScenarioError(ScenarioErrorKind::Parse, where(files.speeds, row.line) + ": speed must be positive");
    const bool any_t = row.fields[0] == "*", any_road = row.fields[1] == "*";
    long t0 = 0, t1 = horizon - 1;
    if (!any_t) {
      t0 = t1 = to_long(row.fields[0], files.speeds, row.line);
      if (t0 < 0) throw ScenarioError(ScenarioErrorKind::Parse, where(files.speeds, row.line) + ": negative step");
      if (t0 >= horizon) {
        throw ScenarioError(ScenarioErrorKind::SeriesTooShort,
                            where(files.speeds, row.line) + ": step beyond the driver series");
      }
    }
    RoadId r0 = 0, r1 = roads - 1;
    if (!any_road) r0 = r1 = to_road(row.fields[1], roads, files.speeds, row.line, "road");
    for (long t = t0; t <= t1; ++t)
      for (RoadId r = r0; r <= r1; ++r) s.speeds.set(t, r, v);
  }

  s.initial_idle_per_road.assign(roads, 0);
  if (files.initial) {
    for (const auto& row : read_csv(*files.initial, 2)) {
      const RoadId r = to_road(row.fields[0], roads, *files.initial, row.line, "road");
      const long n = to_long(row.fields[1], *files.initial, row.line);
      if (n < 0) throw ScenarioError(ScenarioErrorKind::Parse, where(*files.initial, row.line) + ": negative count");
      s.initial_idle_per_road[r] = n;
    }
  } else {
    const long total = s.total_drivers_series.front();
    for (RoadId r = 0; r < roads; ++r) {
      s.initial_idle_per_road[r] = total / static_cast<long>(roads) +
                                   (static_cast<long>(r) < total % static_cast<long>(roads) ? 1 : 0);
    }
  }
  return out;
}

inline void save_graph(const std::filesystem::path& path, const RoadNetwork& network,
                       const Coordinates& coords = {}) {
  nlohmann::json j;
  j["nodes"] = network.intersections;
  j["roads"] = nlohmann::json::array();
  for (const Road& r : network.roads) {
    j["roads"].push_back({{"id", r.id}, {"from", r.from}, {"to", r.to}, {"length_m", r.length_m}});
  }
  if (!coords.empty()) {
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [node, xy] : coords) c[std::to_string(node)] = {xy[0], xy[1]};
    j["coordinates"] = c;
  }
  io_detail::open_out(path) << j.dump(1) << '\n';
}

/// Writes the standard scenario directory layout (including initial.csv).
inline void save_scenario(const std::filesystem::path& dir, const RoadNetwork& network,
                          const Scenario& s, const Coordinates& coords = {}) {
  save_graph(dir / "graph.json", network, coords);
  {
    auto out = io_detail::open_out(dir / "calls.csv");
    out << "start_road,end_road,start_time,duration,price\n";
    for (const auto& c : s.calls) {
      out << c.start_road << ',' << c.end_road << ',' << c.start_time << ',' << c.duration << ','
          << c.price << '\n';
    }
  }
  {
    auto out = io_detail::open_out(dir / "drivers.csv");
    out << "t,total\n";
    for (std::size_t t = 0; t < s.total_drivers_series.size(); ++t) {
      out << t << ',' << s.total_drivers_series[t] << '\n';
    }
  }
  {
    auto out = io_detail::open_out(dir / "speeds.csv");
    out << "t,road,speed\n";
    const double d = s.speeds.default_speed();
    out << "*,*," << d << '\n';
    for (RoadId r = 0; r < s.speeds.roads(); ++r) {
      const double first = s.speeds.at(0, r);
      bool constant = true;
      for (std::size_t t = 1; t < s.speeds.steps() && constant; ++t) {
        constant = s.speeds.at(static_cast<long>(t), r) == first;
      }
      if (constant) {
        if (first != d) out << "*," << r << ',' << first << '\n';
        continue;
      }
      for (std::size_t t = 0; t < s.speeds.steps(); ++t) {
        const double v = s.speeds.at(static_cast<long>(t), r);
        if (v != d) out << t << ',' << r << ',' << v << '\n';
      }
    }
  }
  {
    auto out = io_detail::open_out(dir / "initial.csv");
    out << "road,idle\n";
    for (std::size_t r = 0; r < s.initial_idle_per_road.size(); ++r) {
      out << r << ',' << s.initial_idle_per_road[r] << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Synthetic data

struct CityParams {
  std::size_t roads = 50;
  double length_min = 300.0;
  double length_max = 900.0;
  std::uint64_t seed = 0;
};

/// Strongly connected test city: a two-way ring over ~0.4 * roads
/// intersections plus random one-way chords until `roads` roads exist.
inline std::pair<RoadNetwork, Coordinates> make_synthetic_city(const CityParams& p) {
  if (p.roads == 0) throw std::invalid_argument("a city needs at least one road");
  Rng rng(derive_seed(p.seed, 1));
  RoadNetwork net;
  Coordinates coords;
  auto add_road = [&](NodeId a, NodeId b) {
    const double len = p.length_min + (p.length_max - p.length_min) * uniform01(rng);
    net.roads.push_back({net.roads.size(), a, b, len});
  };
  const bool small = p.roads < 4;
  const std::size_t n = small ? p.roads : std::max<std::size_t>(2, p.roads * 2 / 5);
  for (std::size_t i = 0; i < n; ++i) {
    net.intersections.push_back(static_cast<NodeId>(i));
    const double angle = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
    coords[static_cast<NodeId>(i)] = {1000.0 * std::cos(angle), 1000.0 * std::sin(angle)};
  }
  if (small) {
    for (std::size_t i = 0; i < n; ++i) add_road(static_cast<NodeId>(i), static_cast<NodeId>((i + 1) % n));
    return {std::move(net), std::move(coords)};
  }
  std::set<std::pair<NodeId, NodeId>> used;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = static_cast<NodeId>(i), b = static_cast<NodeId>((i + 1) % n);
    add_road(a, b);
    add_road(b, a);
    used.insert({a, b});
    used.insert({b, a});
  }
  while (net.roads.size() < p.roads) {
    const auto a = static_cast<NodeId>(uniform_index(rng, n));
    const auto b = static_cast<NodeId>(uniform_index(rng, n));
    if (a == b || used.contains({a, b})) {
      if (used.size() >= n * (n - 1)) add_road(a, (a + 1) % static_cast<NodeId>(n));  // saturated: parallel road
      continue;
    }
    used.insert({a, b});
    add_road(a, b);
  }
  return {std::move(net), std::move(coords)};
}

struct SynthParams {
  long horizon = 1440;
  double mean_calls_per_step = 0.1;  // per road, before profile and hotspot boost
  double hotspot_fraction = 0.2;
  double hotspot_boost = 3.0;
  std::vector<double> demand_daily_profile;  // per-step multipliers, cycled; empty = flat
  long duration_min = 5;
  long duration_max = 20;
  long driver_base = 100;
  double speed_min = 300.0;
  double speed_max = 600.0;
  std::uint64_t seed = 0;

  void check() const {
    if (horizon < 1) throw std::invalid_argument("horizon must be at least one step");
    if (mean_calls_per_step < 0.0) throw std::invalid_argument("call rate must be non-negative");
    if (hotspot_boost < 1.0) throw std::invalid_argument("hotspot boost must be at least 1");
    if (hotspot_fraction < 0.0 || hotspot_fraction > 1.0) throw std::invalid_argument("hotspot fraction must lie in [0, 1]");
    if (duration_min < 1 || duration_max < duration_min) throw std::invalid_argument("bad duration range");
    if (driver_base < 0) throw std::invalid_argument("driver base must be non-negative");
    if (!(speed_min > 0.0) || speed_max < speed_min) throw std::invalid_argument("bad speed range");
    for (double m : demand_daily_profile)
      if (m < 0.0) throw std::invalid_argument("profile multipliers must be non-negative");
  }
  double profile(long t) const {
    if (demand_daily_profile.empty()) return 1.0;
    return demand_daily_profile[static_cast<std::size_t>(t) % demand_daily_profile.size()];
  }
};

namespace io_detail {

// Knuth's multiplication method; rates here are small.
inline long poisson(Rng& rng, double lambda) {
  if (lambda <= 0.0) return 0;
  const double limit = std::exp(-lambda);
  long k = 0;
  double prod = uniform01(rng);
  while (prod > limit) {
    ++k;
    prod *= uniform01(rng);
  }
  return k;
}

}  // namespace io_detail

/// Roads whose call rate is boosted in generate_synthetic.
inline std::vector<RoadId> hotspot_roads(std::size_t roads, const SynthParams& p) {
  std::vector<RoadId> ids(roads);
  for (RoadId r = 0; r < roads; ++r) ids[r] = r;
  Rng rng(derive_seed(p.seed, 2));
  for (std::size_t i = roads; i > 1; --i) std::swap(ids[i - 1], ids[uniform_index(rng, i)]);
  ids.resize(static_cast<std::size_t>(std::ceil(p.hotspot_fraction * static_cast<double>(roads) - 1e-9)));
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline Scenario generate_synthetic(const RoadNetwork& network, const SynthParams& p) {
  require_valid(network);
  p.check();
  const std::size_t roads = network.road_count();
  Scenario s;

  std::vector<double> boost(roads, 1.0);
  for (RoadId r : hotspot_roads(roads, p)) boost[r] = p.hotspot_boost;

  Rng call_rng(derive_seed(p.seed, 3));
  for (long t = 0; t < p.horizon; ++t) {
    for (RoadId r = 0; r < roads; ++r) {
      const long n = io_detail::poisson(call_rng, p.mean_calls_per_step * p.profile(t) * boost[r]);
      for (long k = 0; k < n; ++k) {
        CallRecord c;
        c.start_road = r;
        c.end_road = uniform_index(call_rng, roads);
        c.start_time = t;
        c.duration = uniform_int(call_rng, p.duration_min, p.duration_max);
        c.price = static_cast<double>(c.duration);
        s.calls.push_back(c);
      }
    }
  }

  for (long t = 0; t < p.horizon; ++t) {
    s.total_drivers_series.push_back(
        static_cast<long>(std::floor(static_cast<double>(p.driver_base) * p.profile(t) + 1e-9)));
  }
  Rng driver_rng(derive_seed(p.seed, 4));
  s.initial_idle_per_road.assign(roads, 0);
  for (long k = 0; k < s.total_drivers_series.front(); ++k) {
    ++s.initial_idle_per_road[uniform_index(driver_rng, roads)];
  }

  Rng speed_rng(derive_seed(p.seed, 5));
  s.speeds = SpeedTable(static_cast<std::size_t>(p.horizon), roads, p.speed_min);
  for (RoadId r = 0; r < roads; ++r) {
    const double v = p.speed_min + (p.speed_max - p.speed_min) * uniform01(speed_rng);
    for (long t = 0; t < p.horizon; ++t) s.speeds.set(t, r, v);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Q export

/// GeoJSON FeatureCollection with one feature per road carrying its Q value.
/// Geometry is a LineString when both end nodes have coordinates, else null.
/// Values outside (0, 1) are written as given and flagged.
inline nlohmann::json q_feature_collection(const RoadNetwork& network, const std::vector<double>& q,
                                           const Coordinates& coords = {}) {
  if (q.size() != network.road_count()) {
    throw std::invalid_argument("export_q: " + std::to_string(q.size()) + " values for " +
                                std::to_string(network.road_count()) + " roads");
  }
  nlohmann::json fc = {{"type", "FeatureCollection"}, {"features", nlohmann::json::array()}};
  for (const Road& r : network.roads) {
    nlohmann::json geometry = nullptr;
    auto a = coords.find(r.from), b = coords.find(r.to);
    if (a != coords.end() && b != coords.end()) {
      geometry = {{"type", "LineString"},
                  {"coordinates", {{a->second[0], a->second[1]}, {b->second[0], b->second[1]}}}};
    }
    const double v = q[r.id];
    fc["features"].push_back({{"type", "Feature"},
                              {"geometry", geometry},
                              {"properties",
                               {{"road_id", r.id},
                                {"from", r.from},
                                {"to", r.to},
                                {"q", v},
                                {"q_out_of_range", !(v > 0.0 && v < 1.0)}}}});
  }
  return fc;
}

inline void export_q(const RoadNetwork& network, const std::vector<double>& q,
                     const std::filesystem::path& path, const Coordinates& coords = {}) {
  const auto fc = q_feature_collection(network, q, coords);
  io_detail::open_out(path) << fc.dump(1) << '\n';
}

}  // namespace fleetgnn
