// fleetgnn: generate scenarios, train and evaluate fleet policies, run the
// two-road toy sweep and export Q maps.
//
// Exit codes: 0 success, 2 usage, 3 bad input data, 4 runtime failure.
// Log level comes from SPDLOG_LEVEL (e.g. SPDLOG_LEVEL=debug).

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "fleetgnn/checkpoint.hpp"
#include "fleetgnn/marl.hpp"
#include "fleetgnn/scenario_io.hpp"
#include "fleetgnn/toylab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fleetgnn;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kRuntime = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string joined_argv(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

void print_config(const std::string& command, const json& cfg) {
  std::cout << "# " << command << " config " << cfg.dump() << '\n';
}

// ---------------------------------------------------------------------------

struct ScenarioArgs {
  std::string dir;
  std::string graph;  // overrides <dir>/graph.json
  double driver_scale = 1.0;
  long expiry = 10;

  void add(CLI::App* app, bool scale = true) {
    app->add_option("--scenario-dir", dir, "Scenario directory")->required()->check(CLI::ExistingDirectory);
    app->add_option("--graph", graph, "Graph JSON (default <scenario-dir>/graph.json)")->check(CLI::ExistingFile);
    if (scale) {
      app->add_option("--driver-scale", driver_scale, "Fraction of drivers kept")
          ->check(CLI::Range(0.0, 1e6));
    }
    app->add_option("--order-expiry", expiry, "Steps an unserved order stays open")->check(CLI::NonNegativeNumber);
  }

  LoadedScenario load() const {
    auto files = ScenarioFiles::in_directory(dir);
    if (!graph.empty()) files.graph = graph;
    try {
      return load_scenario(files);
    } catch (const ScenarioError& e) {
      throw DataError(e.what());
    }
  }

  json to_json() const {
    return {{"scenario_dir", dir}, {"graph", graph.empty() ? (fs::path(dir) / "graph.json").string() : graph},
            {"driver_scale", driver_scale}, {"order_expiry", expiry}};
  }
};

Checkpoint read_checkpoint(const std::string& path) {
  try {
    return load_checkpoint(path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

PolicyKind policy_of(const Checkpoint& ck) {
  try {
    return parse_policy_kind(ck.meta.at("policy").get<std::string>(), ck.meta.value("beta", 1.0),
                             ck.meta.value("epsilon", 0.0));
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  }
}

FeatureScale features_of(const Checkpoint& ck, const Scenario& s) {
  FeatureScale f = feature_scale_for(s);
  if (ck.meta.contains("count_scale")) f.count_scale = ck.meta["count_scale"].get<double>();
  if (ck.meta.contains("max_speed")) f.max_speed = ck.meta["max_speed"].get<double>();
  return f;
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  CityParams city;
  SynthParams synth;
  std::string out;
};

void setup_gen(CLI::App& root, GenArgs& a) {
  auto* c = root.add_subcommand("gen", "Generate a synthetic city and scenario");
  c->add_option("--roads", a.city.roads, "Number of roads")->check(CLI::PositiveNumber);
  c->add_option("--length-min", a.city.length_min, "Shortest road, meters")->check(CLI::PositiveNumber);
  c->add_option("--length-max", a.city.length_max, "Longest road, meters")->check(CLI::PositiveNumber);
  c->add_option("--steps", a.synth.horizon, "Horizon in steps")->check(CLI::PositiveNumber);
  c->add_option("--rate", a.synth.mean_calls_per_step, "Mean calls per road per step")
      ->check(CLI::NonNegativeNumber);
  c->add_option("--hotspot-fraction", a.synth.hotspot_fraction, "Fraction of boosted roads")
      ->check(CLI::Range(0.0, 1.0));
  c->add_option("--hotspot-boost", a.synth.hotspot_boost, "Rate multiplier on hotspots")
      ->check(CLI::Range(1.0, 1e9));
  c->add_option("--profile", a.synth.demand_daily_profile, "Per-step demand multipliers, cycled");
  c->add_option("--duration-min", a.synth.duration_min, "Shortest trip, steps")->check(CLI::PositiveNumber);
  c->add_option("--duration-max", a.synth.duration_max, "Longest trip, steps")->check(CLI::PositiveNumber);
  c->add_option("--drivers", a.synth.driver_base, "Fleet size before profile scaling")
      ->check(CLI::NonNegativeNumber);
  c->add_option("--speed-min", a.synth.speed_min, "Slowest road, meters per step")->check(CLI::PositiveNumber);
  c->add_option("--speed-max", a.synth.speed_max, "Fastest road, meters per step")->check(CLI::PositiveNumber);
  c->add_option("--seed", a.city.seed, "Random seed");
  c->add_option("--out", a.out, "Output directory")->required();
}

int run_gen(GenArgs& a) {
  a.synth.seed = a.city.seed;
  if (a.city.length_max < a.city.length_min) throw UsageError("--length-max is below --length-min");
  try {
    a.synth.check();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  print_config("gen", {{"roads", a.city.roads},
                       {"length_m", {a.city.length_min, a.city.length_max}},
                       {"steps", a.synth.horizon},
                       {"rate", a.synth.mean_calls_per_step},
                       {"hotspot_fraction", a.synth.hotspot_fraction},
                       {"hotspot_boost", a.synth.hotspot_boost},
                       {"profile", a.synth.demand_daily_profile},
                       {"duration", {a.synth.duration_min, a.synth.duration_max}},
                       {"drivers", a.synth.driver_base},
                       {"speed", {a.synth.speed_min, a.synth.speed_max}},
                       {"seed", a.city.seed},
                       {"out", a.out}});
  auto [net, coords] = make_synthetic_city(a.city);
  const Scenario s = generate_synthetic(net, a.synth);
  save_scenario(a.out, net, s, coords);
  std::cout << "wrote " << a.out << ": " << net.road_count() << " roads, " << net.intersections.size()
            << " intersections, " << s.horizon() << " steps, " << s.calls.size() << " calls ("
            << std::setprecision(4)
            << static_cast<double>(s.calls.size()) / static_cast<double>(s.horizon() * net.road_count())
            << " per road-step), " << s.total_drivers_series.front() << " drivers at t=0\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  ScenarioArgs scenario;
  std::string gnn = "gat";
  std::size_t layers = 8, heads = 8, hidden = 32;
  std::string policy = "pow";
  double beta = 2.0, epsilon = 0.1, gamma = 0.9, lr = 1e-3, count_scale = 10.0;
  std::size_t epochs = 5, steps = 1440, sync = 100;
  std::string optimizer = "sgd";
  std::uint64_t seed = 0;
  std::string out;
  std::string resume;
};

void setup_train(CLI::App& root, TrainArgs& a) {
  auto* c = root.add_subcommand("train", "Train a GNN Q network");
  a.scenario.add(c);
  c->add_option("--gnn", a.gnn, "gcn or gat")->check(CLI::IsMember({"gcn", "gat"}));
  c->add_option("--layers", a.layers, "Graph layers")->check(CLI::PositiveNumber);
  c->add_option("--heads", a.heads, "Attention heads (gat)")->check(CLI::PositiveNumber);
  c->add_option("--hidden", a.hidden, "Hidden width across all heads")->check(CLI::PositiveNumber);
  c->add_option("--policy", a.policy, "Policy update rule")
      ->check(CLI::IsMember({"greedy", "eps-greedy", "entropy", "pow", "exp"}));
  c->add_option("--beta", a.beta, "Pow/Exp/Entropy parameter")->check(CLI::PositiveNumber);
  c->add_option("--epsilon", a.epsilon, "eps-greedy parameter")->check(CLI::Range(0.0, 1.0));
  c->add_option("--gamma", a.gamma, "Discount factor")->check(CLI::Range(0.0, 1.0));
  c->add_option("--epochs", a.epochs, "Total epochs (a resumed run stops at this count)");
  c->add_option("--steps", a.steps, "Steps per epoch");
  c->add_option("--lr", a.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  c->add_option("--sync", a.sync, "Target network sync period, steps")->check(CLI::PositiveNumber);
  c->add_option("--optimizer", a.optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
  c->add_option("--count-scale", a.count_scale, "Divisor for idle and call counts")->check(CLI::PositiveNumber);
  c->add_option("--seed", a.seed, "Random seed");
  c->add_option("--resume", a.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  c->add_option("--out", a.out, "Output directory (checkpoint.json, metrics.csv)")->required();
}

int run_train(TrainArgs& a, const std::string& argv_line) {
  if (!(a.gamma > 0.0 && a.gamma < 1.0)) throw UsageError("--gamma must lie strictly between 0 and 1");
  GnnConfig gcfg;
  gcfg.kind = parse_gnn_kind(a.gnn);
  gcfg.layers = a.layers;
  gcfg.heads = a.heads;
  gcfg.hidden_dim = a.hidden;
  try {
    gcfg.check();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  PolicyKind kind = parse_policy_kind(a.policy, a.beta, a.epsilon);

  auto loaded = a.scenario.load();
  Scenario scenario = scale_drivers(loaded.scenario, a.scenario.driver_scale);
  const FeatureScale features{a.count_scale, scenario.speeds.max_speed()};

  ParamStore params = init_params(gcfg, derive_seed(a.seed, 0x5eed));
  std::size_t done = 0;
  if (!a.resume.empty()) {
    Checkpoint ck = read_checkpoint(a.resume);
    params = ck.params;
    done = ck.meta.value("epochs_completed", std::size_t{0});
    if (!(params.config == gcfg)) spdlog::warn("network shape taken from {}, overriding --gnn/--layers/--heads", a.resume);
    const PolicyKind stored = policy_of(ck);
    if (!(stored == kind)) spdlog::warn("checkpoint was trained with {}, continuing with {}", stored.label(), kind.label());
  }

  json cfg_json = {{"scenario", a.scenario.to_json()},
                   {"gnn", to_string(params.config.kind)},
                   {"layers", params.config.layers},
                   {"heads", params.config.heads},
                   {"hidden", params.config.hidden_dim},
                   {"policy", kind.name()},
                   {"beta", a.beta},
                   {"epsilon", a.epsilon},
                   {"gamma", a.gamma},
                   {"epochs", a.epochs},
                   {"steps", a.steps},
                   {"lr", a.lr},
                   {"sync", a.sync},
                   {"optimizer", a.optimizer},
                   {"count_scale", a.count_scale},
                   {"seed", a.seed},
                   {"resume", a.resume},
                   {"epochs_completed", done},
                   {"out", a.out}};
  print_config("train", cfg_json);
  if (done >= a.epochs) {
    spdlog::warn("checkpoint already has {} epochs; nothing to do", done);
  }

  TrainConfig tc;
  tc.gamma = a.gamma;
  tc.epochs = a.epochs > done ? a.epochs - done : 0;
  tc.steps_per_epoch = a.steps;
  tc.lr = a.lr;
  tc.target_sync_every = a.sync;
  tc.policy = kind;
  tc.optimizer = a.optimizer == "adam" ? OptimizerKind::Adam : OptimizerKind::Sgd;
  tc.features = features;
  tc.first_epoch = done;
  tc.schedule_steps = a.epochs * a.steps;

  auto ctx = make_context(loaded.network, scenario, SimConfig{a.scenario.expiry});
  auto result = train(params, make_world_factory(ctx, a.seed), tc);
  for (const auto& e : result.epochs) {
    spdlog::info("epoch {}: mean loss {:.5f}, served {}/{}", e.epoch, e.mean_loss, e.served, e.generated);
  }

  fs::create_directories(a.out);
  {
    std::ofstream m(fs::path(a.out) / "metrics.csv");
    m << "# " << argv_line << '\n' << "# config " << cfg_json.dump() << '\n';
    m << "epoch,step,loss,epsilon,served,generated,response_rate\n";
    m << std::setprecision(10);
    for (const auto& s : result.steps) {
      m << s.epoch << ',' << s.step << ',' << s.loss << ',' << s.epsilon << ',' << s.served << ',' << s.generated
        << ',';
      if (s.response_rate) m << *s.response_rate;
      m << '\n';
    }
  }
  Checkpoint out{result.params,
                 {{"epochs_completed", done + tc.epochs},
                  {"policy", kind.name()},
                  {"beta", a.beta},
                  {"epsilon", a.epsilon},
                  {"gamma", a.gamma},
                  {"count_scale", features.count_scale},
                  {"max_speed", features.max_speed},
                  {"seed", a.seed},
                  {"argv", argv_line}}};
  save_checkpoint(fs::path(a.out) / "checkpoint.json", out);
  std::cout << "wrote " << (fs::path(a.out) / "checkpoint.json").string() << " and metrics.csv ("
            << result.steps.size() << " steps)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  ScenarioArgs scenario;
  std::vector<std::string> baselines;
  std::vector<std::string> checkpoints;
  std::vector<double> scales{1.0, 0.5, 0.2};
  double beta = 2.0, epsilon = 0.1;
  std::size_t seeds = 3, steps = 1440;
  std::uint64_t seed = 0;
  std::string out;
};

void setup_eval(CLI::App& root, EvalArgs& a) {
  auto* c = root.add_subcommand("eval", "Order response rate per method and driver scale");
  a.scenario.add(c, false);
  c->add_option("--policy", a.baselines, "Untrained policies: random, proportional")
      ->check(CLI::IsMember({"random", "proportional"}));
  c->add_option("--checkpoint", a.checkpoints, "Trained checkpoints")->check(CLI::ExistingFile);
  c->add_option("--driver-scale", a.scales, "Driver fractions")->check(CLI::Range(0.0, 1e6));
  c->add_option("--seeds", a.seeds, "Seeds per cell")->check(CLI::PositiveNumber);
  c->add_option("--steps", a.steps, "Steps per episode");
  c->add_option("--seed", a.seed, "First seed");
  c->add_option("--out", a.out, "CSV output (method,scale,mean,std,episodes)");
}

int run_eval(EvalArgs& a) {
  if (a.baselines.empty() && a.checkpoints.empty()) throw UsageError("give --policy and/or --checkpoint");
  json cfg = {{"scenario", a.scenario.to_json()}, {"policy", a.baselines}, {"checkpoint", a.checkpoints},
              {"driver_scale", a.scales},         {"seeds", a.seeds},      {"steps", a.steps},
              {"seed", a.seed},                   {"out", a.out}};
  print_config("eval", cfg);
  auto loaded = a.scenario.load();

  struct Method {
    std::string label;
    PolicyKind kind;
    std::optional<Checkpoint> ck;
  };
  std::vector<Method> methods;
  for (const auto& b : a.baselines) methods.push_back({b, parse_policy_kind(b, 1.0, 0.0), std::nullopt});
  for (const auto& path : a.checkpoints) {
    Checkpoint ck = read_checkpoint(path);
    const PolicyKind kind = policy_of(ck);
    methods.push_back({to_string(ck.params.config.kind) + ":" + kind.label() + " [" + fs::path(path).filename().string() +
                           "]",
                       kind, std::move(ck)});
  }

  struct Cell {
    double mean = NAN, std = NAN;
    std::size_t n = 0;
  };
  std::vector<std::vector<Cell>> table(methods.size(), std::vector<Cell>(a.scales.size()));
  for (std::size_t si = 0; si < a.scales.size(); ++si) {
    Scenario s = scale_drivers(loaded.scenario, a.scales[si]);
    auto ctx = make_context(loaded.network, s, SimConfig{a.scenario.expiry});
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const Method& m = methods[mi];
      PolicySource src{m.kind, std::nullopt, feature_scale_for(s)};
      if (m.ck) {
        src.params = m.ck->params;
        src.features = features_of(*m.ck, loaded.scenario);
      }
      std::vector<double> rates;
      for (std::size_t k = 0; k < a.seeds; ++k) {
        auto r = evaluate(src, make_world_factory(ctx, derive_seed(a.seed + k, 0xe7a1)), 1, a.steps);
        if (r.mean) rates.push_back(*r.mean);
      }
      Cell& c = table[mi][si];
      c.n = rates.size();
      if (!rates.empty()) {
        c.mean = 0.0;
        for (double r : rates) c.mean += r;
        c.mean /= static_cast<double>(rates.size());
        double ss = 0.0;
        for (double r : rates) ss += (r - c.mean) * (r - c.mean);
        c.std = rates.size() > 1 ? std::sqrt(ss / static_cast<double>(rates.size() - 1)) : 0.0;
      }
      spdlog::debug("{} @ {}: {} episodes", m.label, a.scales[si], c.n);
    }
  }

  std::size_t width = 6;
  for (const auto& m : methods) width = std::max(width, m.label.size());
  std::cout << std::left << std::setw(static_cast<int>(width)) << "method";
  for (double s : a.scales) std::cout << "  " << std::setw(17) << (std::to_string(static_cast<int>(std::lround(s * 100))) + "%");
  std::cout << '\n' << std::fixed << std::setprecision(4);
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::cout << std::setw(static_cast<int>(width)) << methods[mi].label;
    for (const Cell& c : table[mi]) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(4);
      if (c.n) cell << c.mean << " +- " << c.std; else cell << "undefined";
      std::cout << "  " << std::setw(17) << cell.str();
    }
    std::cout << '\n';
  }
  if (!a.out.empty()) {
    std::ofstream o(a.out);
    if (!o) throw std::runtime_error("cannot write " + a.out);
    o << "method,scale,mean,std,episodes\n" << std::setprecision(10);
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      for (std::size_t si = 0; si < a.scales.size(); ++si) {
        const Cell& c = table[mi][si];
        o << '"' << methods[mi].label << "\"," << a.scales[si] << ',';
        if (c.n) o << c.mean << ',' << c.std;
        else o << ',';
        o << ',' << c.n << '\n';
      }
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// toy

struct ToyArgs {
  std::string family = "both";
  double beta_min = 0.01, beta_max = 100.0;
  std::size_t points = 60;
  std::vector<double> drivers{10.0, 0.0};
  std::vector<double> calls{3.0, 7.0};
  double alpha = 1.0;
  std::size_t max_iters = 10000;
  std::string out;
};

void setup_toy(CLI::App& root, ToyArgs& a) {
  auto* c = root.add_subcommand("toy", "Two-road beta sweep of the stochastic policy update");
  c->add_option("--family", a.family, "pow, exp or both")->check(CLI::IsMember({"pow", "exp", "both"}));
  c->add_option("--beta-min", a.beta_min, "Smallest beta")->check(CLI::PositiveNumber);
  c->add_option("--beta-max", a.beta_max, "Largest beta")->check(CLI::PositiveNumber);
  c->add_option("--points", a.points, "Log-spaced grid points")->check(CLI::PositiveNumber);
  c->add_option("--drivers", a.drivers, "Drivers on road 1 and road 2")->expected(2)->check(CLI::NonNegativeNumber);
  c->add_option("--calls", a.calls, "Calls on road 1 and road 2")->expected(2)->check(CLI::NonNegativeNumber);
  c->add_option("--alpha", a.alpha, "Q learning rate")->check(CLI::Range(0.0, 1.0));
  c->add_option("--max-iters", a.max_iters, "Iteration cap per beta")->check(CLI::PositiveNumber);
  c->add_option("--out", a.out, "CSV output (default stdout)");
}

int run_toy(ToyArgs& a) {
  if (a.beta_max < a.beta_min) throw UsageError("--beta-max is below --beta-min");
  toy::ToyConfig cfg{{a.drivers[0], a.drivers[1]}, {a.calls[0], a.calls[1]}, a.alpha, {1.0, 1.0}};
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw std::runtime_error("cannot write " + a.out);
  }
  std::ostream& os = a.out.empty() ? std::cout : file;
  if (!a.out.empty()) {
    print_config("toy", {{"family", a.family}, {"beta", {a.beta_min, a.beta_max}}, {"points", a.points},
                         {"drivers", a.drivers}, {"calls", a.calls}, {"alpha", a.alpha},
                         {"max_iters", a.max_iters}, {"out", a.out}});
  }
  const auto grid = toy::log_grid(a.beta_min, a.beta_max, a.points);
  std::vector<toy::SweepPoint> pts;
  for (auto fam : {Preference::Pow, Preference::Exp}) {
    if (a.family != "both" && a.family != to_string(fam)) continue;
    for (double b : grid) {
      const auto r = toy::fixed_point_iterate(b, fam, cfg, a.max_iters);
      pts.push_back({b, fam, r.reward, r.converged});
    }
  }
  toy::write_sweep_csv(os, pts);
  std::size_t not_converged = 0;
  for (const auto& p : pts) not_converged += p.converged ? 0 : 1;
  if (not_converged) spdlog::info("{} of {} points ended on a cycle; reward is the final iterate", not_converged, pts.size());
  return kOk;
}

// ---------------------------------------------------------------------------
// export

struct ExportArgs {
  ScenarioArgs scenario;
  std::string checkpoint;
  long at_step = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void setup_export(CLI::App& root, ExportArgs& a) {
  auto* c = root.add_subcommand("export", "Write per-road Q values as GeoJSON");
  a.scenario.add(c);
  c->add_option("--checkpoint", a.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  c->add_option("--at-step", a.at_step, "Run the learned policy this many steps first")
      ->check(CLI::NonNegativeNumber);
  c->add_option("--seed", a.seed, "Random seed");
  c->add_option("--out", a.out, "GeoJSON output")->required();
}

int run_export(ExportArgs& a) {
  print_config("export", {{"scenario", a.scenario.to_json()}, {"checkpoint", a.checkpoint},
                          {"at_step", a.at_step}, {"seed", a.seed}, {"out", a.out}});
  auto loaded = a.scenario.load();
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  const PolicyKind kind = policy_of(ck);
  const Scenario s = scale_drivers(loaded.scenario, a.scenario.driver_scale);
  const FeatureScale features = features_of(ck, loaded.scenario);
  auto ctx = make_context(loaded.network, s, SimConfig{a.scenario.expiry});
  WorldState w = init_world(ctx, a.seed);
  Observation obs = observe(w);
  for (long k = 0; k < a.at_step; ++k) {
    const auto q = forward(ck.params, w.graph(), make_features(obs, features));
    obs = step(w, policy_from_q(q, w.graph(), kind, &obs)).first;
  }
  const auto q = forward(ck.params, w.graph(), make_features(obs, features));
  export_q(loaded.network, q, a.out, loaded.coordinates);
  std::cout << "wrote " << a.out << " (" << q.size() << " roads, t=" << w.time << ")\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_st("fleetgnn");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  spdlog::cfg::load_env_levels();

  CLI::App app{"Graph-based fleet management laboratory"};
  app.require_subcommand(1);
  GenArgs gen;
  TrainArgs tr;
  EvalArgs ev;
  ToyArgs toy_args;
  ExportArgs ex;
  setup_gen(app, gen);
  setup_train(app, tr);
  setup_eval(app, ev);
  setup_toy(app, toy_args);
  setup_export(app, ex);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const std::string argv_line = joined_argv(argc, argv);
  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "gen") return run_gen(gen);
    if (cmd == "train") return run_train(tr, argv_line);
    if (cmd == "eval") return run_eval(ev);
    if (cmd == "toy") return run_toy(toy_args);
    if (cmd == "export") return run_export(ex);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const ScenarioError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}
