// SPDX-License-Identifier: Apache-2.0
// Command-line front end: gen, fit, predict, eval, simulate, hyperband, advise.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lcpred/lcpred.hpp"

namespace {

using namespace lcpred;
using nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    io::write_file_atomic(path, text);
  }
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(io::detail::parse_number(item, 0, "list"));
  }
  return out;
}

ConfigDescriptor parse_config(const std::string& text) {
  try {
    const json j = json::parse(text);
    ConfigDescriptor c;
    c.ap = j.value("ap", json::object()).get<std::map<std::string, double>>();
    c.hp = j.value("hp", json::object()).get<std::map<std::string, double>>();
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad --config JSON: ") + e.what());
  }
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

struct CvFlags {
  int budget = 1000;
  int folds = 3;
  int threads = 1;

  CVConfig make(std::uint64_t seed) const {
    CVConfig cv;
    cv.search_budget = budget;
    cv.folds = folds;
    cv.threads = threads;
    cv.seed = seed;
    return cv;
  }

  void add(CLI::App* app) {
    app->add_option("--cv-budget", budget, "Random-search candidates per checkpoint");
    app->add_option("--folds", folds, "Cross-validation folds");
    app->add_option("--threads", threads, "Worker threads for the search");
  }
};

struct PolicyFlags {
  double delta = 0.99;
  double offset = 0.0;
  int top_n = 1;

  TerminationPolicy make() const {
    TerminationPolicy p;
    p.delta_threshold = delta;
    p.offset = offset;
    p.top_n = top_n;
    p.validate();
    return p;
  }

  void add(CLI::App* app) {
    app->add_option("--delta", delta, "Termination probability threshold");
    app->add_option("--offset", offset, "Slack subtracted from the reference score");
    app->add_option("--top-n", top_n, "Compare against the n-th best finished score");
  }
};

// gen ------------------------------------------------------------------------
struct GenCmd {
  std::string preset = "standard";
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::optional<int> count;
  std::string out;
  std::string manifest_out;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("gen", "Synthesize a curve dataset");
    c->add_option("--preset", preset, "standard | hp_decoupled | depth_linear | hyperband");
    c->add_option("--manifest", manifest, "Generator manifest to reproduce (overrides --preset)");
    c->add_option("--seed", seed, "Generator seed (defaults to the preset's)");
    c->add_option("--count", count, "Number of configurations");
    c->add_option("--out", out, "Dataset path (.jsonl or .csv); stdout when omitted");
    c->add_option("--manifest-out", manifest_out, "Write the manifest here");
    c->callback([this] { run(); });
  }

  void run() {
    GeneratorConfig g = manifest.empty() ? presets::by_name(preset) : from_manifest(json::parse(io::read_file(manifest)));
    if (seed) g.seed = *seed;
    if (count) g.count = *count;
    const CurveDataset ds = generate_dataset(g);
    const bool csv = !out.empty() && io::format_for_path(out) == io::DatasetFormat::csv;
    emit(csv ? io::to_csv(ds) : io::to_jsonl(ds), out);
    if (!manifest_out.empty()) io::write_file_atomic(manifest_out, to_manifest(g).dump(2) + "\n");
  }
};

// fit ------------------------------------------------------------------------
struct FitCmd {
  std::string data, out, backend = "nu_svr_rbf", schema = "ts+ap+hp";
  std::optional<double> fraction;
  std::vector<int> taus;
  std::size_t train_size = 0;
  std::uint64_t seed = 0;
  CvFlags cv;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("fit", "Fit a sequential regression model");
    c->add_option("--data", data, "Dataset path")->required();
    c->add_option("--out", out, "Model path; stdout when omitted");
    c->add_option("--backend", backend, "nu_svr_rbf | nu_svr_linear | kernel_ols | random_forest | last_seen_value");
    c->add_option("--schema", schema, "Feature blocks, e.g. ts+ap+hp");
    c->add_option("--fraction", fraction, "Fit only tau = ceil(fraction * T)");
    c->add_option("--taus", taus, "Fit only these tau values")->delimiter(',');
    c->add_option("--train-size", train_size, "Use a seeded random subset of this size (0 = all)");
    c->add_option("--seed", seed, "Seed");
    cv.add(c);
    c->callback([this] { run(); });
  }

  void run() {
    CurveDataset ds = io::load_dataset(data);
    if (train_size > 0 && train_size < ds.size()) {
      auto order = lcpred::detail::shuffled_order(ds.size(), seed, 0);
      order.resize(train_size);
      ds = ds.subset(order);
    }
    SrmFitOptions opts;
    if (fraction) opts.taus = std::vector<int>{tau_for_fraction(*fraction, ds.horizon)};
    else if (!taus.empty()) opts.taus = taus;
    const auto srm = fit_srm(ds, parse_backend(backend), cv.make(seed), FeatureSchema::parse(schema), opts);
    emit(io::srm_to_json(srm).dump() + "\n", out);
  }
};

// predict --------------------------------------------------------------------
struct PredictCmd {
  std::string model, config = "{}", curve, best, out;
  std::uint64_t seed = 0;
  PolicyFlags policy;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("predict", "Predict the final value of a partial curve");
    c->add_option("--model", model, "Model path")->required();
    c->add_option("--config", config, R"(Descriptor JSON, e.g. {"ap":{"layers":4},"hp":{"lr":0.01}})");
    c->add_option("--curve", curve, "Observed values, comma separated")->required();
    c->add_option("--best", best, "Finished final values, comma separated (raw orientation)");
    c->add_option("--out", out, "Output path; stdout when omitted");
    c->add_option("--seed", seed, "Seed (accepted for uniformity; prediction is deterministic)");
    policy.add(c);
    c->callback([this] { run(); });
  }

  void run() {
    const auto srm = io::load_model(model);
    const auto observed = parse_list(curve);
    const ConfigDescriptor cfg = parse_config(config);
    if (!srm.has(static_cast<int>(observed.size())))
      throw ValidationError("model has no checkpoint for a curve of length " + std::to_string(observed.size()));
    for (double v : observed)
      if (!value_in_range(v, srm.orientation)) throw ValidationError("curve value out of range");
    const FinalPrediction p = srm.predict_final(cfg, observed);
    std::vector<double> ledger;
    for (double v : parse_list(best)) update_best(ledger, srm.orientation.normalize(v));
    const Decision d = should_terminate(policy.make(), srm.orientation.normalize(p.value), p.sigma, ledger);
    const json j{{"tau", p.tau},
                 {"predicted", p.value},
                 {"sigma", p.sigma},
                 {"probability", d.probability},
                 {"reference", io::finite_or_null(d.reference == kNegInf ? kNegInf : srm.orientation.denormalize(d.reference))},
                 {"action", to_string(d.action)}};
    emit(j.dump(2) + "\n", out);
  }
};

// eval -----------------------------------------------------------------------
struct EvalCmd {
  std::string data, mode = "sweep", out_json, out_csv, schema = "ts+ap+hp", depth_key = "layers";
  std::vector<double> fractions{0.1, 0.25};
  std::vector<std::string> backends{"nu_svr_rbf", "last_seen_value"};
  std::size_t train_size = 100;
  int repeats = 10;
  double threshold = 0.0;
  std::uint64_t seed = 0;
  CvFlags cv;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("eval", "Prediction sweep, feature ablation or depth generalization");
    c->add_option("--data", data, "Dataset path")->required();
    c->add_option("--mode", mode, "sweep | ablation | depth");
    c->add_option("--fractions", fractions, "Observed fractions")->delimiter(',');
    c->add_option("--backends", backends, "Backends for the sweep")->delimiter(',');
    c->add_option("--train-size", train_size, "Training curves per repeat");
    c->add_option("--repeats", repeats, "Random splits");
    c->add_option("--schema", schema, "Feature blocks (sweep and depth modes)");
    c->add_option("--depth-key", depth_key, "AP key holding the depth (depth mode)");
    c->add_option("--threshold", threshold, "Train on depth <= threshold (depth mode)");
    c->add_option("--out-json", out_json, "JSON output; stdout when omitted");
    c->add_option("--out-csv", out_csv, "CSV output");
    c->add_option("--seed", seed, "Seed");
    cv.add(c);
    c->callback([this] { run(); });
  }

  void run() {
    const CurveDataset ds = io::load_dataset(data);
    const CVConfig cvc = cv.make(seed);
    if (mode == "depth") {
      const double fraction = fractions.empty() ? 0.25 : fractions.front();
      const Backend b = parse_backend(backends.empty() ? "nu_svr_rbf" : backends.front());
      const double r2 = depth_generalization_eval(ds, depth_key, threshold, b, cvc, FeatureSchema::parse(schema), fraction);
      emit(json{{"mode", "depth"}, {"backend", to_string(b)}, {"schema", schema}, {"threshold", threshold},
                {"fraction", fraction}, {"r2", r2}}.dump(2) + "\n", out_json);
      if (!out_csv.empty())
        io::write_file_atomic(out_csv, "backend,schema,threshold,fraction,r2\n" + to_string(b) + "," + schema + "," +
                                           io::format_double(threshold) + "," + io::format_double(fraction) + "," +
                                           io::format_double(r2) + "\n");
      return;
    }
    std::vector<SweepRow> rows;
    if (mode == "sweep") {
      std::vector<Backend> bs;
      for (const auto& b : backends) bs.push_back(parse_backend(b));
      rows = prediction_sweep(ds, train_size, fractions, bs, repeats, cvc, seed, FeatureSchema::parse(schema));
    } else if (mode == "ablation") {
      if (fractions.empty()) throw ValidationError("ablation needs one fraction");
      const Backend b = parse_backend(backends.empty() ? "nu_svr_rbf" : backends.front());
      rows = ablation_eval(ds, ablation_subsets(), fractions.front(), repeats, train_size, b, cvc, seed);
    } else {
      throw ValidationError("unknown eval mode '" + mode + "'");
    }
    emit(json{{"mode", mode}, {"rows", io::to_json(rows)}}.dump(2) + "\n", out_json);
    if (!out_csv.empty()) io::write_file_atomic(out_csv, io::to_csv(rows));
  }
};

// simulate -------------------------------------------------------------------
struct SimulateCmd {
  std::string data, out_json, out_csv, backend = "nu_svr_rbf", schema = "ts+ap+hp";
  int orderings = 10, burn_in = 100;
  std::vector<double> deltas{0.99};
  double offset = 0.0;
  int top_n = 1;
  std::uint64_t seed = 0;
  CvFlags cv;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("simulate", "Replay sequential search with early termination");
    c->add_option("--data", data, "Dataset path")->required();
    c->add_option("--orderings", orderings, "Random orderings");
    c->add_option("--burn-in", burn_in, "Fully trained configs before any decision");
    c->add_option("--delta", deltas, "Termination thresholds (several share one model per ordering)")->delimiter(',');
    c->add_option("--offset", offset, "Slack subtracted from the reference score");
    c->add_option("--top-n", top_n, "Compare against the n-th best score");
    c->add_option("--backend", backend, "Regression backend");
    c->add_option("--schema", schema, "Feature blocks");
    c->add_option("--out-json", out_json, "JSON output; stdout when omitted");
    c->add_option("--out-csv", out_csv, "CSV output");
    c->add_option("--seed", seed, "Seed");
    cv.add(c);
    c->callback([this] { run(); });
  }

  void run() {
    const CurveDataset ds = io::load_dataset(data);
    SimulationConfig sim;
    sim.orderings = orderings;
    sim.burn_in = burn_in;
    sim.backend = parse_backend(backend);
    sim.schema = FeatureSchema::parse(schema);
    sim.cv = cv.make(seed);
    sim.seed = seed;
    std::vector<TerminationPolicy> policies;
    for (double d : deltas) {
      TerminationPolicy p;
      p.delta_threshold = d;
      p.offset = offset;
      p.top_n = top_n;
      p.validate();
      policies.push_back(p);
    }
    if (policies.empty()) throw ValidationError("at least one --delta is required");
    sim.policy = policies.front();
    const auto results = simulate_sequential_search(ds, sim, policies);
    json arr = json::array();
    std::string csv;
    for (std::size_t i = 0; i < results.size(); ++i) {
      arr.push_back(io::to_json(results[i], policies[i]));
      const std::string part = io::to_csv(results[i], policies[i]);
      csv += i == 0 ? part : part.substr(part.find('\n') + 1);
    }
    emit(json{{"results", arr}}.dump(2) + "\n", out_json);
    if (!out_csv.empty()) io::write_file_atomic(out_csv, csv);
  }
};

// hyperband ------------------------------------------------------------------
struct HyperbandCmd {
  int R = 27;
  double eta = 3.0;
  bool f = false;
  double delta = 0.95, offset = 0.0, kappa = 0.5;
  int d = 100, runs = 1;
  bool restart = false;
  std::string oracle = "synthetic", preset = "hyperband", data, trainer, orientation = "higher_is_better", out;
  std::uint64_t seed = 0;
  CvFlags cv;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("hyperband", "Run Hyperband or f-Hyperband");
    c->add_option("--R", R, "Maximum epochs per configuration");
    c->add_option("--eta", eta, "Halving rate");
    c->add_flag("--f", f, "Enable in-round early termination");
    c->add_option("--delta", delta, "Termination probability threshold");
    c->add_option("--offset", offset, "Slack subtracted from the reference score");
    c->add_option("--d", d, "Curves required before a predictor trains");
    c->add_option("--kappa", kappa, "Fraction of survivors used as the reference rank");
    c->add_option("--runs", runs, "Consecutive runs sharing one predictor store");
    c->add_flag("--restart", restart, "Retrain survivors from epoch 0 instead of resuming");
    c->add_option("--oracle", oracle, "synthetic | replay | advisor");
    c->add_option("--preset", preset, "Curve family for the synthetic oracle");
    c->add_option("--data", data, "Dataset for the replay oracle");
    c->add_option("--trainer", trainer, "Trainer command line for the advisor oracle");
    c->add_option("--orientation", orientation, "Metric orientation of the advisor oracle");
    c->add_option("--out", out, "JSON output; stdout when omitted");
    c->add_option("--seed", seed, "Seed");
    cv.budget = 50;
    cv.add(c);
    c->callback([this] { run(); });
  }

  void run() {
    if (runs < 1) throw ValidationError("--runs must be at least 1");
    std::unique_ptr<EpochOracle> orc;
    ConfigSampler sampler;
    CurveDataset replay;
    if (oracle == "synthetic") {
      const GeneratorConfig g = presets::by_name(preset);
      if (g.family.horizon < R) throw ValidationError("preset horizon is shorter than R");
      orc = std::make_unique<SyntheticOracle>(g.family, seed);
      sampler = range_sampler(g.ranges);
    } else if (oracle == "replay") {
      if (data.empty()) throw ValidationError("--oracle replay needs --data");
      replay = io::load_dataset(data);
      if (replay.horizon < R) throw ValidationError("dataset horizon is shorter than R");
      orc = std::make_unique<ReplayOracle>(replay);
      sampler = replay_sampler(replay);
    } else if (oracle == "advisor") {
      if (trainer.empty()) throw ValidationError("--oracle advisor needs --trainer");
      const GeneratorConfig g = presets::by_name(preset);
      orc = std::make_unique<io::SubprocessOracle>(split_words(trainer), MetricOrientation{parse_orientation(orientation)});
      sampler = range_sampler(g.ranges);
    } else {
      throw ValidationError("unknown oracle '" + oracle + "'");
    }

    FHyperbandParams fp;
    fp.base = {R, eta};
    fp.delta_threshold = delta;
    fp.offset = offset;
    fp.d = d;
    fp.kappa = kappa;
    fp.validate();
    HyperbandOptions opts;
    opts.resume = !restart;
    PredictorStore store(d, cv.make(derive_seed(seed, {0x73746f7265ULL})));
    json arr = json::array();
    long total = 0;
    for (int i = 0; i < runs; ++i) {
      const std::uint64_t run_seed = derive_seed(seed, {static_cast<std::uint64_t>(i)});
      const HyperbandResult res = f ? run_f_hyperband(fp, *orc, sampler, run_seed, store, opts)
                                    : run_hyperband(fp.base, *orc, sampler, run_seed, opts);
      total += res.ledger.total_epochs;
      arr.push_back(io::to_json(res));
    }
    emit(json{{"R", R}, {"eta", eta}, {"f", f}, {"total_epochs", total}, {"runs", arr}}.dump(2) + "\n", out);
  }
};

// advise ---------------------------------------------------------------------
struct AdviseCmd {
  std::string model, ledger, host = "127.0.0.1";
  int port = -1;
  std::uint64_t seed = 0;
  PolicyFlags policy;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("advise", "Serve stop/continue decisions over JSONL");
    c->add_option("--model", model, "Model path")->required();
    c->add_option("--ledger", ledger, "Persisted best-ledger file");
    c->add_option("--tcp", port, "Listen on this TCP port instead of stdio (0 = any)");
    c->add_option("--host", host, "Listen address for --tcp");
    c->add_option("--seed", seed, "Seed (accepted for uniformity; decisions are deterministic)");
    policy.add(c);
    c->callback([this] { run(); });
  }

  void run() {
    std::optional<std::filesystem::path> lp;
    if (!ledger.empty()) lp = ledger;
    io::AdvisorService service(io::load_model(model), policy.make(), lp);
    if (port < 0) {
      io::serve_stream(service, std::cin, std::cout);
      return;
    }
    io::TcpAdvisorServer server(service);
    const int bound = server.start(port, host);
    std::cerr << "listening on " << host << ":" << bound << std::endl;
    server.wait();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-curve prediction and early termination"};
  app.require_subcommand(1);
  GenCmd gen;
  FitCmd fit;
  PredictCmd predict;
  EvalCmd eval;
  SimulateCmd simulate;
  HyperbandCmd hyperband;
  AdviseCmd advise;
  gen.add(app);
  fit.add(app);
  predict.add(app);
  eval.add(app);
  simulate.add(app);
  hyperband.add(app);
  advise.add(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  } catch (const lcpred::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
