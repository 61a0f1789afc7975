// SPDX-License-Identifier: Apache-2.0
// Acceptance runner. `acceptance` runs every criterion; `acceptance 3 5` runs
// a selection. One PASS/FAIL line per criterion; exit status 1 on any FAIL.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcpred/io/files.hpp"
#include "lcpred/io/model_io.hpp"
#include "lcpred/lcpred.hpp"
#include "support/oracles.hpp"

using namespace lcpred;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

// ---------------------------------------------------------------------------

Verdict bracket_arithmetic() {
  auto pairs = [](int R, double eta) {
    std::vector<std::pair<int, int>> out;
    for (const auto& b : bracket_schedule({R, eta})) out.emplace_back(b.rounds.front().n, b.rounds.front().r);
    return out;
  };
  const std::vector<std::pair<int, int>> want81{{81, 1}, {34, 3}, {15, 9}, {8, 27}, {5, 81}};
  const std::vector<std::pair<int, int>> want9{{9, 1}, {5, 3}, {3, 9}};
  const auto got81 = pairs(81, 3.0), got9 = pairs(9, 3.0);
  const bool ok = got81 == want81 && got9 == want9;
  return {ok, ok ? "R=81 and R=9 schedules match exactly" : "schedule mismatch"};
}

// ---------------------------------------------------------------------------

// Largest pairwise KKT gap of the two capped-simplex halves, computed from
// the dual variables alone.
double kkt_gap(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, const NuSvrDual& d, double C) {
  const Eigen::VectorXd g = K * (d.alpha - d.alpha_star) - y;
  const double tol = 1e-9 * C;
  auto half = [&](const Eigen::VectorXd& v, double sign) {
    double up = kNegInf, low = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double neg_grad = -sign * g[i];
      if (v[i] < C - tol) up = std::max(up, neg_grad);
      if (v[i] > tol) low = std::min(low, neg_grad);
    }
    return std::max(0.0, up - low);
  };
  return std::max(half(d.alpha, 1.0), half(d.alpha_star, -1.0));
}

Verdict svr_correctness() {
  std::mt19937_64 rng(20170402);
  std::uniform_real_distribution<double> u(-1.0, 1.0), logc(-1.0, 1.0), nuu(0.1, 0.9), logg(-1.0, 0.5);
  std::normal_distribution<double> noise(0.0, 0.1);
  double worst_pred = 0.0, worst_kkt = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const int dim = 1 + trial % 3;
    Eigen::MatrixXd x(20, dim);
    Eigen::VectorXd y(20);
    for (int i = 0; i < 20; ++i) {
      for (int j = 0; j < dim; ++j) x(i, j) = u(rng);
      y[i] = std::sin(2.0 * x(i, 0)) + (dim > 1 ? 0.5 * x(i, 1) * x(i, dim - 1) : 0.0) + noise(rng);
    }
    const double C = std::pow(10.0, logc(rng)), nu = nuu(rng);
    const Kernel k = trial % 2 ? Kernel::linear() : Kernel::rbf(std::pow(10.0, logg(rng)));
    const Eigen::MatrixXd K = gram(k, x, x);
    const NuSvrDual smo = solve_nu_svr_dual(K, y, C, nu);
    const auto ref = oracle::solve_nu_svr_qp(K, y, C, nu);

    Eigen::MatrixXd probes(70, dim);
    probes.topRows(20) = x;
    for (int i = 20; i < 70; ++i)
      for (int j = 0; j < dim; ++j) probes(i, j) = 1.2 * u(rng);
    const Eigen::MatrixXd Kp = gram(k, probes, x);
    const Eigen::VectorXd a = (Kp * smo.coef).array() + smo.bias;
    const Eigen::VectorXd b = (Kp * ref.coef).array() + ref.bias;
    worst_pred = std::max(worst_pred, (a - b).cwiseAbs().maxCoeff());
    worst_kkt = std::max(worst_kkt, kkt_gap(K, y, smo, C));
  }
  const bool ok = worst_pred <= 1e-2 && worst_kkt <= 1e-3;
  return {ok, "max disagreement " + fmt(worst_pred, 6) + ", max KKT gap " + fmt(worst_kkt, 6)};
}

// ---------------------------------------------------------------------------

const CurveDataset& benchmark() {
  static const CurveDataset ds = generate_dataset(presets::standard_benchmark());
  return ds;
}

Verdict prediction_quality() {
  CVConfig cv;
  const auto rows = prediction_sweep(benchmark(), 100, {0.25, 0.1}, {Backend::nu_svr_rbf, Backend::last_seen_value},
                                     10, cv, 0);
  auto cell = [&](Backend b, double f) {
    for (const auto& r : rows)
      if (r.label == to_string(b) && r.fraction == f) return r.mean_r2;
    throw Error("missing sweep cell");
  };
  const double rbf25 = cell(Backend::nu_svr_rbf, 0.25), rbf10 = cell(Backend::nu_svr_rbf, 0.1);
  const double last10 = cell(Backend::last_seen_value, 0.1);
  const bool ok = rbf25 >= 0.9 && rbf10 > last10;
  return {ok, "R2 at 25% " + fmt(rbf25) + "; at 10% " + fmt(rbf10) + " vs last-seen " + fmt(last10)};
}

// ---------------------------------------------------------------------------

Verdict early_stopping() {
  SimulationConfig sim;
  sim.orderings = 10;
  sim.burn_in = 100;
  TerminationPolicy strict, loose;
  strict.delta_threshold = 0.99;
  loose.delta_threshold = 0.95;
  const auto res = simulate_sequential_search(benchmark(), sim, {strict, loose});
  const SimulationResult& a = res[0];
  const SimulationResult& b = res[1];
  const bool ok = a.recovered >= 5 && a.speedup >= 2.0 && b.speedup >= a.speedup;
  return {ok, "0.99: speedup " + fmt(a.speedup, 3) + ", recovered " + std::to_string(a.recovered) +
                  "/10; 0.95: speedup " + fmt(b.speedup, 3)};
}

// ---------------------------------------------------------------------------

struct HbSession {
  long epochs = 0;
  double best_final = kNegInf;  // best true final value over the runs
};

double true_final(const SyntheticOracle& orc, const HyperbandResult& res) {
  for (const auto& t : res.ledger.trials)
    if (t.id == res.best_trial) return orc.orientation().normalize(orc.true_curve(t).final_value());
  return kNegInf;
}

HbSession hyperband_session(bool predictors, int d, int runs) {
  const GeneratorConfig g = presets::hyperband_workload();
  SyntheticOracle orc(g.family, 0);
  const auto sampler = range_sampler(g.ranges);
  FHyperbandParams fp;
  fp.base = {27, 3.0};
  fp.delta_threshold = 0.95;
  fp.kappa = 0.5;
  fp.d = d;
  CVConfig cv;
  cv.search_budget = 50;
  cv.seed = derive_seed(0, {0x73746f7265ULL});
  PredictorStore store(d, cv);
  HbSession s;
  for (int i = 0; i < runs; ++i) {
    const std::uint64_t seed = derive_seed(0, {static_cast<std::uint64_t>(i)});
    const auto res = predictors ? run_f_hyperband(fp, orc, sampler, seed, store) : run_hyperband(fp.base, orc, sampler, seed);
    s.epochs += res.ledger.total_epochs;
    s.best_final = std::max(s.best_final, true_final(orc, res));
  }
  return s;
}

Verdict f_hyperband() {
  // Reduction: a threshold no store can reach leaves plain Hyperband.
  const GeneratorConfig g = presets::hyperband_workload();
  const auto sampler = range_sampler(g.ranges);
  bool identical = true;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    SyntheticOracle plain_orc(g.family, seed), fast_orc(g.family, seed);
    FHyperbandParams fp;
    fp.base = {27, 3.0};
    fp.d = 1'000'000;
    const auto plain = run_hyperband(fp.base, plain_orc, sampler, seed);
    const auto fast = run_f_hyperband(fp, fast_orc, sampler, seed);
    identical = identical && plain.best_trial == fast.best_trial && plain.best_config == fast.best_config &&
                plain.best_score == fast.best_score && plain.ledger == fast.ledger &&
                plain_orc.executed() == fast_orc.executed();
  }

  const HbSession vanilla = hyperband_session(false, 100, 3);
  const HbSession fast = hyperband_session(true, 100, 3);
  const double ratio = static_cast<double>(fast.epochs) / static_cast<double>(vanilla.epochs);
  const double gap = vanilla.best_final - fast.best_final;
  const bool ok = identical && ratio <= 0.75 && gap <= 0.01;

  const HbSession probe = hyperband_session(true, 20, 3);
  std::cout << "info: d=20 epochs ratio " << fmt(static_cast<double>(probe.epochs) / vanilla.epochs, 3)
            << ", best " << fmt(probe.best_final) << " vs vanilla " << fmt(vanilla.best_final) << "\n";
  return {ok, std::string("reduction ") + (identical ? "bit-identical" : "DIFFERS") + "; d=100 epochs " +
                  std::to_string(fast.epochs) + "/" + std::to_string(vanilla.epochs) + " (ratio " + fmt(ratio, 3) +
                  "), best " + fmt(fast.best_final) + " vs vanilla " + fmt(vanilla.best_final)};
}

// ---------------------------------------------------------------------------

Verdict cdf_and_monotonicity() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> loc(-5.0, 5.0), logsd(-3.0, 1.0), unit(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double mean = loc(rng), sd = std::pow(10.0, logsd(rng));
    const double x = mean + sd * 8.0 * (unit(rng) - 0.5);
    worst = std::max(worst, std::abs(normal_cdf(x, mean, sd) - oracle::precise_normal_cdf(x, mean, sd)));
  }

  std::uniform_int_distribution<int> count(0, 8), rank(1, 5);
  int violations = 0;
  auto stops = [](const TerminationPolicy& p, double pred, double sigma, const std::vector<double>& best) {
    return should_terminate(p, pred, sigma, best).action == Action::terminate;
  };
  for (int c = 0; c < 10000; ++c) {
    std::vector<double> best;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) update_best(best, unit(rng));
    const double pred = unit(rng), sigma = std::pow(10.0, logsd(rng) - 1.0);
    TerminationPolicy lo, hi;
    lo.top_n = hi.top_n = rank(rng);
    lo.offset = hi.offset = 0.1 * unit(rng);
    // Delta: stopping at a higher threshold implies stopping at a lower one.
    lo.delta_threshold = 0.01 + 0.98 * unit(rng);
    hi.delta_threshold = lo.delta_threshold + (0.99 - lo.delta_threshold) * unit(rng);
    if (stops(hi, pred, sigma, best) && !stops(lo, pred, sigma, best)) ++violations;
    // Offset: a larger slack never adds a stop.
    TerminationPolicy wide = lo;
    wide.offset = lo.offset + 0.1 * unit(rng);
    if (stops(wide, pred, sigma, best) && !stops(lo, pred, sigma, best)) ++violations;
    // Rank: comparing against a lower-ranked score never adds a stop.
    TerminationPolicy deep = lo;
    deep.top_n = lo.top_n + rank(rng);
    if (stops(deep, pred, sigma, best) && !stops(lo, pred, sigma, best)) ++violations;
  }
  const bool ok = worst <= 1e-12 && violations == 0;
  return {ok, "max CDF error " + [&] { std::ostringstream s; s << std::scientific << std::setprecision(2) << worst; return s.str(); }() +
                  ", monotonicity violations " + std::to_string(violations) + "/30000"};
}

// ---------------------------------------------------------------------------

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run_cli(const std::string& args, const std::string& stdin_path = "") {
  std::string cmd = std::string(LCPRED_CLI) + " " + args + " 2>/dev/null";
  if (!stdin_path.empty()) cmd += " < " + stdin_path;
  Outcome o;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return o;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) o.out.append(buf, n);
  const int status = ::pclose(p);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

Verdict round_trip_and_cli() {
  const fs::path dir = fs::temp_directory_path() / ("lcpred-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto path = [&](const std::string& name) { return (dir / name).string(); };

  GeneratorConfig g = presets::standard_benchmark();
  g.count = 120;
  const CurveDataset ds = generate_dataset(g);
  CVConfig cv;
  cv.search_budget = 20;
  const auto srm = fit_srm(ds, Backend::nu_svr_rbf, cv, FeatureSchema{}, SrmFitOptions{});
  io::save_model(srm, path("model.json"));
  const auto loaded = io::load_model(path("model.json"));
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  const auto taus = srm.taus();
  std::uniform_int_distribution<std::size_t> pick_tau(0, taus.size() - 1);
  int drift = 0;
  for (int i = 0; i < 100; ++i) {
    const auto& rec = ds.records[pick(rng)];
    const int tau = taus[pick_tau(rng)];
    const auto a = srm.predict_final(rec.config, rec.curve.prefix(tau));
    const auto b = loaded.predict_final(rec.config, rec.curve.prefix(tau));
    if (a.value != b.value || a.sigma != b.sigma) ++drift;
  }

  io::write_file_atomic(path("session.jsonl"),
                        R"({"kind":"register","session":"a","config":{"ap":{"layers":4,"weights":50000},"hp":{"lr":0.01}}})"
                        "\n"
                        R"({"kind":"epoch_report","session":"a","epoch":1,"value":0.2})"
                        "\n"
                        R"({"kind":"epoch_report","session":"a","epoch":2,"value":0.3})"
                        "\n"
                        R"({"kind":"finalize","session":"a","value":0.7})"
                        "\n");
  const std::string data = path("data.jsonl"), model = path("cli_model.json");
  const std::string cfg = R"('{"ap":{"layers":4,"weights":50000},"hp":{"lr":0.01}}')";
  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen --preset standard --count 60 --seed 5", ""},
      {"fit --data " + data + " --cv-budget 8 --taus 2,5 --seed 4 --out -", ""},
      {"predict --model " + model + " --config " + cfg + " --curve 0.2,0.3 --best 0.7,0.6", ""},
      {"eval --data " + data + " --mode sweep --fractions 0.25 --train-size 40 --repeats 2 --cv-budget 5", ""},
      {"simulate --data " + data + " --orderings 2 --burn-in 30 --cv-budget 5 --delta 0.9,0.99", ""},
      {"hyperband --R 9 --f --d 5 --cv-budget 5 --runs 2 --seed 3", ""},
      {"advise --model " + model, path("session.jsonl")},
  };
  bool setup = run_cli("gen --preset standard --count 60 --out " + data).code == 0 &&
               run_cli("fit --data " + data + " --cv-budget 8 --taus 2,5 --out " + model).code == 0;
  std::vector<std::string> differing;
  for (const auto& [args, input] : commands) {
    const Outcome a = run_cli(args, input), b = run_cli(args, input);
    if (a.code != 0 || b.code != 0 || a.out.empty() || a.out != b.out) differing.push_back(args.substr(0, args.find(' ')));
  }
  fs::remove_all(dir);

  const bool ok = drift == 0 && setup && differing.empty();
  std::string detail = "prediction drift on " + std::to_string(drift) + "/100 probes; ";
  if (!setup) detail += "CLI setup failed";
  else if (differing.empty()) detail += "all " + std::to_string(commands.size()) + " commands byte-identical";
  else {
    detail += "not reproducible:";
    for (const auto& d : differing) detail += " " + d;
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------

Verdict ablation() {
  CVConfig cv;
  const auto rows = ablation_eval(benchmark(), ablation_subsets(), 0.25, 10, 100, Backend::nu_svr_rbf, cv, 0);
  double full = 0.0, full_se = 0.0, best_single = kNegInf;
  std::string table;
  for (const auto& r : rows) {
    table += " " + r.label + "=" + fmt(r.mean_r2, 3);
    if (r.label == "ts+ap+hp") {
      full = r.mean_r2;
      full_se = r.std_error;
    }
    if (r.label == "ts" || r.label == "ap" || r.label == "hp") best_single = std::max(best_single, r.mean_r2);
  }
  const CurveDataset decoupled = generate_dataset(presets::hp_decoupled_benchmark());
  const auto hp = ablation_eval(decoupled, {FeatureSchema{false, false, true}}, 0.25, 10, 100, Backend::nu_svr_rbf,
                                cv, 0).front();
  const bool ok = full >= best_single - full_se && std::abs(hp.mean_r2) <= 0.1;
  return {ok, "full " + fmt(full) + " (se " + fmt(full_se) + ") vs best single " + fmt(best_single) +
                  "; hp-only on decoupled " + fmt(hp.mean_r2) + ";" + table};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "bracket arithmetic", 0.001, bracket_arithmetic},
      {2, "nu-SVR correctness", 10, svr_correctness},
      {3, "prediction quality", 300, prediction_quality},
      {4, "early stopping", 600, early_stopping},
      {5, "f-Hyperband reduction and gain", 600, f_hyperband},
      {6, "normal CDF and decision monotonicity", 5, cdf_and_monotonicity},
      {7, "model round trip and CLI reproducibility", 60, round_trip_and_cli},
      {8, "feature ablation", 600, ablation},
  };
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));
  bool all_pass = true;
  for (const auto& c : all) {
    if (!chosen.empty() && !chosen.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = v.pass && in_time;
    all_pass = all_pass && pass;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (pass ? "PASS" : "FAIL") << "; " << v.detail
              << "; " << fmt(secs, 3) << " s" << (in_time ? "" : " over limit") << "\n"
              << std::flush;
  }
  return all_pass ? 0 : 1;
}
