#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stabledyn/dataset.hpp"
#include "stabledyn/learn.hpp"
#include "stabledyn/metrics.hpp"
#include "stabledyn/model_io.hpp"
#include "stabledyn/parallel.hpp"
#include "stabledyn/sim.hpp"

namespace sd = stabledyn;

namespace {

// Bad values handed to flags exit with the same code as unparseable flags.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_number_list(const std::string &text, const std::string &what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception &) {
      throw UsageError("bad " + what + " value '" + cell + "'");
    }
  }
  if (out.empty()) throw UsageError(what + " must not be empty");
  return out;
}

struct GenerateArgs {
  std::string shape;
  int demos = 3;
  int samples = 500;
  double noise = 0.5;
  bool heading = false;
  std::string out;
};

struct FitArgs {
  std::string input, out;
  int K = 0;  // 0 = pick by dimension
  int L = 1;
  double rho0 = 0.05;
  double target_radius = 0.5;
  double threshold = -1.0;
  int max_iters = 150;
  bool polar = false;
  bool no_normalize = false;
  std::string geo_origin;
  double r_corr = 10.0;
};

struct RolloutArgs {
  std::string model;
  std::vector<std::string> x0;
  std::string from_demo_starts;  // CSV whose demo start states seed the rollouts
  double dt = 0.1;
  int steps = 10000;
  std::string disturbance = "none";
  bool no_control = false;
  std::string out;
};

struct EvalArgs {
  std::string model, input, out;
  double dt = 0.1;
  int steps = 10000;
  double r_corr = 10.0;
};

struct FieldArgs {
  std::string model, out;
  std::string lo, hi;
  int res = 50;
};

struct BenchArgs {
  std::vector<int> k_list{5, 10};
  std::vector<int> n_list{250, 500};
  std::vector<int> d_list{2};
  int reps = 5;
  std::string out;
};

int run_generate(const GenerateArgs &a, uint64_t seed, bool quiet) {
  auto trajs = sd::generate_synthetic(a.shape, a.demos, a.samples, a.noise, seed, a.heading);
  std::ostringstream echo;
  echo << "generate --shape " << a.shape << " --demos " << a.demos << " --samples " << a.samples
       << " --noise " << sd::fmt_double(a.noise) << " --seed " << seed
       << (a.heading ? " --heading" : "") << " -o " << a.out;
  sd::save_csv(a.out, trajs, {std::string(sd::kToolName) + " " + sd::kVersion, echo.str()});
  if (!quiet) {
    double extent = 0.0;
    for (const auto &tr : trajs) extent = std::max(extent, tr.pos.colwise().norm().maxCoeff());
    std::cout << "wrote " << a.out << " (" << a.demos << " demos, " << a.samples
              << " samples each, dim " << trajs[0].dim() << ", extent "
              << sd::fmt_double(extent) << " m)\n";
  }
  return 0;
}

int run_fit(const FitArgs &a, uint64_t seed, bool quiet) {
  auto trajs = sd::load_csv(a.input);
  int raw_dim = trajs[0].dim();

  sd::PreprocessOptions popts;
  popts.polar = a.polar;
  popts.normalize = !a.no_normalize;
  popts.r_corr = a.r_corr;
  if (!a.geo_origin.empty()) {
    auto nums = parse_number_list(a.geo_origin, "--geo-origin");
    if (nums.size() != 2) throw UsageError("--geo-origin needs lon,lat");
    popts.geo_origin = Eigen::Vector2d(nums[0], nums[1]);
  }
  sd::Dataset ds = sd::preprocess(trajs, popts);

  sd::LearnConfig cfg;
  cfg.K = a.K > 0 ? a.K : (raw_dim == 3 ? 12 : 5);
  cfg.L = a.L;
  cfg.seed = seed;
  cfg.rho0 = a.rho0;
  cfg.target_radius = a.target_radius;
  cfg.threshold = a.threshold;
  cfg.max_outer_iters = a.max_iters;

  auto t0 = std::chrono::steady_clock::now();
  sd::StableModel model = sd::fit(ds, cfg);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ostringstream echo;
  echo << "fit -i " << a.input << " -K " << cfg.K << " -L " << cfg.L << " --rho0 "
       << sd::fmt_double(cfg.rho0) << " --target-radius " << sd::fmt_double(cfg.target_radius)
       << " --threshold " << (a.threshold < 0 ? std::string("auto") : sd::fmt_double(a.threshold))
       << " --max-iters " << a.max_iters << " --seed " << seed << (a.polar ? " --polar" : "")
       << (a.no_normalize ? " --no-normalize" : "")
       << (a.geo_origin.empty() ? "" : " --geo-origin " + a.geo_origin);
  model.generator_config = echo.str();
  sd::save_model_json(a.out, model);

  if (!quiet) {
    std::cout << "K=" << cfg.K << " L=" << cfg.L << " demos=" << ds.demos.size()
              << " points=" << ds.total_samples() << "\n";
    std::cout << "J_init=" << sd::fmt_double(model.J_init)
              << " J_final=" << sd::fmt_double(model.J_final)
              << " iterations=" << model.iterations << " time=" << sd::fmt_double(secs) << "s\n";
    std::cout << "wrote " << a.out << "\n";
  }
  if (!model.converged)
    std::cerr << "warning: stopped above the objective threshold (stagnation or iteration cap)\n";
  return 0;
}

int run_rollout(const RolloutArgs &a, bool quiet) {
  if (a.x0.empty() && a.from_demo_starts.empty())
    throw UsageError("give at least one --x0 or --from-demo-starts");
  sd::StableModel model = sd::load_model_json(a.model);
  int d = model.gmm.dim;

  std::vector<sd::Vec> starts;
  std::vector<std::string> labels;
  for (const auto &s : a.x0) {
    auto nums = parse_number_list(s, "--x0");
    if (static_cast<int>(nums.size()) != d)
      throw UsageError("--x0 '" + s + "' has " + std::to_string(nums.size()) +
                       " components, model has " + std::to_string(d));
    starts.push_back(Eigen::Map<sd::Vec>(nums.data(), nums.size()));
    labels.push_back("--x0 " + s);
  }
  if (!a.from_demo_starts.empty()) {
    auto demos_raw = sd::load_csv(a.from_demo_starts);
    sd::Dataset ds = sd::preprocess_with_meta(demos_raw, model.meta);
    for (size_t m = 0; m < ds.demos.size(); ++m) {
      starts.push_back(ds.demos[m].x.col(0).cwiseProduct(ds.meta.scales));
      labels.push_back("--from-demo-starts " + a.from_demo_starts + " (demo " +
                       std::to_string(m) + ")");
    }
  }

  sd::RolloutOptions opts;
  opts.dt = a.dt;
  opts.max_steps = a.steps;
  opts.control_enabled = !a.no_control;
  try {
    opts.disturbance = sd::Disturbance::parse(a.disturbance, d);
  } catch (const sd::ValidationError &e) {
    throw UsageError(e.what());
  }

  auto traces = sd::streamline_bundle(model, starts, opts);
  for (size_t i = 0; i < traces.size(); ++i) {
    std::ostringstream echo;
    echo << "rollout -m " << a.model << " " << labels[i] << " --dt " << sd::fmt_double(a.dt)
         << " --steps " << a.steps << " --disturbance " << opts.disturbance.describe()
         << (a.no_control ? " --no-control" : "");
    std::string path = a.out + "_" + std::to_string(i) + ".csv";
    sd::save_trace_csv(path, traces[i],
                       {std::string(sd::kToolName) + " " + sd::kVersion, echo.str()});
    if (!quiet) {
      const auto &tr = traces[i];
      std::cout << "trace " << i << ": "
                << (tr.reached_target ? "reached target"
                                      : (tr.diverged ? "diverged" : "hit step limit"))
                << " after " << tr.steps.size() << " steps, wrote " << path << "\n";
    }
  }
  return 0;
}

int run_eval(const EvalArgs &a, bool quiet) {
  sd::StableModel model = sd::load_model_json(a.model);
  auto trajs = sd::load_csv(a.input);
  sd::Dataset ds = sd::preprocess_with_meta(trajs, model.meta, a.r_corr);

  sd::RolloutOptions opts;
  opts.dt = a.dt;
  opts.max_steps = a.steps;

  sd::EvalReport report = sd::evaluate(model, ds, opts);
  std::ostringstream echo;
  echo << "eval -m " << a.model << " -i " << a.input << " --dt " << sd::fmt_double(a.dt)
       << " --steps " << a.steps;
  sd::save_eval_report_json(a.out, report, echo.str());

  if (!quiet) {
    for (size_t i = 0; i < report.per_trajectory.size(); ++i) {
      const auto &t = report.per_trajectory[i];
      std::cout << "demo " << i << ": sea=" << sd::fmt_double(t.sea)
                << " rmse=" << sd::fmt_double(t.rmse)
                << " reached=" << (t.reached_target ? "yes" : "no") << " steps=" << t.steps
                << "\n";
    }
    std::cout << "totals: sea=" << sd::fmt_double(report.total_sea)
              << " rmse=" << sd::fmt_double(report.rmse) << " reached=" << report.reached << "/"
              << report.per_trajectory.size() << "\n";
    std::cout << "wrote " << a.out << "\n";
  }
  return 0;
}

int run_field(const FieldArgs &a, bool quiet) {
  sd::StableModel model = sd::load_model_json(a.model);
  int d = model.gmm.dim;

  auto lo_nums = parse_number_list(a.lo, "--lo");
  auto hi_nums = parse_number_list(a.hi, "--hi");
  if (static_cast<int>(lo_nums.size()) != d || static_cast<int>(hi_nums.size()) != d)
    throw UsageError("--lo/--hi need " + std::to_string(d) + " components");
  sd::Vec lo = Eigen::Map<sd::Vec>(lo_nums.data(), d);
  sd::Vec hi = Eigen::Map<sd::Vec>(hi_nums.data(), d);

  auto grid = sd::energy_grid(model, lo, hi, std::vector<int>(d, a.res));
  std::ostringstream echo;
  echo << "field -m " << a.model << " --lo " << a.lo << " --hi " << a.hi << " --res " << a.res;
  sd::save_grid_csv(a.out, grid, {std::string(sd::kToolName) + " " + sd::kVersion, echo.str()});
  if (!quiet)
    std::cout << "wrote " << a.out << " (" << grid.points.cols() << " grid points)\n";
  return 0;
}

int run_bench(const BenchArgs &a, uint64_t seed, bool quiet) {
  struct Cell {
    int K, N, d, points;
    std::vector<double> rep_ms;  // parallel objective, one entry per rep
    double median_ms = 0.0, serial_median_ms = 0.0;
  };
  std::vector<Cell> cells;

  for (int d : a.d_list) {
    if (d != 2 && d != 3) throw UsageError("--d-list supports 2 (planar) and 3 (with heading)");
    for (int K : a.k_list) {
      for (int N : a.n_list) {
        auto trajs = sd::generate_synthetic("s-curve", 3, N, 0.5, seed, d == 3);
        sd::Dataset ds = sd::preprocess(trajs, {});
        sd::LearnConfig cfg;
        cfg.K = K;
        sd::ObjectiveContext ctx = sd::ObjectiveContext::from_dataset(ds, cfg);
        sd::GmmModel gmm = sd::kmeans_init(sd::joint_matrix(ds), K, seed);
        sd::Vec theta = sd::encode_theta(gmm, sd::ClfParams::identity(ds.dim, cfg.L));

        Cell cell;
        cell.K = K;
        cell.N = N;
        cell.d = ds.dim;
        cell.points = ds.total_samples();
        std::vector<double> serial_times;
        for (int r = 0; r < a.reps; ++r) {
          auto t0 = std::chrono::steady_clock::now();
          volatile double sink = sd::objective(theta, ctx);
          (void)sink;
          cell.rep_ms.push_back(
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count());
          t0 = std::chrono::steady_clock::now();
          sink = sd::objective_serial(theta, ctx);
          serial_times.push_back(
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count());
        }
        auto med = [](std::vector<double> v) {
          std::sort(v.begin(), v.end());
          return v[v.size() / 2];
        };
        cell.median_ms = med(cell.rep_ms);
        cell.serial_median_ms = med(serial_times);
        cells.push_back(std::move(cell));
      }
    }
  }

  std::ostringstream table;
  table << "# " << sd::kToolName << " " << sd::kVersion << "\n";
  table << "# compiler " << __VERSION__ << ", threads " << sd::max_threads()
        << ", objective wall time per call\n";
  table << "K,N,d,points,rep,parallel_ms,serial_ms\n";
  for (const auto &c : cells)
    for (size_t r = 0; r < c.rep_ms.size(); ++r)
      table << c.K << ',' << c.N << ',' << c.d << ',' << c.points << ',' << r << ','
            << sd::fmt_double(c.rep_ms[r]) << ','
            << (r == 0 ? sd::fmt_double(c.serial_median_ms) : std::string("")) << "\n";

  // doubling ratios diagnose the expected linear growth in K * M * N
  for (size_t i = 0; i < cells.size(); ++i)
    for (size_t j = 0; j < cells.size(); ++j) {
      if (cells[i].d != cells[j].d) continue;
      double w_i = static_cast<double>(cells[i].K) * cells[i].points;
      double w_j = static_cast<double>(cells[j].K) * cells[j].points;
      if (std::abs(w_j / w_i - 2.0) < 1e-9)
        table << "# ratio K" << cells[j].K << "xN" << cells[j].points << " / K" << cells[i].K
              << "xN" << cells[i].points << " = "
              << sd::fmt_double(cells[j].median_ms / cells[i].median_ms)
              << " (linear target 2)\n";
    }

  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw sd::SchemaError("cannot write '" + a.out + "'");
    f << table.str();
  }
  if (!quiet || a.out.empty()) std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"learned stable dynamics: fit, simulate, and evaluate"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(sd::kToolName) + " " + sd::kVersion);

  uint64_t seed = 0;
  bool quiet = false;
  app.add_option("--seed", seed, "seed for every random choice");
  app.add_flag("--quiet", quiet, "suppress progress output");

  GenerateArgs gen;
  auto *cgen = app.add_subcommand("generate", "write a synthetic demonstration CSV");
  cgen->add_option("--shape", gen.shape, "trajectory family")
      ->required()
      ->check(CLI::IsMember({"line", "arc", "s-curve", "port-approach"}));
  cgen->add_option("-M,--demos", gen.demos, "demonstrations")->check(CLI::PositiveNumber);
  cgen->add_option("-N,--samples", gen.samples, "samples per demonstration")
      ->check(CLI::Range(8, 1000000));
  cgen->add_option("--noise", gen.noise, "smooth noise amplitude in meters")
      ->check(CLI::NonNegativeNumber);
  cgen->add_flag("--heading", gen.heading, "include a heading channel");
  cgen->add_option("-o,--out", gen.out, "output CSV path")->required();

  FitArgs fit;
  auto *cfit = app.add_subcommand("fit", "learn a stable model from demonstrations");
  cfit->add_option("-i,--input", fit.input, "demonstration CSV")->required();
  cfit->add_option("-o,--out", fit.out, "output model JSON")->required();
  cfit->add_option("-K", fit.K, "mixture components (default 5, or 12 for 3D input)")
      ->check(CLI::PositiveNumber);
  cfit->add_option("-L", fit.L, "asymmetric energy terms")->check(CLI::NonNegativeNumber);
  cfit->add_option("--rho0", fit.rho0, "controller aggressiveness")->check(CLI::PositiveNumber);
  cfit->add_option("--target-radius", fit.target_radius, "arrival radius in meters")
      ->check(CLI::NonNegativeNumber);
  cfit->add_option("--threshold", fit.threshold,
                   "objective stop value (default 1% of mean squared velocity)");
  cfit->add_option("--max-iters", fit.max_iters, "optimizer iteration cap")
      ->check(CLI::PositiveNumber);
  cfit->add_flag("--polar", fit.polar, "reduce (x, y, heading) to (rho, theta)");
  cfit->add_flag("--no-normalize", fit.no_normalize, "skip per-axis scale normalization");
  cfit->add_option("--geo-origin", fit.geo_origin, "lon,lat projection origin for geographic input");
  cfit->add_option("--r-corr", fit.r_corr, "endpoint correction radius in meters")
      ->check(CLI::PositiveNumber);

  RolloutArgs roll;
  auto *croll = app.add_subcommand("rollout", "integrate the learned field from start states");
  croll->add_option("-m,--model", roll.model, "model JSON")->required();
  croll->add_option("--x0", roll.x0, "start state, comma separated (repeatable)");
  croll->add_option("--from-demo-starts", roll.from_demo_starts,
                    "demonstration CSV whose start states seed the rollouts");
  croll->add_option("--dt", roll.dt, "integration step in seconds")->check(CLI::PositiveNumber);
  croll->add_option("--steps", roll.steps, "step cap")->check(CLI::PositiveNumber);
  croll->add_option("--disturbance", roll.disturbance,
                    "none | drift:v.. | localized:t0,dur,v.. | engine-off:t0,dur,v..");
  croll->add_flag("--no-control", roll.no_control, "integrate the raw estimate only");
  croll->add_option("-o,--out", roll.out, "trace path prefix")->required();

  EvalArgs eval;
  auto *ceval = app.add_subcommand("eval", "score reproductions against demonstrations");
  ceval->add_option("-m,--model", eval.model, "model JSON")->required();
  ceval->add_option("-i,--input", eval.input, "demonstration CSV")->required();
  ceval->add_option("-o,--out", eval.out, "report JSON path")->required();
  ceval->add_option("--dt", eval.dt, "integration step in seconds")->check(CLI::PositiveNumber);
  ceval->add_option("--steps", eval.steps, "step cap")->check(CLI::PositiveNumber);
  ceval->add_option("--r-corr", eval.r_corr, "endpoint correction radius in meters")
      ->check(CLI::PositiveNumber);

  FieldArgs field;
  auto *cfield = app.add_subcommand("field", "sample energy and velocity on a grid");
  cfield->add_option("-m,--model", field.model, "model JSON")->required();
  cfield->add_option("--lo", field.lo, "lower corner, comma separated")->required();
  cfield->add_option("--hi", field.hi, "upper corner, comma separated")->required();
  cfield->add_option("--res", field.res, "points per axis")->check(CLI::Range(2, 4096));
  cfield->add_option("-o,--out", field.out, "grid CSV path")->required();

  BenchArgs bench;
  auto *cbench = app.add_subcommand("bench", "time the training objective across sizes");
  cbench->add_option("--K-list", bench.k_list, "component counts");
  cbench->add_option("--N-list", bench.n_list, "samples per demonstration");
  cbench->add_option("--d-list", bench.d_list, "state dimensions (2 or 3)");
  cbench->add_option("--reps", bench.reps, "repetitions per cell")->check(CLI::PositiveNumber);
  cbench->add_option("-o,--out", bench.out, "also write the table to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(cgen)) return run_generate(gen, seed, quiet);
    if (app.got_subcommand(cfit)) return run_fit(fit, seed, quiet);
    if (app.got_subcommand(croll)) return run_rollout(roll, quiet);
    if (app.got_subcommand(ceval)) return run_eval(eval, quiet);
    if (app.got_subcommand(cfield)) return run_field(field, quiet);
    if (app.got_subcommand(cbench)) return run_bench(bench, seed, quiet);
  } catch (const UsageError &e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
