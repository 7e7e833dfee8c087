// Times every parallel kernel against its serial reference on one workload
// and checks that both produce bitwise identical results.
#include <algorithm>
#include <chrono>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "stabledyn/dataset.hpp"
#include "stabledyn/gmm.hpp"
#include "stabledyn/gmr.hpp"
#include "stabledyn/learn.hpp"
#include "stabledyn/parallel.hpp"
#include "stabledyn/sim.hpp"

namespace sd = stabledyn;

namespace {

double median_ms(const std::function<void()> &fn, int reps) {
  std::vector<double> times;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    times.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

bool bits_equal(const sd::Mat &a, const sd::Mat &b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

bool bits_equal(const sd::Vec &a, const sd::Vec &b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

void report(const std::string &name, double serial_ms, double parallel_ms, bool match) {
  std::cout << std::left << std::setw(20) << name << std::right << std::setw(12) << std::fixed
            << std::setprecision(3) << serial_ms << std::setw(12) << parallel_ms << std::setw(10)
            << std::setprecision(2) << serial_ms / std::max(parallel_ms, 1e-9) << std::setw(10)
            << (match ? "yes" : "NO") << "\n";
}

}  // namespace

int main(int argc, char **argv) {
  int reps = 5;
  int K = 8;
  int N = 1000;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    auto next = [&]() -> int {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << arg << "\n";
        std::exit(2);
      }
      return std::atoi(argv[++i]);
    };
    if (arg == "--reps")
      reps = next();
    else if (arg == "-K")
      K = next();
    else if (arg == "-N")
      N = next();
    else {
      std::cerr << "usage: bench_kernels [--reps R] [-K components] [-N samples-per-demo]\n";
      return 2;
    }
  }

  auto trajs = sd::generate_synthetic("s-curve", 4, N, 0.5, 7, false);
  sd::Dataset ds = sd::preprocess(trajs, {});
  sd::Mat joint = sd::joint_matrix(ds);
  sd::Mat states, velocities;
  sd::stack_columns(ds, states, velocities);

  sd::GmmModel gmm = sd::fit_em(joint, K, 7, 1e-4, 40).first;
  sd::GmrField field(gmm);
  sd::LearnConfig cfg;
  cfg.K = K;
  sd::ObjectiveContext ctx = sd::ObjectiveContext::from_dataset(ds, cfg);
  sd::Vec theta = sd::encode_theta(gmm, sd::ClfParams::identity(ds.dim, cfg.L));

  std::cout << "threads=" << sd::max_threads() << "  K=" << K << "  points=" << joint.cols()
            << "  reps=" << reps << " (median ms)\n";
  std::cout << std::left << std::setw(20) << "kernel" << std::right << std::setw(12) << "serial"
            << std::setw(12) << "parallel" << std::setw(10) << "speedup" << std::setw(10)
            << "bitwise\n";

  bool all_match = true;

  {
    double a = 0, b = 0;
    double ts = median_ms([&] { a = sd::log_likelihood_serial(gmm, joint); }, reps);
    double tp = median_ms([&] { b = sd::log_likelihood(gmm, joint); }, reps);
    bool m = std::memcmp(&a, &b, sizeof(double)) == 0;
    all_match = all_match && m;
    report("log_likelihood", ts, tp, m);
  }
  {
    sd::Mat a, b;
    double ts = median_ms([&] { a = sd::e_step_serial(gmm, joint); }, reps);
    double tp = median_ms([&] { b = sd::e_step(gmm, joint); }, reps);
    bool m = bits_equal(a, b);
    all_match = all_match && m;
    report("e_step", ts, tp, m);
  }
  {
    sd::Mat a, b;
    double ts = median_ms([&] { a = sd::batch_estimate_serial(field, states); }, reps);
    double tp = median_ms([&] { b = sd::batch_estimate(field, states); }, reps);
    bool m = bits_equal(a, b);
    all_match = all_match && m;
    report("batch_estimate", ts, tp, m);
  }
  {
    double a = 0, b = 0;
    double ts = median_ms([&] { a = sd::objective_serial(theta, ctx); }, reps);
    double tp = median_ms([&] { b = sd::objective(theta, ctx); }, reps);
    bool m = std::memcmp(&a, &b, sizeof(double)) == 0;
    all_match = all_match && m;
    report("objective", ts, tp, m);
  }
  {
    sd::Vec a, b;
    double ts = median_ms([&] { a = sd::objective_gradient_serial(theta, ctx); }, reps);
    double tp = median_ms([&] { b = sd::objective_gradient(theta, ctx); }, reps);
    bool m = bits_equal(a, b);
    all_match = all_match && m;
    report("objective_gradient", ts, tp, m);
  }

  if (!all_match) {
    std::cerr << "serial and parallel kernels disagree\n";
    return 1;
  }
  return 0;
}
