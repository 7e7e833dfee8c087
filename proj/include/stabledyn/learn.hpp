#pragma once

#include <string>
#include <vector>

#include "stabledyn/controller.hpp"
#include "stabledyn/dataset.hpp"
#include "stabledyn/gmm.hpp"

namespace stabledyn {

// Flat parameter vector over all learnable quantities:
//   [prior logits | component means | component covariance factors |
//    CLF factors | CLF centers]
// Priors go through a softmax; covariances and CLF matrices are stored as
// packed lower-triangular factors of (M - floor * I), so every finite vector
// decodes to valid parameters.
struct ThetaLayout {
  int d = 0, K = 0, L = 0;

  static constexpr double kCovFloor = 1e-10;

  int joint() const { return 2 * d; }
  int tri_joint() const { return joint() * (joint() + 1) / 2; }
  int tri_d() const { return d * (d + 1) / 2; }

  int off_logits() const { return 0; }
  int off_means() const { return K; }
  int off_covs() const { return K + K * joint(); }
  int off_clf() const { return off_covs() + K * tri_joint(); }
  int off_centers() const { return off_clf() + (L + 1) * tri_d(); }
  int size() const { return off_centers() + L * d; }
};

Vec encode_theta(const GmmModel &gmm, const ClfParams &clf);
void decode_theta(const Vec &theta, const ThetaLayout &layout, GmmModel &gmm, ClfParams &clf);

struct LearnConfig {
  int K = 5;
  int L = 1;
  uint64_t seed = 0;
  double rho0 = 0.05;
  double target_radius = 0.5;
  double threshold = -1.0;  // < 0 selects 1% of the mean squared velocity
  int max_outer_iters = 150;
  int stagnation_limit = 20;
  double fd_step = 1e-6;
  int lbfgs_memory = 8;
  double armijo_c = 1e-4;
  double ls_shrink = 0.5;
  int ls_max_steps = 30;
  double em_tol = 1e-6;
  int em_max_iter = 500;
};

// Training data and fixed settings the objective closes over.
struct ObjectiveContext {
  Mat states;      // d x n
  Mat velocities;  // d x n
  ThetaLayout layout;
  ControllerConfig controller;
  Vec scales;  // physical units per axis, for the target-ball test

  static ObjectiveContext from_dataset(const Dataset &ds, const LearnConfig &cfg);
};

// Mean squared closed-loop reproduction error,
//   J = 1/(2n) * sum_i |v_i - (v_gmr + u)(x_i)|^2.
double objective(const Vec &theta, const ObjectiveContext &ctx);
double objective_serial(const Vec &theta, const ObjectiveContext &ctx);

// Central differences per coordinate, step fd_step * (1 + |theta_i|).
Vec objective_gradient(const Vec &theta, const ObjectiveContext &ctx, double fd_step = 1e-6);
Vec objective_gradient_serial(const Vec &theta, const ObjectiveContext &ctx,
                              double fd_step = 1e-6);

struct StableModel {
  GmmModel gmm;
  ClfParams clf;
  ControllerConfig controller;
  DatasetMeta meta;
  double J_init = 0.0;
  double J_final = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // J per outer iteration, history[0] = J_init

  // Provenance echo carried through save/load round trips.
  std::string generator_tool;
  std::string generator_version;
  std::string generator_config;
};

// EM initialization of the mixture, identity initialization of the CLF, then
// L-BFGS (two-loop recursion, Armijo backtracking) on the packed vector.
// Stops at the threshold, the iteration cap, or after stagnation_limit
// non-improving iterations; the history is non-increasing and J_final never
// exceeds J_init.
StableModel fit(const Dataset &ds, const LearnConfig &cfg);

}  // namespace stabledyn
