#include <algorithm>
#include <cmath>
#include <deque>

#include "stabledyn/learn.hpp"

namespace stabledyn {

namespace {

// Two-loop recursion over the stored (s, y) pairs; returns the quasi-Newton
// descent direction for gradient g.
Vec lbfgs_direction(const Vec &g, const std::deque<Vec> &s_hist, const std::deque<Vec> &y_hist) {
  Vec q = -g;
  int m = static_cast<int>(s_hist.size());
  if (m == 0) return q;

  std::vector<double> alpha(m), rho(m);
  for (int i = m - 1; i >= 0; --i) {
    rho[i] = 1.0 / y_hist[i].dot(s_hist[i]);
    alpha[i] = rho[i] * s_hist[i].dot(q);
    q -= alpha[i] * y_hist[i];
  }
  double gamma = s_hist[m - 1].dot(y_hist[m - 1]) / y_hist[m - 1].squaredNorm();
  q *= gamma;
  for (int i = 0; i < m; ++i) {
    double beta = rho[i] * y_hist[i].dot(q);
    q += (alpha[i] - beta) * s_hist[i];
  }
  return q;
}

}  // namespace

StableModel fit(const Dataset &ds, const LearnConfig &cfg) {
  if (ds.demos.empty()) throw ValidationError("dataset has no demonstrations");
  int n = ds.total_samples();
  if (n < cfg.K)
    throw ValidationError("dataset has " + std::to_string(n) + " samples, need at least K = " +
                          std::to_string(cfg.K));

  Mat joint = joint_matrix(ds);
  GmmModel gmm0 = fit_em(joint, cfg.K, cfg.seed, cfg.em_tol, cfg.em_max_iter).first;
  ClfParams clf0 = ClfParams::identity(ds.dim, cfg.L);

  ObjectiveContext ctx = ObjectiveContext::from_dataset(ds, cfg);
  double threshold = cfg.threshold;
  if (threshold < 0.0)
    threshold = 0.01 * ctx.velocities.squaredNorm() / static_cast<double>(n);

  Vec theta = encode_theta(gmm0, clf0);
  double J = objective(theta, ctx);

  StableModel model;
  model.meta = ds.meta;
  model.controller = ControllerConfig{cfg.rho0, cfg.target_radius};
  model.J_init = J;
  model.history.push_back(J);

  std::deque<Vec> s_hist, y_hist;
  int stagnation = 0;

  if (J > threshold) {
    Vec g = objective_gradient(theta, ctx, cfg.fd_step);
    for (int iter = 0; iter < cfg.max_outer_iters; ++iter) {
      Vec p = lbfgs_direction(g, s_hist, y_hist);
      double gp = g.dot(p);
      if (gp >= 0.0) {  // memory no longer describes a descent direction
        s_hist.clear();
        y_hist.clear();
        p = -g;
        gp = g.dot(p);
      }
      if (gp == 0.0) break;  // gradient vanished

      double alpha = s_hist.empty() ? std::min(1.0, 1.0 / std::max(1.0, g.norm())) : 1.0;
      double J_next = J;
      bool accepted = false;
      for (int ls = 0; ls < cfg.ls_max_steps; ++ls) {
        J_next = objective(theta + alpha * p, ctx);
        if (J_next <= J + cfg.armijo_c * alpha * gp) {
          accepted = true;
          break;
        }
        alpha *= cfg.ls_shrink;
      }

      if (!accepted) {
        if (s_hist.empty()) break;  // steepest descent cannot improve either
        s_hist.clear();
        y_hist.clear();
        model.history.push_back(J);
        if (++stagnation >= cfg.stagnation_limit) break;
        continue;
      }

      Vec step = alpha * p;
      theta += step;
      Vec g_next = objective_gradient(theta, ctx, cfg.fd_step);
      Vec y = g_next - g;
      if (step.dot(y) > 1e-10 * step.norm() * y.norm()) {
        s_hist.push_back(step);
        y_hist.push_back(y);
        if (static_cast<int>(s_hist.size()) > cfg.lbfgs_memory) {
          s_hist.pop_front();
          y_hist.pop_front();
        }
      }

      bool improved = J_next < J - 1e-12 * std::max(1.0, std::abs(J));
      stagnation = improved ? 0 : stagnation + 1;
      J = J_next;
      g = g_next;
      model.history.push_back(J);
      if (J <= threshold || stagnation >= cfg.stagnation_limit) break;
    }
  }

  decode_theta(theta, ctx.layout, model.gmm, model.clf);
  model.J_final = J;
  model.iterations = static_cast<int>(model.history.size()) - 1;
  model.converged = J <= threshold;
  return model;
}

}  // namespace stabledyn
