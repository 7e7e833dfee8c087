#pragma once

#include "stabledyn/clf.hpp"
#include "stabledyn/gmr.hpp"

namespace stabledyn {

struct ControllerConfig {
  double rho0 = 0.05;
  double target_radius = 0.5;  // physical units
};

struct ControlTerms {
  double a;  // grad V . f_hat
  Vec b;     // grad V
};

ControlTerms a_b_terms(const ClfFunction &clf, const Vec &x, const Vec &f_hat);

// Minimum-intervention stabilizing correction:
//   rho = rho0 * sqrt(a^2 + |b|^4)
//   u = -(a + rho) * b / |b|^2   when a + rho > 0, else exactly 0.
// Also exactly 0 when |b|^2 <= 1e-10 or the state lies inside the target
// ball. scales maps state axes to physical units for the ball test; active
// steps satisfy grad V . (f_hat + u) = -rho.
Vec control(const ClfFunction &clf, const ControllerConfig &cfg, const Vec &x, const Vec &f_hat,
            const Vec &scales);
Vec control(const ClfFunction &clf, const ControllerConfig &cfg, const Vec &x, const Vec &f_hat);

Vec closed_loop_velocity(const GmrField &gmr, const ClfFunction &clf, const ControllerConfig &cfg,
                         const Vec &x, const Vec &scales);

struct ClosedLoopScratch {
  GmrField::Scratch gmr;
  ClfFunction::Scratch clf;
  Vec g;  // grad V
  ClosedLoopScratch(const GmrField &f, const ClfFunction &c)
      : gmr(f), clf(c), g(c.dim()) {}
};

// One full evaluation at x (internal units): v_gmr, u, v_total = v_gmr + u.
// Returns V(x). v_total is bitwise equal to v_gmr wherever the correction is
// inactive. This is the single code path shared by training and rollout.
double closed_loop_eval(const GmrField &gmr, const ClfFunction &clf, const ControllerConfig &cfg,
                        const Vec &scales, const Eigen::Ref<const Vec> &x, ClosedLoopScratch &s,
                        Vec &v_gmr, Vec &u, Vec &v_total);

}  // namespace stabledyn
