#include "stabledyn/controller.hpp"

#include <cmath>

namespace stabledyn {

namespace {

constexpr double kBFloor = 1e-10;  // guard on |b|^2

double scaled_norm(const Eigen::Ref<const Vec> &x, const Vec &scales) {
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    double xi = x[i] * scales[i];
    s += xi * xi;
  }
  return std::sqrt(s);
}

// Writes u given the gradient g; returns whether the correction is active.
bool control_from_gradient(const Vec &g, const Eigen::Ref<const Vec> &f_hat, double rho0,
                           bool inside_ball, Vec &u) {
  u.setZero();
  if (inside_ball) return false;
  double bb = g.squaredNorm();
  if (bb <= kBFloor) return false;
  double a = g.dot(f_hat);
  double rho = rho0 * std::sqrt(a * a + bb * bb);
  if (a + rho <= 0.0) return false;
  u = (-(a + rho) / bb) * g;
  return true;
}

}  // namespace

ControlTerms a_b_terms(const ClfFunction &clf, const Vec &x, const Vec &f_hat) {
  if (x.size() != clf.dim() || f_hat.size() != clf.dim())
    throw ValidationError("state and estimate must match the function dimension");
  ControlTerms t;
  t.b = clf.gradient(x);
  t.a = t.b.dot(f_hat);
  return t;
}

Vec control(const ClfFunction &clf, const ControllerConfig &cfg, const Vec &x, const Vec &f_hat,
            const Vec &scales) {
  if (x.size() != clf.dim() || f_hat.size() != clf.dim() || scales.size() != clf.dim())
    throw ValidationError("state, estimate, and scales must match the function dimension");
  Vec g = clf.gradient(x);
  Vec u(x.size());
  control_from_gradient(g, f_hat, cfg.rho0, scaled_norm(x, scales) <= cfg.target_radius, u);
  return u;
}

Vec control(const ClfFunction &clf, const ControllerConfig &cfg, const Vec &x, const Vec &f_hat) {
  return control(clf, cfg, x, f_hat, Vec::Ones(x.size()));
}

double closed_loop_eval(const GmrField &gmr, const ClfFunction &clf, const ControllerConfig &cfg,
                        const Vec &scales, const Eigen::Ref<const Vec> &x, ClosedLoopScratch &s,
                        Vec &v_gmr, Vec &u, Vec &v_total) {
  gmr.estimate_into(x, s.gmr, v_gmr);
  double V = clf.value_and_gradient(x, s.clf, s.g);
  bool active =
      control_from_gradient(s.g, v_gmr, cfg.rho0, scaled_norm(x, scales) <= cfg.target_radius, u);
  if (active)
    v_total = v_gmr + u;
  else
    v_total = v_gmr;  // bitwise passthrough when inactive
  return V;
}

Vec closed_loop_velocity(const GmrField &gmr, const ClfFunction &clf, const ControllerConfig &cfg,
                         const Vec &x, const Vec &scales) {
  ClosedLoopScratch s(gmr, clf);
  Vec v_gmr(gmr.dim()), u(gmr.dim()), v_total(gmr.dim());
  closed_loop_eval(gmr, clf, cfg, scales, x, s, v_gmr, u, v_total);
  return v_total;
}

}  // namespace stabledyn
