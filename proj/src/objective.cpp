#include <cmath>
#include <limits>

#include "stabledyn/learn.hpp"
#include "stabledyn/parallel.hpp"

namespace stabledyn {

ObjectiveContext ObjectiveContext::from_dataset(const Dataset &ds, const LearnConfig &cfg) {
  ObjectiveContext ctx;
  stack_columns(ds, ctx.states, ctx.velocities);
  ctx.layout = ThetaLayout{ds.dim, cfg.K, cfg.L};
  ctx.controller = ControllerConfig{cfg.rho0, cfg.target_radius};
  ctx.scales = ds.meta.scales.size() ? ds.meta.scales : Vec::Ones(ds.dim);
  return ctx;
}

namespace {

struct PointScratch {
  ClosedLoopScratch loop;
  Vec v_gmr, u, v_total;
  PointScratch(const GmrField &f, const ClfFunction &c)
      : loop(f, c), v_gmr(f.dim()), u(f.dim()), v_total(f.dim()) {}
};

}  // namespace

double objective(const Vec &theta, const ObjectiveContext &ctx) {
  GmmModel gmm;
  ClfParams clfp;
  decode_theta(theta, ctx.layout, gmm, clfp);
  GmrField gmr(gmm);
  ClfFunction clf(clfp);

  int n = static_cast<int>(ctx.states.cols());
  Vec err(n);
  std::vector<PointScratch> scratch(max_threads(), PointScratch(gmr, clf));
  parallel_for(n, [&](std::ptrdiff_t i) {
    PointScratch &s = scratch[thread_index()];
    closed_loop_eval(gmr, clf, ctx.controller, ctx.scales, ctx.states.col(i), s.loop, s.v_gmr,
                     s.u, s.v_total);
    err[i] = (ctx.velocities.col(i) - s.v_total).squaredNorm();
  });

  double total = 0.0;
  for (int i = 0; i < n; ++i) total += err[i];
  total /= 2.0 * n;
  // degenerate parameters overflow; +inf makes any line search reject the step
  return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
}

double objective_serial(const Vec &theta, const ObjectiveContext &ctx) {
  GmmModel gmm;
  ClfParams clfp;
  decode_theta(theta, ctx.layout, gmm, clfp);
  GmrField gmr(gmm);
  ClfFunction clf(clfp);

  int n = static_cast<int>(ctx.states.cols());
  PointScratch s(gmr, clf);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    closed_loop_eval(gmr, clf, ctx.controller, ctx.scales, ctx.states.col(i), s.loop, s.v_gmr,
                     s.u, s.v_total);
    total += (ctx.velocities.col(i) - s.v_total).squaredNorm();
  }
  total /= 2.0 * n;
  return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
}

Vec objective_gradient(const Vec &theta, const ObjectiveContext &ctx, double fd_step) {
  int p = static_cast<int>(theta.size());
  Vec grad(p);
  parallel_for(p, [&](std::ptrdiff_t i) {
    double h = fd_step * (1.0 + std::abs(theta[i]));
    Vec probe = theta;
    probe[i] = theta[i] + h;
    double hi = objective_serial(probe, ctx);
    probe[i] = theta[i] - h;
    double lo = objective_serial(probe, ctx);
    grad[i] = (hi - lo) / (2.0 * h);
  });
  return grad;
}

Vec objective_gradient_serial(const Vec &theta, const ObjectiveContext &ctx, double fd_step) {
  int p = static_cast<int>(theta.size());
  Vec grad(p);
  Vec probe = theta;
  for (int i = 0; i < p; ++i) {
    double h = fd_step * (1.0 + std::abs(theta[i]));
    probe[i] = theta[i] + h;
    double hi = objective_serial(probe, ctx);
    probe[i] = theta[i] - h;
    double lo = objective_serial(probe, ctx);
    probe[i] = theta[i];
    grad[i] = (hi - lo) / (2.0 * h);
  }
  return grad;
}

}  // namespace stabledyn
