#include "stabledyn/sim.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "stabledyn/parallel.hpp"

namespace stabledyn {

bool Disturbance::active_at(double t) const {
  switch (kind) {
    case DisturbanceKind::none:
      return false;
    case DisturbanceKind::constant_drift:
      return true;
    default:
      return t >= t_start && t < t_start + duration;
  }
}

Disturbance Disturbance::parse(const std::string &spec, int dim) {
  Disturbance d;
  if (spec == "none") return d;

  auto colon = spec.find(':');
  std::string name = spec.substr(0, colon);
  std::vector<double> nums;
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        nums.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception &) {
        throw ValidationError("bad disturbance value '" + cell + "' in '" + spec + "'");
      }
    }
  }

  size_t lead = 0;
  if (name == "drift") {
    d.kind = DisturbanceKind::constant_drift;
  } else if (name == "localized" || name == "engine-off") {
    d.kind = name == "localized" ? DisturbanceKind::localized_drift : DisturbanceKind::engine_off;
    if (nums.size() < 2) throw ValidationError("'" + spec + "' needs t0,dur before the drift");
    d.t_start = nums[0];
    d.duration = nums[1];
    if (d.duration < 0.0) throw ValidationError("disturbance duration must be non-negative");
    lead = 2;
  } else {
    throw ValidationError("unknown disturbance '" + name + "'");
  }

  // engine-off with no drift values means the vehicle coasts in still water
  if (d.kind == DisturbanceKind::engine_off && nums.size() == lead) {
    d.drift = Vec::Zero(dim);
    return d;
  }
  if (static_cast<int>(nums.size() - lead) != dim)
    throw ValidationError("disturbance '" + spec + "' has " + std::to_string(nums.size() - lead) +
                          " drift components, model has " + std::to_string(dim));
  d.drift = Vec(dim);
  for (int i = 0; i < dim; ++i) d.drift[i] = nums[lead + i];
  return d;
}

std::string Disturbance::describe() const {
  switch (kind) {
    case DisturbanceKind::none:
      return "none";
    case DisturbanceKind::constant_drift: {
      std::string s = "drift:";
      for (int i = 0; i < drift.size(); ++i) s += (i ? "," : "") + fmt_double(drift[i]);
      return s;
    }
    default: {
      std::string s = kind == DisturbanceKind::localized_drift ? "localized:" : "engine-off:";
      s += fmt_double(t_start) + "," + fmt_double(duration);
      for (int i = 0; i < drift.size(); ++i) s += "," + fmt_double(drift[i]);
      return s;
    }
  }
}

RolloutTrace rollout(const StableModel &model, const Vec &x0, const RolloutOptions &opts) {
  int d = model.gmm.dim;
  if (x0.size() != d)
    throw ValidationError("start state has dimension " + std::to_string(x0.size()) +
                          ", model has " + std::to_string(d));
  if (opts.dt <= 0.0) throw ValidationError("dt must be positive");
  if (opts.disturbance.kind != DisturbanceKind::none && opts.disturbance.drift.size() != d)
    throw ValidationError("disturbance dimension does not match the model");

  Vec scales = model.meta.scales.size() == d ? model.meta.scales : Vec::Ones(d);
  double limit = 1000.0 * std::max(model.meta.extent, 1e-6);

  GmrField gmr(model.gmm);
  ClfFunction clf(model.clf);
  ClosedLoopScratch scratch(gmr, clf);

  Vec x_int = x0.cwiseQuotient(scales);
  Vec drift_int;
  if (opts.disturbance.kind != DisturbanceKind::none)
    drift_int = opts.disturbance.drift.cwiseQuotient(scales);

  RolloutTrace trace;
  Vec v_gmr(d), u(d), v_total(d);
  for (int step = 0; step <= opts.max_steps; ++step) {
    double t = step * opts.dt;
    double V;
    if (opts.control_enabled) {
      V = closed_loop_eval(gmr, clf, model.controller, scales, x_int, scratch, v_gmr, u, v_total);
    } else {
      gmr.estimate_into(x_int, scratch.gmr, v_gmr);
      V = clf.value_and_gradient(x_int, scratch.clf, scratch.g);
      u.setZero();
      v_total = v_gmr;
    }

    bool disturbed = opts.disturbance.active_at(t);
    if (disturbed) {
      if (opts.disturbance.kind == DisturbanceKind::engine_off) {
        u.setZero();  // nothing the controller outputs is applied
        v_total = drift_int;
      } else {
        v_total += drift_int;
      }
    }

    RolloutStep rec;
    rec.t = t;
    rec.x = x_int.cwiseProduct(scales);
    rec.v_gmr = v_gmr.cwiseProduct(scales);
    rec.u = u.cwiseProduct(scales);
    rec.v_total = v_total.cwiseProduct(scales);
    rec.V = V;
    rec.disturbed = disturbed;
    double radius = rec.x.norm();
    trace.steps.push_back(std::move(rec));

    if (radius <= model.controller.target_radius) {
      trace.reached_target = true;
      break;
    }
    if (radius > limit) {
      trace.diverged = true;
      break;
    }
    if (step == opts.max_steps) break;
    x_int += opts.dt * v_total;
  }
  return trace;
}

std::vector<RolloutTrace> streamline_bundle(const StableModel &model,
                                            const std::vector<Vec> &starts,
                                            const RolloutOptions &opts) {
  std::vector<RolloutTrace> traces(starts.size());
  parallel_for(static_cast<std::ptrdiff_t>(starts.size()),
               [&](std::ptrdiff_t i) { traces[i] = rollout(model, starts[i], opts); });
  return traces;
}

std::vector<RolloutTrace> streamline_bundle_serial(const StableModel &model,
                                                   const std::vector<Vec> &starts,
                                                   const RolloutOptions &opts) {
  std::vector<RolloutTrace> traces(starts.size());
  for (size_t i = 0; i < starts.size(); ++i) traces[i] = rollout(model, starts[i], opts);
  return traces;
}

namespace {

void grid_points(const Vec &lo, const Vec &hi, const std::vector<int> &resolution, Mat &points) {
  int d = static_cast<int>(lo.size());
  long total = 1;
  for (int a = 0; a < d; ++a) {
    if (resolution[a] < 2) throw ValidationError("grid resolution must be at least 2 per axis");
    total *= resolution[a];
  }
  points.resize(d, total);
  for (long i = 0; i < total; ++i) {
    long rest = i;
    for (int a = 0; a < d; ++a) {
      int idx = rest % resolution[a];
      rest /= resolution[a];
      points(a, i) = lo[a] + (hi[a] - lo[a]) * idx / (resolution[a] - 1);
    }
  }
}

}  // namespace

EnergyGrid energy_grid(const StableModel &model, const Vec &lo, const Vec &hi,
                       const std::vector<int> &resolution) {
  int d = model.gmm.dim;
  if (lo.size() != d || hi.size() != d || static_cast<int>(resolution.size()) != d)
    throw ValidationError("grid bounds and resolution must match the model dimension");
  Vec scales = model.meta.scales.size() == d ? model.meta.scales : Vec::Ones(d);

  EnergyGrid grid;
  grid_points(lo, hi, resolution, grid.points);
  long total = grid.points.cols();
  grid.V.resize(total);
  grid.field.resize(d, total);

  GmrField gmr(model.gmm);
  ClfFunction clf(model.clf);
  std::vector<GmrField::Scratch> gs(max_threads(), GmrField::Scratch(gmr));
  std::vector<Vec> vbuf(max_threads(), Vec(d));
  std::vector<Vec> xbuf(max_threads(), Vec(d));
  parallel_for(total, [&](std::ptrdiff_t i) {
    int tid = thread_index();
    xbuf[tid] = grid.points.col(i).cwiseQuotient(scales);
    gmr.estimate_into(xbuf[tid], gs[tid], vbuf[tid]);
    grid.field.col(i) = vbuf[tid].cwiseProduct(scales);
    grid.V[i] = clf.value(xbuf[tid]);
  });
  return grid;
}

EnergyGrid energy_grid_serial(const StableModel &model, const Vec &lo, const Vec &hi,
                              const std::vector<int> &resolution) {
  int d = model.gmm.dim;
  if (lo.size() != d || hi.size() != d || static_cast<int>(resolution.size()) != d)
    throw ValidationError("grid bounds and resolution must match the model dimension");
  Vec scales = model.meta.scales.size() == d ? model.meta.scales : Vec::Ones(d);

  EnergyGrid grid;
  grid_points(lo, hi, resolution, grid.points);
  long total = grid.points.cols();
  grid.V.resize(total);
  grid.field.resize(d, total);

  GmrField gmr(model.gmm);
  ClfFunction clf(model.clf);
  GmrField::Scratch s(gmr);
  Vec v(d), x(d);
  for (long i = 0; i < total; ++i) {
    x = grid.points.col(i).cwiseQuotient(scales);
    gmr.estimate_into(x, s, v);
    grid.field.col(i) = v.cwiseProduct(scales);
    grid.V[i] = clf.value(x);
  }
  return grid;
}

void save_trace_csv(const std::string &path, const RolloutTrace &trace,
                    const std::vector<std::string> &comment_lines) {
  if (trace.steps.empty()) throw ValidationError("trace has no steps");
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path + "'");
  for (const auto &c : comment_lines) out << "# " << c << "\n";

  int d = static_cast<int>(trace.steps[0].x.size());
  out << "t";
  for (int a = 1; a <= d; ++a) out << ",x" << a;
  for (int a = 1; a <= d; ++a) out << ",vgmr" << a;
  for (int a = 1; a <= d; ++a) out << ",u" << a;
  for (int a = 1; a <= d; ++a) out << ",vtot" << a;
  out << ",V,disturbed\n";

  for (const auto &s : trace.steps) {
    out << fmt_double(s.t);
    for (int a = 0; a < d; ++a) out << ',' << fmt_double(s.x[a]);
    for (int a = 0; a < d; ++a) out << ',' << fmt_double(s.v_gmr[a]);
    for (int a = 0; a < d; ++a) out << ',' << fmt_double(s.u[a]);
    for (int a = 0; a < d; ++a) out << ',' << fmt_double(s.v_total[a]);
    out << ',' << fmt_double(s.V) << ',' << (s.disturbed ? 1 : 0) << "\n";
  }
}

void save_grid_csv(const std::string &path, const EnergyGrid &grid,
                   const std::vector<std::string> &comment_lines) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path + "'");
  for (const auto &c : comment_lines) out << "# " << c << "\n";

  int d = static_cast<int>(grid.points.rows());
  out << "x1";
  for (int a = 2; a <= d; ++a) out << ",x" << a;
  out << ",V";
  for (int a = 1; a <= d; ++a) out << ",f" << a;
  out << "\n";
  for (long i = 0; i < grid.points.cols(); ++i) {
    for (int a = 0; a < d; ++a) out << (a ? "," : "") << fmt_double(grid.points(a, i));
    out << ',' << fmt_double(grid.V[i]);
    for (int a = 0; a < d; ++a) out << ',' << fmt_double(grid.field(a, i));
    out << "\n";
  }
}

}  // namespace stabledyn
