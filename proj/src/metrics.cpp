#include "stabledyn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace stabledyn {

namespace {

double cross2(const Eigen::Vector2d &a, const Eigen::Vector2d &b) {
  return a.x() * b.y() - a.y() * b.x();
}

double triangle_area(const Eigen::Vector2d &a, const Eigen::Vector2d &b,
                     const Eigen::Vector2d &c) {
  return 0.5 * std::abs(cross2(b - a, c - a));
}

// Proper interior crossing of segments ab and cd.
bool segment_crossing(const Eigen::Vector2d &a, const Eigen::Vector2d &b,
                      const Eigen::Vector2d &c, const Eigen::Vector2d &d, Eigen::Vector2d &out) {
  Eigen::Vector2d r = b - a, s = d - c;
  double denom = cross2(r, s);
  if (denom == 0.0) return false;
  double t = cross2(c - a, s) / denom;
  double u = cross2(c - a, r) / denom;
  if (t <= 0.0 || t >= 1.0 || u <= 0.0 || u >= 1.0) return false;
  out = a + t * r;
  return true;
}

}  // namespace

double tetragon_area(const Eigen::Vector2d &p1, const Eigen::Vector2d &p2,
                     const Eigen::Vector2d &q2, const Eigen::Vector2d &q1) {
  Eigen::Vector2d x;
  // cycle p1 -> p2 -> q2 -> q1; opposite edge pairs can cross
  if (segment_crossing(p1, p2, q2, q1, x))
    return triangle_area(p1, x, q1) + triangle_area(x, p2, q2);
  if (segment_crossing(p2, q2, q1, p1, x))
    return triangle_area(p1, p2, x) + triangle_area(x, q2, q1);
  double twice = cross2(p1, p2) + cross2(p2, q2) + cross2(q2, q1) + cross2(q1, p1);
  return 0.5 * std::abs(twice);
}

namespace {

// Normalized arc-length knots of a 2D polyline; all zero-length handled.
std::vector<double> arc_knots(const Mat &poly) {
  int n = static_cast<int>(poly.cols());
  std::vector<double> cum(n, 0.0);
  for (int i = 1; i < n; ++i)
    cum[i] = cum[i - 1] + (poly.col(i) - poly.col(i - 1)).norm();
  double total = cum[n - 1];
  if (total > 0.0)
    for (double &c : cum) c /= total;
  else
    for (int i = 0; i < n; ++i) cum[i] = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
  return cum;
}

Eigen::Vector2d sample_at(const Mat &poly, const std::vector<double> &knots, double s) {
  int n = static_cast<int>(knots.size());
  if (s <= knots.front()) return poly.col(0);
  if (s >= knots.back()) return poly.col(n - 1);
  int hi = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), s) - knots.begin());
  int lo = hi - 1;
  double span = knots[hi] - knots[lo];
  double w = span > 0.0 ? (s - knots[lo]) / span : 0.0;
  return poly.col(lo) + w * (poly.col(hi) - poly.col(lo));
}

}  // namespace

SeaResult sea(const Mat &demo, const Mat &estimate, int resolution) {
  if (demo.rows() != 2 || estimate.rows() != 2)
    throw ValidationError("swept-error area needs 2D polylines");
  if (demo.cols() < 2 || estimate.cols() < 2)
    throw ValidationError("polylines need at least 2 points");
  if (resolution < 1) throw ValidationError("resolution must be positive");

  std::vector<double> dk = arc_knots(demo);
  std::vector<double> ek = arc_knots(estimate);

  std::vector<double> params;
  params.reserve(dk.size() + ek.size() + resolution + 1);
  params.insert(params.end(), dk.begin(), dk.end());
  params.insert(params.end(), ek.begin(), ek.end());
  for (int i = 0; i <= resolution; ++i)
    params.push_back(static_cast<double>(i) / resolution);
  std::sort(params.begin(), params.end());
  params.erase(std::unique(params.begin(), params.end(),
                           [](double a, double b) { return b - a <= 1e-12; }),
               params.end());

  SeaResult result;
  result.params = params;
  result.per_segment.reserve(params.size() - 1);
  Eigen::Vector2d p_prev = sample_at(demo, dk, params[0]);
  Eigen::Vector2d q_prev = sample_at(estimate, ek, params[0]);
  for (size_t i = 1; i < params.size(); ++i) {
    Eigen::Vector2d p = sample_at(demo, dk, params[i]);
    Eigen::Vector2d q = sample_at(estimate, ek, params[i]);
    double a = tetragon_area(p_prev, p, q, q_prev);
    result.per_segment.push_back(a);
    result.area += a;
    p_prev = p;
    q_prev = q;
  }
  return result;
}

double velocity_rmse(const StableModel &model, const Dataset &ds) {
  if (ds.dim != model.gmm.dim)
    throw ValidationError("dataset dimension does not match the model");
  LearnConfig cfg;
  cfg.K = model.gmm.K();
  cfg.L = model.clf.L;
  cfg.rho0 = model.controller.rho0;
  cfg.target_radius = model.controller.target_radius;
  ObjectiveContext ctx = ObjectiveContext::from_dataset(ds, cfg);
  ctx.scales = model.meta.scales.size() ? model.meta.scales : ctx.scales;
  Vec theta = encode_theta(model.gmm, model.clf);
  return std::sqrt(2.0 * objective(theta, ctx));
}

EvalReport evaluate(const StableModel &model, const Dataset &ds, const RolloutOptions &opts) {
  if (ds.dim != model.gmm.dim)
    throw ValidationError("dataset dimension does not match the model");
  if (ds.dim < 2) throw ValidationError("evaluation needs at least 2 state axes");
  Vec scales = model.meta.scales.size() == ds.dim ? model.meta.scales : Vec::Ones(ds.dim);

  EvalReport report;
  for (const auto &demo : ds.demos) {
    Vec x0 = demo.x.col(0).cwiseProduct(scales);
    RolloutTrace trace = rollout(model, x0, opts);

    Mat demo_xy(2, demo.samples());
    for (int i = 0; i < demo.samples(); ++i)
      demo_xy.col(i) = (demo.x.col(i).cwiseProduct(scales)).head(2);
    Mat est_xy(2, trace.steps.size());
    for (size_t i = 0; i < trace.steps.size(); ++i) est_xy.col(i) = trace.steps[i].x.head(2);

    Dataset single;
    single.demos = {demo};
    single.dim = ds.dim;
    single.meta = ds.meta;

    TrajectoryEval te;
    te.sea = est_xy.cols() >= 2 ? sea(demo_xy, est_xy).area : 0.0;
    te.rmse = velocity_rmse(model, single);
    te.reached_target = trace.reached_target;
    te.steps = static_cast<int>(trace.steps.size());
    report.per_trajectory.push_back(te);
    report.total_sea += te.sea;
    if (te.reached_target) report.reached++;
  }
  report.rmse = velocity_rmse(model, ds);
  return report;
}

void save_eval_report_json(const std::string &path, const EvalReport &report,
                           const std::string &generator_config) {
  nlohmann::json j;
  j["generator"] = {{"tool", kToolName}, {"version", kVersion}, {"config", generator_config}};
  nlohmann::json per = nlohmann::json::array();
  for (size_t i = 0; i < report.per_trajectory.size(); ++i) {
    const auto &t = report.per_trajectory[i];
    per.push_back({{"demo", i},
                   {"sea", t.sea},
                   {"rmse", t.rmse},
                   {"reached_target", t.reached_target},
                   {"steps", t.steps}});
  }
  j["per_trajectory"] = std::move(per);
  j["totals"] = {{"sea", report.total_sea},
                 {"rmse", report.rmse},
                 {"reached", report.reached},
                 {"demos", report.per_trajectory.size()}};

  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace stabledyn
