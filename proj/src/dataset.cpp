#include "stabledyn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace stabledyn {

namespace {

constexpr double kEarthRadius = 6371000.0;
constexpr double kDegToRad = kPi / 180.0;

std::string trim(const std::string &s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_double(const std::string &cell, int row) {
  try {
    size_t used = 0;
    double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception &) {
    throw SchemaError("unparseable numeric value '" + cell + "' at row " + std::to_string(row));
  }
}

}  // namespace

std::string fmt_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::vector<RawTrajectory> load_csv(const std::string &path, const CsvSchema &schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");

  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = split_csv_line(t);
    break;
  }
  if (header.empty()) throw SchemaError("'" + path + "' has no header row");

  auto col_index = [&](const std::string &name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };

  int demo_idx = col_index(schema.demo_col);
  if (demo_idx < 0) throw SchemaError("missing column '" + schema.demo_col + "' in '" + path + "'");
  int t_idx = col_index(schema.t_col);
  if (t_idx < 0) throw SchemaError("missing column '" + schema.t_col + "' in '" + path + "'");

  std::vector<int> pos_idx;
  for (int d = 1;; ++d) {
    int idx = col_index(schema.pos_prefix + std::to_string(d));
    if (idx < 0) break;
    pos_idx.push_back(idx);
  }
  if (pos_idx.empty())
    throw SchemaError("missing column '" + schema.pos_prefix + "1' in '" + path + "'");
  int heading_idx = col_index(schema.heading_col);

  struct Block {
    std::vector<double> t;
    std::vector<double> heading;
    std::vector<Vec> pos;
  };
  std::vector<std::string> order;
  std::map<std::string, Block> blocks;

  int row = 0;
  while (std::getline(in, line)) {
    std::string tl = trim(line);
    if (tl.empty() || tl[0] == '#') continue;
    ++row;
    auto cells = split_csv_line(tl);
    if (cells.size() != header.size())
      throw SchemaError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(header.size()));

    const std::string &id = cells[demo_idx];
    if (!blocks.count(id)) order.push_back(id);
    Block &b = blocks[id];

    double t = parse_double(cells[t_idx], row);
    if (!b.t.empty() && t <= b.t.back())
      throw ValidationError("non-monotone time at row " + std::to_string(row));
    b.t.push_back(t);

    Vec p(pos_idx.size());
    for (size_t d = 0; d < pos_idx.size(); ++d) p[d] = parse_double(cells[pos_idx[d]], row);
    b.pos.push_back(p);
    if (heading_idx >= 0) b.heading.push_back(wrap_angle(parse_double(cells[heading_idx], row)));
  }
  if (order.empty()) throw SchemaError("'" + path + "' has no data rows");

  std::vector<RawTrajectory> out;
  for (const auto &id : order) {
    Block &b = blocks[id];
    if (b.t.size() < 2)
      throw ValidationError("demo '" + id + "' has " + std::to_string(b.t.size()) +
                            " samples, need at least 2");
    RawTrajectory traj;
    traj.t = b.t;
    traj.pos.resize(pos_idx.size(), b.t.size());
    for (size_t n = 0; n < b.t.size(); ++n) traj.pos.col(n) = b.pos[n];
    traj.heading = b.heading;
    out.push_back(std::move(traj));
  }
  return out;
}

void save_csv(const std::string &path, const std::vector<RawTrajectory> &trajs,
              const std::vector<std::string> &comment_lines) {
  if (trajs.empty()) throw ValidationError("no trajectories to save");
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path + "'");

  for (const auto &c : comment_lines) out << "# " << c << "\n";
  int d_pos = static_cast<int>(trajs[0].pos.rows());
  bool heading = trajs[0].has_heading();
  out << "demo,t";
  for (int d = 1; d <= d_pos; ++d) out << ",x" << d;
  if (heading) out << ",heading";
  out << "\n";

  for (size_t m = 0; m < trajs.size(); ++m) {
    const RawTrajectory &traj = trajs[m];
    if (traj.pos.rows() != d_pos || traj.has_heading() != heading)
      throw ValidationError("trajectories disagree on state layout");
    for (int n = 0; n < traj.samples(); ++n) {
      out << m << ',' << fmt_double(traj.t[n]);
      for (int d = 0; d < d_pos; ++d) out << ',' << fmt_double(traj.pos(d, n));
      if (heading) out << ',' << fmt_double(traj.heading[n]);
      out << "\n";
    }
  }
}

RawTrajectory planarize(const RawTrajectory &traj, double lon0, double lat0) {
  if (traj.pos.rows() != 2)
    throw ValidationError("planarize needs lon/lat positions, got " +
                          std::to_string(traj.pos.rows()) + " axes");
  RawTrajectory out = traj;
  double k_east = kEarthRadius * std::cos(lat0 * kDegToRad) * kDegToRad;
  double k_north = kEarthRadius * kDegToRad;
  for (int n = 0; n < traj.samples(); ++n) {
    double dlon = traj.pos(0, n) - lon0;
    double dlat = traj.pos(1, n) - lat0;
    if (std::abs(dlon) > 1.0 || std::abs(dlat) > 1.0)
      throw ValidationError("sample " + std::to_string(n) +
                            " farther than 1 degree from projection origin");
    out.pos(0, n) = k_east * dlon;
    out.pos(1, n) = k_north * dlat;
  }
  return out;
}

RawTrajectory unplanarize(const RawTrajectory &traj, double lon0, double lat0) {
  if (traj.pos.rows() != 2)
    throw ValidationError("unplanarize needs east/north positions, got " +
                          std::to_string(traj.pos.rows()) + " axes");
  RawTrajectory out = traj;
  double k_east = kEarthRadius * std::cos(lat0 * kDegToRad) * kDegToRad;
  double k_north = kEarthRadius * kDegToRad;
  for (int n = 0; n < traj.samples(); ++n) {
    out.pos(0, n) = lon0 + traj.pos(0, n) / k_east;
    out.pos(1, n) = lat0 + traj.pos(1, n) / k_north;
  }
  return out;
}

std::pair<std::vector<RawTrajectory>, Vec> shift_to_origin(std::vector<RawTrajectory> trajs) {
  if (trajs.empty()) throw ValidationError("shift_to_origin on empty trajectory list");
  int d_pos = static_cast<int>(trajs[0].pos.rows());
  bool heading = trajs[0].has_heading();
  for (const auto &tr : trajs)
    if (tr.pos.rows() != d_pos || tr.has_heading() != heading)
      throw ValidationError("trajectories disagree on state layout");

  Vec shift = Vec::Zero(d_pos + (heading ? 1 : 0));
  for (const auto &tr : trajs) shift.head(d_pos) += tr.pos.col(tr.samples() - 1);
  shift.head(d_pos) /= static_cast<double>(trajs.size());

  if (heading) {
    // Circular mean of final headings; a plain mean of wrapped values is
    // meaningless when demos end near +-pi.
    double s = 0.0, c = 0.0;
    for (const auto &tr : trajs) {
      s += std::sin(tr.heading.back());
      c += std::cos(tr.heading.back());
    }
    shift[d_pos] = std::atan2(s, c);
  }

  for (auto &tr : trajs) {
    tr.pos.colwise() -= shift.head(d_pos);
    if (heading)
      for (double &h : tr.heading) h = wrap_angle(h - shift[d_pos]);
  }
  return {std::move(trajs), std::move(shift)};
}

Demonstration differentiate(const RawTrajectory &traj) {
  int n = traj.samples();
  if (n < 3)
    throw ValidationError("differentiate needs at least 3 samples, got " + std::to_string(n));
  for (int i = 1; i < n; ++i)
    if (traj.t[i] - traj.t[i - 1] < 1e-9)
      throw ValidationError("degenerate sampling: time step below 1e-9 s at sample " +
                            std::to_string(i + 1));
  int d = traj.dim();

  Demonstration demo;
  demo.t = traj.t;
  demo.heading_last = traj.has_heading();
  demo.x.resize(d, n);
  demo.x.topRows(traj.pos.rows()) = traj.pos;

  if (demo.heading_last) {
    // Unwrap backwards from the final sample so the channel is continuous
    // and the endpoint keeps its wrapped value (near 0 after the shift).
    int h = d - 1;
    demo.x(h, n - 1) = traj.heading[n - 1];
    for (int i = n - 2; i >= 0; --i)
      demo.x(h, i) = demo.x(h, i + 1) - wrap_angle(traj.heading[i + 1] - traj.heading[i]);
  }

  demo.v.resize(d, n);
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, i - 1);
    int hi = std::min(n - 1, i + 1);
    demo.v.col(i) = (demo.x.col(hi) - demo.x.col(lo)) / (traj.t[hi] - traj.t[lo]);
  }
  return demo;
}

Demonstration correct_endpoints(const Demonstration &demo, const Vec &target, double r_corr) {
  if (target.size() != demo.dim())
    throw ValidationError("target dimension " + std::to_string(target.size()) +
                          " does not match state dimension " + std::to_string(demo.dim()));
  int n = demo.samples();
  Vec gap = target - demo.x.col(n - 1);
  if (gap.norm() > r_corr)
    throw ValidationError("endpoint " + fmt_double(gap.norm()) +
                          " from target exceeds correction radius " + fmt_double(r_corr));

  Demonstration out = demo;
  for (int i = 0; i < n; ++i)
    out.x.col(i) = demo.x.col(i) + (static_cast<double>(i) / (n - 1)) * gap;
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, i - 1);
    int hi = std::min(n - 1, i + 1);
    out.v.col(i) = (out.x.col(hi) - out.x.col(lo)) / (demo.t[hi] - demo.t[lo]);
  }
  return out;
}

Demonstration to_polar(const Demonstration &demo) {
  if (!demo.heading_last || demo.dim() != 3)
    throw ValidationError("polar reduction needs (x, y, heading) states");
  int n = demo.samples();

  Demonstration out;
  out.t = demo.t;
  out.heading_last = true;
  out.x.resize(2, n);
  for (int i = 0; i < n; ++i) {
    out.x(0, i) = demo.x.col(i).head(2).norm();
    out.x(1, i) = demo.x(2, i);
  }
  out.v.resize(2, n);
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, i - 1);
    int hi = std::min(n - 1, i + 1);
    out.v.col(i) = (out.x.col(hi) - out.x.col(lo)) / (demo.t[hi] - demo.t[lo]);
  }
  return out;
}

namespace {

Dataset assemble(std::vector<Demonstration> demos, DatasetMeta meta, bool normalize,
                 const Vec *fixed_scales) {
  int d = demos[0].dim();
  for (const auto &demo : demos)
    if (demo.dim() != d) throw ValidationError("demonstrations disagree on dimension");

  Vec scales;
  if (fixed_scales) {
    scales = *fixed_scales;  // meta keeps the stored training extent
  } else {
    meta.extent = 0.0;
    for (const auto &demo : demos)
      for (int i = 0; i < demo.samples(); ++i)
        meta.extent = std::max(meta.extent, demo.x.col(i).norm());
    scales = Vec::Ones(d);
    if (normalize) {
      int total = 0;
      for (const auto &demo : demos) total += demo.samples();
      Vec mean = Vec::Zero(d), sq = Vec::Zero(d);
      for (const auto &demo : demos) {
        mean += demo.x.rowwise().sum();
        sq += demo.x.array().square().matrix().rowwise().sum();
      }
      mean /= total;
      for (int a = 0; a < d; ++a) {
        double var = sq[a] / total - mean[a] * mean[a];
        double s = std::sqrt(std::max(var, 0.0));
        if (s > 1e-12) scales[a] = s;
      }
    }
  }
  meta.scales = scales;

  for (auto &demo : demos) {
    demo.x.array().colwise() /= scales.array();
    demo.v.array().colwise() /= scales.array();
  }

  Dataset ds;
  ds.demos = std::move(demos);
  ds.dim = d;
  ds.meta = std::move(meta);
  return ds;
}

Dataset run_pipeline(const std::vector<RawTrajectory> &trajs_in,
                     const std::optional<Eigen::Vector2d> &geo_origin, bool polar, double r_corr,
                     const Vec *fixed_shift, const Vec *fixed_scales, bool normalize,
                     double stored_extent) {
  if (trajs_in.empty()) throw ValidationError("no trajectories to preprocess");

  std::vector<RawTrajectory> trajs = trajs_in;
  DatasetMeta meta;
  if (geo_origin) {
    for (auto &tr : trajs) tr = planarize(tr, (*geo_origin)[0], (*geo_origin)[1]);
    meta.projection = "local-tangent-plane";
    meta.origin_lonlat = geo_origin;
  }

  if (fixed_shift) {
    int d_pos = static_cast<int>(trajs[0].pos.rows());
    bool heading = trajs[0].has_heading();
    if (fixed_shift->size() != d_pos + (heading ? 1 : 0))
      throw ValidationError("stored shift dimension does not match input states");
    for (auto &tr : trajs) {
      tr.pos.colwise() -= fixed_shift->head(d_pos);
      if (heading)
        for (double &h : tr.heading) h = wrap_angle(h - (*fixed_shift)[d_pos]);
    }
    meta.shift = *fixed_shift;
  } else {
    auto [shifted, shift] = shift_to_origin(std::move(trajs));
    trajs = std::move(shifted);
    meta.shift = shift;
  }

  std::vector<Demonstration> demos;
  demos.reserve(trajs.size());
  for (const auto &tr : trajs) {
    Demonstration demo = differentiate(tr);
    demo = correct_endpoints(demo, Vec::Zero(demo.dim()), r_corr);
    if (polar) demo = to_polar(demo);
    demos.push_back(std::move(demo));
  }
  meta.polar = polar;
  meta.extent = stored_extent;
  return assemble(std::move(demos), std::move(meta), normalize, fixed_scales);
}

}  // namespace

Dataset preprocess(const std::vector<RawTrajectory> &trajs, const PreprocessOptions &opts) {
  return run_pipeline(trajs, opts.geo_origin, opts.polar, opts.r_corr, nullptr, nullptr,
                      opts.normalize, 0.0);
}

Dataset preprocess_with_meta(const std::vector<RawTrajectory> &trajs, const DatasetMeta &meta,
                             double r_corr) {
  std::optional<Eigen::Vector2d> geo;
  if (meta.projection == "local-tangent-plane") {
    if (!meta.origin_lonlat) throw ValidationError("projection set but origin_lonlat missing");
    geo = meta.origin_lonlat;
  }
  Dataset ds = run_pipeline(trajs, geo, meta.polar, r_corr, &meta.shift, &meta.scales, false,
                            meta.extent);
  ds.meta.extent = meta.extent;
  return ds;
}

namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Smooth low-frequency jitter: three random sinusoids per axis.
struct SmoothNoise {
  double a[3], w[3], p[3];
  SmoothNoise(Rng &rng, double std) {
    for (int j = 0; j < 3; ++j) {
      a[j] = rng.normal() * std / std::sqrt(3.0);
      w[j] = kPi * (1.0 + 3.0 * rng.uniform());
      p[j] = 2.0 * kPi * rng.uniform();
    }
  }
  double operator()(double tau) const {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) s += a[j] * std::sin(w[j] * tau + p[j]);
    return s;
  }
};

}  // namespace

std::vector<RawTrajectory> generate_synthetic(const std::string &shape, int demos, int samples,
                                              double noise_std, uint64_t seed, bool with_heading) {
  if (demos < 1) throw ValidationError("need at least 1 demonstration");
  if (samples < 8) throw ValidationError("need at least 8 samples per demonstration");
  if (shape != "line" && shape != "arc" && shape != "s-curve" && shape != "port-approach")
    throw ValidationError("unknown shape '" + shape + "'");

  const double total_time = 200.0;
  Rng rng(seed);
  std::vector<RawTrajectory> out;

  for (int m = 0; m < demos; ++m) {
    SmoothNoise nx(rng, noise_std), ny(rng, noise_std);
    double scurve_amp = 40.0 + 4.0 * (m - (demos - 1) / 2.0);
    double spiral_bearing = 0.12 * (m - (demos - 1) / 2.0);

    RawTrajectory traj;
    traj.t.resize(samples);
    traj.pos.resize(2, samples);
    for (int n = 0; n < samples; ++n) {
      double tau = static_cast<double>(n) / (samples - 1);
      traj.t[n] = total_time * tau;
      double px, py;
      if (shape == "line") {
        double s = smoothstep(tau);
        px = 100.0 * (1.0 - s);
        py = 100.0 * (1.0 - s);
      } else if (shape == "arc") {
        double phi = 0.5 * kPi * (1.0 - smoothstep(tau));
        px = 100.0 * std::sin(phi);
        py = 100.0 * (1.0 - std::cos(phi));
      } else if (shape == "s-curve") {
        double s = smoothstep(tau);
        px = 200.0 * (1.0 - s);
        py = scurve_amp * std::sin(2.0 * kPi * s) * (1.0 - s);
      } else {  // port-approach: spiral entry, speed sustained until the end
        double r = 650.0 * std::pow(1.0 - tau, 1.15);
        double psi = 2.6 * (1.0 - tau) + spiral_bearing;
        px = r * std::cos(psi);
        py = r * std::sin(psi);
      }
      traj.pos(0, n) = px + nx(tau);
      traj.pos(1, n) = py + ny(tau);
    }

    if (with_heading) {
      traj.heading.resize(samples);
      for (int n = 0; n < samples; ++n) {
        int lo = std::max(0, n - 1);
        int hi = std::min(samples - 1, n + 1);
        Eigen::Vector2d sec = traj.pos.col(hi) - traj.pos.col(lo);
        traj.heading[n] = std::atan2(sec[1], sec[0]);
      }
    }
    out.push_back(std::move(traj));
  }
  return out;
}

void save_dataset_json(const std::string &path, const Dataset &ds,
                       const std::string &generator_config) {
  nlohmann::json j;
  j["format"] = "stabledyn-dataset/1";
  j["generator"] = {{"tool", kToolName}, {"version", kVersion}, {"config", generator_config}};
  j["dim"] = ds.dim;

  nlohmann::json meta;
  meta["projection"] = ds.meta.projection;
  if (ds.meta.origin_lonlat)
    meta["origin_lonlat"] = {(*ds.meta.origin_lonlat)[0], (*ds.meta.origin_lonlat)[1]};
  else
    meta["origin_lonlat"] = nullptr;
  meta["shift"] = std::vector<double>(ds.meta.shift.begin(), ds.meta.shift.end());
  meta["scales"] = std::vector<double>(ds.meta.scales.begin(), ds.meta.scales.end());
  meta["polar"] = ds.meta.polar;
  meta["extent"] = ds.meta.extent;
  j["meta"] = meta;

  nlohmann::json demos = nlohmann::json::array();
  for (const auto &demo : ds.demos) {
    nlohmann::json points = nlohmann::json::array();
    for (int i = 0; i < demo.samples(); ++i) {
      nlohmann::json p;
      p["x"] = std::vector<double>(demo.x.col(i).begin(), demo.x.col(i).end());
      p["v"] = std::vector<double>(demo.v.col(i).begin(), demo.v.col(i).end());
      points.push_back(std::move(p));
    }
    demos.push_back(std::move(points));
  }
  j["demos"] = std::move(demos);

  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

void stack_columns(const Dataset &ds, Mat &states, Mat &velocities) {
  int total = ds.total_samples();
  states.resize(ds.dim, total);
  velocities.resize(ds.dim, total);
  int at = 0;
  for (const auto &demo : ds.demos) {
    states.middleCols(at, demo.samples()) = demo.x;
    velocities.middleCols(at, demo.samples()) = demo.v;
    at += demo.samples();
  }
}

Mat joint_matrix(const Dataset &ds) {
  Mat x, v;
  stack_columns(ds, x, v);
  Mat joint(2 * ds.dim, x.cols());
  joint.topRows(ds.dim) = x;
  joint.bottomRows(ds.dim) = v;
  return joint;
}

}  // namespace stabledyn
