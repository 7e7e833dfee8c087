#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stabledyn/common.hpp"

namespace stabledyn {

// One recorded run: positions (and optionally a heading channel) over time.
struct RawTrajectory {
  std::vector<double> t;        // strictly increasing sample times
  Mat pos;                      // d_pos x N
  std::vector<double> heading;  // empty, or N angles wrapped to (-pi, pi]

  int samples() const { return static_cast<int>(t.size()); }
  bool has_heading() const { return !heading.empty(); }
  int dim() const { return static_cast<int>(pos.rows()) + (has_heading() ? 1 : 0); }
};

// A differentiated trajectory: state and velocity per sample. When
// heading_last is set, the last state row is an angle channel, stored
// unwrapped (continuous) so downstream vector-space operations are valid.
struct Demonstration {
  std::vector<double> t;
  Mat x;  // d x N
  Mat v;  // d x N
  bool heading_last = false;

  int samples() const { return static_cast<int>(t.size()); }
  int dim() const { return static_cast<int>(x.rows()); }
};

struct DatasetMeta {
  std::string projection = "none";  // "none" | "local-tangent-plane"
  std::optional<Eigen::Vector2d> origin_lonlat;
  Vec shift;           // subtracted from raw states so the target sits at 0
  Vec scales;          // per-axis divisor applied after the shift; ones = off
  bool polar = false;
  double extent = 0.0;  // max |x| over the shifted, unscaled demos
};

struct Dataset {
  std::vector<Demonstration> demos;
  int dim = 0;
  DatasetMeta meta;

  int total_samples() const {
    int n = 0;
    for (const auto &d : demos) n += d.samples();
    return n;
  }
};

struct CsvSchema {
  std::string demo_col = "demo";
  std::string t_col = "t";
  std::string pos_prefix = "x";  // position columns x1..xd
  std::string heading_col = "heading";
};

std::vector<RawTrajectory> load_csv(const std::string &path, const CsvSchema &schema = {});
void save_csv(const std::string &path, const std::vector<RawTrajectory> &trajs,
              const std::vector<std::string> &comment_lines = {});

// Local tangent-plane projection of (lon, lat) degrees to east/north meters.
// Every sample must lie within 1 degree of the origin.
RawTrajectory planarize(const RawTrajectory &traj, double lon0, double lat0);
RawTrajectory unplanarize(const RawTrajectory &traj, double lon0, double lat0);

// Translate all trajectories so the mean final state is the origin. Position
// axes subtract the mean final position; the heading channel subtracts the
// circular mean of final headings and stays wrapped. Returns the shift.
std::pair<std::vector<RawTrajectory>, Vec> shift_to_origin(std::vector<RawTrajectory> trajs);

// Central differences over possibly nonuniform time, one-sided at the ends.
// Heading deltas are wrapped to (-pi, pi]; the exported heading states are
// the continuous unwrap anchored at the final sample.
Demonstration differentiate(const RawTrajectory &traj);

// Linear-in-index warp that pins the final state to the target exactly and
// re-derives velocities from the warped states. Rejects endpoints farther
// than r_corr from the target.
Demonstration correct_endpoints(const Demonstration &demo, const Vec &target, double r_corr);

// Reduce a planar state with heading (x, y, heading) to (rho, theta) with
// rho = distance to the origin target and theta = heading. Velocities are
// re-derived from the reduced states.
Demonstration to_polar(const Demonstration &demo);

struct PreprocessOptions {
  std::optional<Eigen::Vector2d> geo_origin;  // lon, lat; enables planarize
  bool polar = false;
  bool normalize = true;  // per-axis std scaling
  double r_corr = 10.0;   // endpoint correction radius
};

// Full pipeline: [planarize] -> shift_to_origin -> differentiate ->
// correct_endpoints -> [to_polar] -> [scale normalization].
Dataset preprocess(const std::vector<RawTrajectory> &trajs, const PreprocessOptions &opts);

// Same pipeline but re-applying a stored frame (shift, scales, flags) instead
// of re-estimating it, so new data lands in an existing model's coordinates.
Dataset preprocess_with_meta(const std::vector<RawTrajectory> &trajs, const DatasetMeta &meta,
                             double r_corr = 10.0);

// Synthetic demonstration sets converging on the origin. Shapes: "line",
// "arc", "s-curve" (eased speed profiles), "port-approach" (spiral entry with
// sustained speed). Noise is smooth low-frequency jitter of the given
// amplitude in meters.
std::vector<RawTrajectory> generate_synthetic(const std::string &shape, int demos, int samples,
                                              double noise_std, uint64_t seed, bool with_heading);

void save_dataset_json(const std::string &path, const Dataset &ds,
                       const std::string &generator_config);

// Column-stacked views used by learning: states and velocities of all demos.
void stack_columns(const Dataset &ds, Mat &states, Mat &velocities);
// Joint [x; v] columns, 2d x total_samples.
Mat joint_matrix(const Dataset &ds);

// Shortest round-trip decimal form; the only float formatter used in files.
std::string fmt_double(double value);

}  // namespace stabledyn
