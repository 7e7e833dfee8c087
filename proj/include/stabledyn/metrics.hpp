#pragma once

#include <string>
#include <vector>

#include "stabledyn/learn.hpp"
#include "stabledyn/sim.hpp"

namespace stabledyn {

// Area of the quadrilateral with vertex cycle p1 -> p2 -> q2 -> q1. A
// self-intersecting (bowtie) cycle is split at the crossing into two
// triangles; otherwise the shoelace formula applies.
double tetragon_area(const Eigen::Vector2d &p1, const Eigen::Vector2d &p2,
                     const Eigen::Vector2d &q2, const Eigen::Vector2d &q1);

struct SeaResult {
  double area = 0.0;
  std::vector<double> per_segment;
  std::vector<double> params;  // common normalized arc-length grid used
};

// Swept-error area between two 2D polylines (2 x n matrices). Both are
// resampled at a common normalized arc-length grid: the union of the two
// polylines' own knots and a uniform grid with resolution
// + 1 values, which makes the resampling exact for polyline inputs.
SeaResult sea(const Mat &demo, const Mat &estimate, int resolution = 200);

// sqrt(2 J): RMS closed-loop velocity error of the model over a dataset, in
// the model's normalized units.
double velocity_rmse(const StableModel &model, const Dataset &ds);

struct TrajectoryEval {
  double sea = 0.0;
  double rmse = 0.0;
  bool reached_target = false;
  int steps = 0;
};

struct EvalReport {
  std::vector<TrajectoryEval> per_trajectory;
  double total_sea = 0.0;
  double rmse = 0.0;  // whole-dataset value
  int reached = 0;
};

// Rolls out from each demonstration start and scores the reproductions. SEA
// uses the first two state axes in physical units.
EvalReport evaluate(const StableModel &model, const Dataset &ds, const RolloutOptions &opts);

void save_eval_report_json(const std::string &path, const EvalReport &report,
                           const std::string &generator_config);

}  // namespace stabledyn
