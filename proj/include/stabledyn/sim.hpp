#pragma once

#include <string>
#include <vector>

#include "stabledyn/learn.hpp"

namespace stabledyn {

enum class DisturbanceKind { none, constant_drift, localized_drift, engine_off };

// External velocity offsets in physical units. constant_drift acts over the
// whole run, localized_drift over [t_start, t_start + duration), and
// engine_off replaces the vessel dynamics by pure drift over its window.
struct Disturbance {
  DisturbanceKind kind = DisturbanceKind::none;
  Vec drift;
  double t_start = 0.0;
  double duration = 0.0;

  bool active_at(double t) const;

  // Spec strings: "none", "drift:vx,vy[,vh]", "localized:t0,dur,vx,vy[,vh]",
  // "engine-off:t0,dur,vx,vy[,vh]". The drift component count must match the
  // model dimension.
  static Disturbance parse(const std::string &spec, int dim);
  std::string describe() const;
};

struct RolloutStep {
  double t;
  Vec x;        // physical units
  Vec v_gmr;    // model estimate, physical units
  Vec u;        // applied correction, physical units
  Vec v_total;  // integrated velocity including any disturbance
  double V;     // energy at x (normalized space, dimensionless)
  bool disturbed;
};

struct RolloutTrace {
  std::vector<RolloutStep> steps;
  bool reached_target = false;
  bool diverged = false;
};

struct RolloutOptions {
  double dt = 0.1;
  int max_steps = 10000;
  bool control_enabled = true;
  Disturbance disturbance;
};

// Explicit Euler integration of the closed-loop field from a physical start
// state. Stops on entering the target ball, on exceeding 1000x the training
// extent, or at max_steps. A start inside the ball yields a one-step trace.
RolloutTrace rollout(const StableModel &model, const Vec &x0, const RolloutOptions &opts);

std::vector<RolloutTrace> streamline_bundle(const StableModel &model,
                                            const std::vector<Vec> &starts,
                                            const RolloutOptions &opts);
std::vector<RolloutTrace> streamline_bundle_serial(const StableModel &model,
                                                   const std::vector<Vec> &starts,
                                                   const RolloutOptions &opts);

// Energy and GMR velocity sampled on an axis-aligned grid (physical
// coordinates; axis 0 varies fastest in the point ordering).
struct EnergyGrid {
  Mat points;  // d x P
  Vec V;       // P
  Mat field;   // d x P
};

EnergyGrid energy_grid(const StableModel &model, const Vec &lo, const Vec &hi,
                       const std::vector<int> &resolution);
EnergyGrid energy_grid_serial(const StableModel &model, const Vec &lo, const Vec &hi,
                              const std::vector<int> &resolution);

// CSV exports: '#' comment lines, then a header row, then data.
void save_trace_csv(const std::string &path, const RolloutTrace &trace,
                    const std::vector<std::string> &comment_lines = {});
void save_grid_csv(const std::string &path, const EnergyGrid &grid,
                   const std::vector<std::string> &comment_lines = {});

}  // namespace stabledyn
