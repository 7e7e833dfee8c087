#pragma once

#include <utility>
#include <vector>

#include "stabledyn/common.hpp"

namespace stabledyn {

struct GaussianComponent {
  double prior = 0.0;
  Vec mean;  // joint [x; v] space, length 2d
  Mat cov;   // 2d x 2d, SPD
};

// Joint mixture over state/velocity pairs. dim is the state dimension d; all
// component parameters live in the 2d joint space.
struct GmmModel {
  int dim = 0;
  std::vector<GaussianComponent> comps;

  int K() const { return static_cast<int>(comps.size()); }
  int joint_dim() const { return 2 * dim; }

  // Block accessors for the [x; v] partition.
  Vec mean_x(int k) const { return comps[k].mean.head(dim); }
  Vec mean_v(int k) const { return comps[k].mean.tail(dim); }
  Mat cov_xx(int k) const { return comps[k].cov.topLeftCorner(dim, dim); }
  Mat cov_vx(int k) const { return comps[k].cov.bottomLeftCorner(dim, dim); }
  Mat cov_xv(int k) const { return comps[k].cov.topRightCorner(dim, dim); }
  Mat cov_vv(int k) const { return comps[k].cov.bottomRightCorner(dim, dim); }
};

struct EmReport {
  std::vector<double> loglik;  // initial value, then after each M-step
  int iterations = 0;          // M-steps performed
  bool converged = false;
  std::vector<int> frozen;  // components held at previous values at least once
};

// K-means with kmeans++ seeding on the joint datapoints (columns of data).
// Empty clusters are re-seeded at the datapoint farthest from its centroid.
GmmModel kmeans_init(const Mat &data, int K, uint64_t seed);

// Responsibilities, one row per datapoint, rows sum to 1. Log-space with
// log-sum-exp; a point whose density underflows under every component gets a
// uniform row.
Mat e_step(const GmmModel &model, const Mat &data);
Mat e_step_serial(const GmmModel &model, const Mat &data);

// Weighted parameter update. A component with responsibility mass below 1e-12
// keeps its previous parameters and is reported in frozen; covariance
// eigenvalues are floored at 1e-6 * trace / (2d). Priors are renormalized to
// sum to exactly 1.
GmmModel m_step(const Mat &resp, const Mat &data, const GmmModel &prev,
                std::vector<int> *frozen = nullptr);

double log_likelihood(const GmmModel &model, const Mat &data);
double log_likelihood_serial(const GmmModel &model, const Mat &data);

// Full EM loop: kmeans_init, then alternate e_step/m_step until the relative
// log-likelihood change drops below tol. The history always ends with the
// log-likelihood of the returned model.
std::pair<GmmModel, EmReport> fit_em(const Mat &data, int K, uint64_t seed, double tol = 1e-6,
                                     int max_iter = 500);

}  // namespace stabledyn
