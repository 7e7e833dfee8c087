#pragma once

#include "stabledyn/gmm.hpp"

namespace stabledyn {

// Conditional-mean velocity field of a joint mixture. The per-component
// Cholesky factors and regression matrices are precomputed at construction;
// evaluation is allocation-free when a Scratch is supplied.
class GmrField {
 public:
  explicit GmrField(const GmmModel &model);

  int dim() const { return d_; }
  int K() const { return K_; }

  struct Scratch {
    Vec r, logw, gamma;
    explicit Scratch(const GmrField &f) : r(f.d_), logw(f.K_), gamma(f.K_) {}
  };

  // Posterior weights of x under the state-space marginals; sum to 1. A point
  // whose marginal density underflows under every component gets uniform
  // weights.
  void weights_into(const Eigen::Ref<const Vec> &x, Scratch &s, Vec &gamma_out) const;
  Vec weights(const Vec &x) const;

  // Weighted sum of the per-component conditional means at x.
  void estimate_into(const Eigen::Ref<const Vec> &x, Scratch &s, Vec &vhat_out) const;
  Vec estimate(const Vec &x) const;

 private:
  int d_ = 0;
  int K_ = 0;
  Mat mean_x_;               // d x K
  std::vector<Mat> chol_xx_; // lower factors of the state-space marginals
  std::vector<Mat> A_;       // cov_vx * cov_xx^-1
  Mat offset_;               // d x K, mean_v - A * mean_x
  Vec logw_;                 // log prior + marginal log normalizer
};

// Velocity estimates for every column of states.
Mat batch_estimate(const GmrField &field, const Mat &states);
Mat batch_estimate_serial(const GmrField &field, const Mat &states);

}  // namespace stabledyn
