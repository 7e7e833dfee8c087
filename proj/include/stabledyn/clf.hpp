#pragma once

#include <vector>

#include "stabledyn/common.hpp"

namespace stabledyn {

// Control-Lyapunov candidate: a weighted sum of asymmetric quadratics,
//   V(x) = x^T P0 x + sum_l sign+(sigma_l) * sigma_l(x)^2
//   sigma_l(x) = x^T P_l (x - mu_l),   sign+(s) = 0 if s < 0, else 1.
// Every P is SPD by construction: P = G G^T + eps I with G lower triangular,
// so any parameter vector yields a valid candidate (V(0) = 0, V > 0 away
// from the origin, x^T grad V > 0).
struct ClfParams {
  static constexpr double kEps = 1e-8;

  int dim = 0;
  int L = 0;                 // asymmetric terms beyond P0
  std::vector<Mat> factors;  // L+1 lower-triangular G, factors[0] for P0
  Mat centers;               // d x L

  Mat P(int l) const;

  // G = sqrt(1 - eps) * I for every term, centers at the origin; P is then
  // exactly the identity and V(x) = |x|^2 + L * |x|^4.
  static ClfParams identity(int dim, int L);

  // Factor explicit SPD matrices; each must have min eigenvalue above kEps.
  static ClfParams from_matrices(const std::vector<Mat> &P, const Mat &centers);
};

// Materialized evaluator; build once per parameter vector.
class ClfFunction {
 public:
  explicit ClfFunction(const ClfParams &params);

  int dim() const { return d_; }

  struct Scratch {
    Vec r, t;
    explicit Scratch(const ClfFunction &f) : r(f.d_), t(f.d_) {}
  };

  double value(const Vec &x) const;
  Vec gradient(const Vec &x) const;
  void gradient_into(const Eigen::Ref<const Vec> &x, Scratch &s, Vec &out) const;
  // Shares the sigma_l pass between both results.
  double value_and_gradient(const Eigen::Ref<const Vec> &x, Scratch &s, Vec &grad_out) const;

 private:
  int d_ = 0;
  int L_ = 0;
  std::vector<Mat> P_;
  Mat centers_;
};

}  // namespace stabledyn
