#include "stabledyn/clf.hpp"

#include <cmath>

namespace stabledyn {

Mat ClfParams::P(int l) const {
  const Mat &g = factors[l];
  return g * g.transpose() + kEps * Mat::Identity(dim, dim);
}

ClfParams ClfParams::identity(int dim, int L) {
  if (dim < 1) throw ValidationError("dimension must be positive");
  if (L < 0) throw ValidationError("number of asymmetric terms must be non-negative");
  ClfParams p;
  p.dim = dim;
  p.L = L;
  p.factors.assign(L + 1, std::sqrt(1.0 - kEps) * Mat::Identity(dim, dim));
  p.centers = Mat::Zero(dim, L);
  return p;
}

ClfParams ClfParams::from_matrices(const std::vector<Mat> &P, const Mat &centers) {
  if (P.empty()) throw ValidationError("need at least the base matrix");
  int d = static_cast<int>(P[0].rows());
  int L = static_cast<int>(P.size()) - 1;
  if (centers.rows() != d || centers.cols() != L)
    throw ValidationError("centers must be " + std::to_string(d) + " x " + std::to_string(L));

  ClfParams out;
  out.dim = d;
  out.L = L;
  out.centers = centers;
  for (const auto &m : P) {
    if (m.rows() != d || m.cols() != d) throw ValidationError("matrices disagree on dimension");
    Eigen::LLT<Mat> llt(m - kEps * Mat::Identity(d, d));
    if (llt.info() != Eigen::Success)
      throw ValidationError("matrix is not positive definite beyond the parameterization floor");
    out.factors.push_back(llt.matrixL());
  }
  return out;
}

ClfFunction::ClfFunction(const ClfParams &params) : d_(params.dim), L_(params.L) {
  if (static_cast<int>(params.factors.size()) != L_ + 1)
    throw ValidationError("parameter block count does not match L");
  P_.reserve(L_ + 1);
  for (int l = 0; l <= L_; ++l) P_.push_back(params.P(l));
  centers_ = params.centers;
}

double ClfFunction::value(const Vec &x) const {
  double v = x.dot(P_[0] * x);
  for (int l = 1; l <= L_; ++l) {
    double sigma = x.dot(P_[l] * (x - centers_.col(l - 1)));
    if (sigma >= 0.0) v += sigma * sigma;
  }
  return v;
}

double ClfFunction::value_and_gradient(const Eigen::Ref<const Vec> &x, Scratch &s,
                                       Vec &grad_out) const {
  grad_out.noalias() = (P_[0] + P_[0].transpose()) * x;
  double v = x.dot(P_[0] * x);
  for (int l = 1; l <= L_; ++l) {
    s.r = x - centers_.col(l - 1);
    s.t.noalias() = P_[l] * s.r;
    double sigma = x.dot(s.t);
    if (sigma < 0.0) continue;
    v += sigma * sigma;
    s.t.noalias() += P_[l].transpose() * x;
    grad_out += 2.0 * sigma * s.t;
  }
  return v;
}

void ClfFunction::gradient_into(const Eigen::Ref<const Vec> &x, Scratch &s, Vec &out) const {
  value_and_gradient(x, s, out);
}

Vec ClfFunction::gradient(const Vec &x) const {
  if (x.size() != d_)
    throw ValidationError("state dimension " + std::to_string(x.size()) +
                          " does not match function dimension " + std::to_string(d_));
  Scratch s(*this);
  Vec g(d_);
  value_and_gradient(x, s, g);
  return g;
}

}  // namespace stabledyn
