#include "stabledyn/gmr.hpp"

#include <cmath>
#include <limits>

#include "stabledyn/parallel.hpp"

namespace stabledyn {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112353;
}

GmrField::GmrField(const GmmModel &model) : d_(model.dim), K_(model.K()) {
  if (K_ == 0) throw ValidationError("mixture has no components");
  mean_x_.resize(d_, K_);
  offset_.resize(d_, K_);
  logw_.resize(K_);
  chol_xx_.reserve(K_);
  A_.reserve(K_);

  for (int k = 0; k < K_; ++k) {
    Mat cov_xx = model.cov_xx(k);
    Eigen::LLT<Mat> llt(cov_xx);
    if (llt.info() != Eigen::Success)
      throw ValidationError("component " + std::to_string(k) +
                            " state-space covariance is not positive definite");
    chol_xx_.push_back(llt.matrixL());
    A_.push_back((llt.solve(model.cov_xv(k))).transpose());
    mean_x_.col(k) = model.mean_x(k);
    offset_.col(k) = model.mean_v(k) - A_[k] * mean_x_.col(k);
    double logdet_half = chol_xx_[k].diagonal().array().log().sum();
    logw_[k] = std::log(model.comps[k].prior) - 0.5 * d_ * kLog2Pi - logdet_half;
  }
}

void GmrField::weights_into(const Eigen::Ref<const Vec> &x, Scratch &s, Vec &gamma_out) const {
  for (int k = 0; k < K_; ++k) {
    s.r = x - mean_x_.col(k);
    chol_xx_[k].triangularView<Eigen::Lower>().solveInPlace(s.r);
    s.logw[k] = logw_[k] - 0.5 * s.r.squaredNorm();
  }
  double m = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < K_; ++k) m = std::max(m, s.logw[k]);
  if (!std::isfinite(m)) {
    gamma_out.setConstant(K_, 1.0 / K_);
    return;
  }
  double total = 0.0;
  for (int k = 0; k < K_; ++k) total += std::exp(s.logw[k] - m);
  double lse = m + std::log(total);
  for (int k = 0; k < K_; ++k) gamma_out[k] = std::exp(s.logw[k] - lse);
}

Vec GmrField::weights(const Vec &x) const {
  Scratch s(*this);
  Vec gamma(K_);
  weights_into(x, s, gamma);
  return gamma;
}

void GmrField::estimate_into(const Eigen::Ref<const Vec> &x, Scratch &s, Vec &vhat_out) const {
  weights_into(x, s, s.gamma);
  vhat_out.setZero();
  for (int k = 0; k < K_; ++k) {
    s.r.noalias() = A_[k] * x;
    s.r += offset_.col(k);
    vhat_out += s.gamma[k] * s.r;
  }
}

Vec GmrField::estimate(const Vec &x) const {
  if (x.size() != d_)
    throw ValidationError("state dimension " + std::to_string(x.size()) +
                          " does not match field dimension " + std::to_string(d_));
  Scratch s(*this);
  Vec vhat(d_);
  estimate_into(x, s, vhat);
  return vhat;
}

Mat batch_estimate(const GmrField &field, const Mat &states) {
  int n = static_cast<int>(states.cols());
  Mat out(field.dim(), n);
  std::vector<GmrField::Scratch> scratch(max_threads(), GmrField::Scratch(field));
  std::vector<Vec> vbuf(max_threads(), Vec(field.dim()));
  parallel_for(n, [&](std::ptrdiff_t i) {
    int tid = thread_index();
    field.estimate_into(states.col(i), scratch[tid], vbuf[tid]);
    out.col(i) = vbuf[tid];
  });
  return out;
}

Mat batch_estimate_serial(const GmrField &field, const Mat &states) {
  int n = static_cast<int>(states.cols());
  Mat out(field.dim(), n);
  GmrField::Scratch s(field);
  Vec vhat(field.dim());
  for (int i = 0; i < n; ++i) {
    field.estimate_into(states.col(i), s, vhat);
    out.col(i) = vhat;
  }
  return out;
}

}  // namespace stabledyn
