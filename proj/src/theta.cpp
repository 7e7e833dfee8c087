#include <cmath>

#include "stabledyn/learn.hpp"

namespace stabledyn {

namespace {

// Packed lower-triangular storage, column by column.
void pack_lower(const Mat &g, double *out) {
  int n = static_cast<int>(g.rows());
  int at = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) out[at++] = g(i, j);
}

Mat unpack_lower(const double *in, int n) {
  Mat g = Mat::Zero(n, n);
  int at = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) g(i, j) = in[at++];
  return g;
}

Mat factor_of(const Mat &m, double floor, const char *what) {
  Eigen::LLT<Mat> llt(m - floor * Mat::Identity(m.rows(), m.cols()));
  if (llt.info() != Eigen::Success)
    throw ValidationError(std::string(what) + " is too close to singular to re-factor");
  return llt.matrixL();
}

}  // namespace

Vec encode_theta(const GmmModel &gmm, const ClfParams &clf) {
  if (gmm.dim != clf.dim)
    throw ValidationError("mixture and Lyapunov dimensions disagree");
  ThetaLayout lay{gmm.dim, gmm.K(), clf.L};
  Vec theta(lay.size());

  for (int k = 0; k < lay.K; ++k) theta[lay.off_logits() + k] = std::log(gmm.comps[k].prior);
  for (int k = 0; k < lay.K; ++k)
    theta.segment(lay.off_means() + k * lay.joint(), lay.joint()) = gmm.comps[k].mean;
  for (int k = 0; k < lay.K; ++k) {
    Mat g = factor_of(gmm.comps[k].cov, ThetaLayout::kCovFloor, "component covariance");
    pack_lower(g, theta.data() + lay.off_covs() + k * lay.tri_joint());
  }
  for (int l = 0; l <= lay.L; ++l)
    pack_lower(clf.factors[l], theta.data() + lay.off_clf() + l * lay.tri_d());
  for (int l = 0; l < lay.L; ++l)
    theta.segment(lay.off_centers() + l * lay.d, lay.d) = clf.centers.col(l);
  return theta;
}

void decode_theta(const Vec &theta, const ThetaLayout &lay, GmmModel &gmm, ClfParams &clf) {
  if (theta.size() != lay.size())
    throw ValidationError("parameter vector has length " + std::to_string(theta.size()) +
                          ", layout needs " + std::to_string(lay.size()));

  gmm.dim = lay.d;
  gmm.comps.assign(lay.K, {});

  // softmax with max shift; exact inverse of encode up to float rounding
  double m = theta.segment(lay.off_logits(), lay.K).maxCoeff();
  double z = 0.0;
  for (int k = 0; k < lay.K; ++k) z += std::exp(theta[lay.off_logits() + k] - m);
  for (int k = 0; k < lay.K; ++k)
    gmm.comps[k].prior = std::exp(theta[lay.off_logits() + k] - m) / z;

  for (int k = 0; k < lay.K; ++k) {
    gmm.comps[k].mean = theta.segment(lay.off_means() + k * lay.joint(), lay.joint());
    Mat g = unpack_lower(theta.data() + lay.off_covs() + k * lay.tri_joint(), lay.joint());
    gmm.comps[k].cov = g * g.transpose() +
                       ThetaLayout::kCovFloor * Mat::Identity(lay.joint(), lay.joint());
  }

  clf.dim = lay.d;
  clf.L = lay.L;
  clf.factors.clear();
  for (int l = 0; l <= lay.L; ++l)
    clf.factors.push_back(unpack_lower(theta.data() + lay.off_clf() + l * lay.tri_d(), lay.d));
  clf.centers.resize(lay.d, lay.L);
  for (int l = 0; l < lay.L; ++l)
    clf.centers.col(l) = theta.segment(lay.off_centers() + l * lay.d, lay.d);
}

}  // namespace stabledyn
