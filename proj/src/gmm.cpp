#include "stabledyn/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stabledyn/parallel.hpp"

namespace stabledyn {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112353;

void check_model_data(const GmmModel &model, const Mat &data) {
  if (model.K() == 0) throw ValidationError("mixture has no components");
  if (data.rows() != model.joint_dim())
    throw ValidationError("datapoint dimension " + std::to_string(data.rows()) +
                          " does not match joint dimension " + std::to_string(model.joint_dim()));
}

// Cholesky factors and log-normalizers, precomputed once per model.
struct MixtureEval {
  int J = 0;
  Mat means;               // J x K
  Vec logw;                // log prior + log normalizer
  std::vector<Mat> chol_l;

  explicit MixtureEval(const GmmModel &model) {
    J = model.joint_dim();
    int K = model.K();
    means.resize(J, K);
    logw.resize(K);
    chol_l.reserve(K);
    for (int k = 0; k < K; ++k) {
      const auto &c = model.comps[k];
      if (c.mean.size() != J || c.cov.rows() != J || c.cov.cols() != J)
        throw ValidationError("component " + std::to_string(k) + " has inconsistent dimensions");
      Eigen::LLT<Mat> llt(c.cov);
      if (llt.info() != Eigen::Success)
        throw ValidationError("component " + std::to_string(k) +
                              " covariance is not positive definite");
      chol_l.push_back(llt.matrixL());
      means.col(k) = c.mean;
      double logdet_half = chol_l.back().diagonal().array().log().sum();
      logw[k] = std::log(c.prior) - 0.5 * J * kLog2Pi - logdet_half;
    }
  }

  // Unnormalized log posterior weights for one datapoint.
  void log_weights(const Eigen::Ref<const Vec> &z, double *w, Vec &scratch) const {
    for (int k = 0; k < means.cols(); ++k) {
      scratch = z - means.col(k);
      chol_l[k].triangularView<Eigen::Lower>().solveInPlace(scratch);
      w[k] = logw[k] - 0.5 * scratch.squaredNorm();
    }
  }
};

double log_sum_exp(const double *w, int K) {
  double m = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) m = std::max(m, w[k]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (int k = 0; k < K; ++k) s += std::exp(w[k] - m);
  return m + std::log(s);
}

void responsibility_row(const double *w, int K, double lse, double *out) {
  if (!std::isfinite(lse)) {
    for (int k = 0; k < K; ++k) out[k] = 1.0 / K;
    return;
  }
  for (int k = 0; k < K; ++k) out[k] = std::exp(w[k] - lse);
}

}  // namespace

Mat e_step(const GmmModel &model, const Mat &data) {
  check_model_data(model, data);
  MixtureEval eval(model);
  int n = static_cast<int>(data.cols());
  int K = model.K();
  Mat resp(n, K);

  std::vector<Vec> scratch(max_threads(), Vec(eval.J));
  std::vector<Vec> wbuf(max_threads(), Vec(K));
  std::vector<Vec> rowbuf(max_threads(), Vec(K));
  parallel_for(n, [&](std::ptrdiff_t i) {
    int tid = thread_index();
    Vec &w = wbuf[tid];
    Vec &row = rowbuf[tid];
    eval.log_weights(data.col(i), w.data(), scratch[tid]);
    double lse = log_sum_exp(w.data(), K);
    responsibility_row(w.data(), K, lse, row.data());
    for (int k = 0; k < K; ++k) resp(i, k) = row[k];
  });
  return resp;
}

Mat e_step_serial(const GmmModel &model, const Mat &data) {
  check_model_data(model, data);
  MixtureEval eval(model);
  int n = static_cast<int>(data.cols());
  int K = model.K();
  Mat resp(n, K);
  Vec scratch(eval.J), w(K), row(K);
  for (int i = 0; i < n; ++i) {
    eval.log_weights(data.col(i), w.data(), scratch);
    double lse = log_sum_exp(w.data(), K);
    responsibility_row(w.data(), K, lse, row.data());
    for (int k = 0; k < K; ++k) resp(i, k) = row[k];
  }
  return resp;
}

double log_likelihood(const GmmModel &model, const Mat &data) {
  check_model_data(model, data);
  MixtureEval eval(model);
  int n = static_cast<int>(data.cols());
  int K = model.K();
  Vec per_point(n);

  std::vector<Vec> scratch(max_threads(), Vec(eval.J));
  std::vector<Vec> wbuf(max_threads(), Vec(K));
  parallel_for(n, [&](std::ptrdiff_t i) {
    Vec &w = wbuf[thread_index()];
    eval.log_weights(data.col(i), w.data(), scratch[thread_index()]);
    per_point[i] = log_sum_exp(w.data(), K);
  });

  double total = 0.0;
  for (int i = 0; i < n; ++i) total += per_point[i];
  return total;
}

double log_likelihood_serial(const GmmModel &model, const Mat &data) {
  check_model_data(model, data);
  MixtureEval eval(model);
  int n = static_cast<int>(data.cols());
  int K = model.K();
  Vec scratch(eval.J), w(K);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    eval.log_weights(data.col(i), w.data(), scratch);
    total += log_sum_exp(w.data(), K);
  }
  return total;
}

GmmModel m_step(const Mat &resp, const Mat &data, const GmmModel &prev,
                std::vector<int> *frozen) {
  check_model_data(prev, data);
  int n = static_cast<int>(data.cols());
  int K = prev.K();
  int J = prev.joint_dim();
  if (resp.rows() != n || resp.cols() != K)
    throw ValidationError("responsibility matrix shape does not match data and mixture");

  GmmModel out;
  out.dim = prev.dim;
  out.comps.resize(K);

  for (int k = 0; k < K; ++k) {
    double gamma_sum = resp.col(k).sum();
    if (gamma_sum < 1e-12) {
      out.comps[k] = prev.comps[k];
      if (frozen) frozen->push_back(k);
      continue;
    }
    Vec mean = (data * resp.col(k)) / gamma_sum;
    Mat centered = data.colwise() - mean;
    Mat cov = (centered * resp.col(k).asDiagonal() * centered.transpose()) / gamma_sum;
    cov = 0.5 * (cov + cov.transpose());

    double floor = 1e-6 * cov.trace() / J;
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    Vec ev = es.eigenvalues();
    if (floor <= 0.0) floor = 1e-12;
    bool clamped = false;
    for (int i = 0; i < J; ++i)
      if (ev[i] < floor) {
        ev[i] = floor;
        clamped = true;
      }
    if (clamped) cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();

    out.comps[k].prior = gamma_sum / n;
    out.comps[k].mean = std::move(mean);
    out.comps[k].cov = std::move(cov);
  }

  double prior_sum = 0.0;
  for (const auto &c : out.comps) prior_sum += c.prior;
  for (auto &c : out.comps) c.prior /= prior_sum;
  return out;
}

GmmModel kmeans_init(const Mat &data, int K, uint64_t seed) {
  int n = static_cast<int>(data.cols());
  int J = static_cast<int>(data.rows());
  if (J % 2 != 0) throw ValidationError("joint datapoints must have even dimension");
  if (K < 1) throw ValidationError("need at least one component");
  if (n < K)
    throw ValidationError("need at least " + std::to_string(K) + " datapoints, got " +
                          std::to_string(n));

  Rng rng(seed);
  Mat centroids(J, K);

  // kmeans++ seeding
  centroids.col(0) = data.col(rng.uniform_int(n));
  Vec dist2 = (data.colwise() - centroids.col(0)).colwise().squaredNorm().transpose();
  for (int k = 1; k < K; ++k) {
    double total = dist2.sum();
    int pick;
    if (total <= 0.0) {
      pick = static_cast<int>(rng.uniform_int(n));
    } else {
      double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    }
    centroids.col(k) = data.col(pick);
    dist2 = dist2.cwiseMin((data.colwise() - centroids.col(k)).colwise().squaredNorm().transpose());
  }

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (data.col(i) - centroids.col(0)).squaredNorm();
      for (int k = 1; k < K; ++k) {
        double d = (data.col(i) - centroids.col(k)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }

    std::vector<int> counts(K, 0);
    for (int i = 0; i < n; ++i) counts[assign[i]]++;
    for (int k = 0; k < K; ++k) {
      if (counts[k] > 0) continue;
      // re-seed at the datapoint farthest from its centroid
      int far = 0;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        double d = (data.col(i) - centroids.col(assign[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centroids.col(k) = data.col(far);
      assign[far] = k;
      counts[k] = 1;
      changed = true;
    }

    centroids.setZero();
    for (int i = 0; i < n; ++i) centroids.col(assign[i]) += data.col(i);
    for (int k = 0; k < K; ++k) centroids.col(k) /= counts[k];
    if (!changed && iter > 0) break;
  }

  // global covariance trace sets the regularization floor
  Vec gmean = data.rowwise().mean();
  double gtrace = (data.colwise() - gmean).colwise().squaredNorm().sum() / n;
  double eps = 1e-6 * gtrace / J;
  if (eps <= 0.0) eps = 1e-12;

  GmmModel model;
  model.dim = J / 2;
  model.comps.resize(K);
  std::vector<int> counts(K, 0);
  for (int i = 0; i < n; ++i) counts[assign[i]]++;
  for (int k = 0; k < K; ++k) {
    model.comps[k].prior = static_cast<double>(counts[k]) / n;
    model.comps[k].mean = centroids.col(k);
    Mat cov = Mat::Zero(J, J);
    for (int i = 0; i < n; ++i) {
      if (assign[i] != k) continue;
      Vec r = data.col(i) - centroids.col(k);
      cov += r * r.transpose();
    }
    cov /= counts[k];
    model.comps[k].cov = cov + eps * Mat::Identity(J, J);
  }
  return model;
}

std::pair<GmmModel, EmReport> fit_em(const Mat &data, int K, uint64_t seed, double tol,
                                     int max_iter) {
  GmmModel model = kmeans_init(data, K, seed);
  EmReport report;

  double ll_prev = -std::numeric_limits<double>::infinity();
  bool stepped = false;
  for (int iter = 0; iter < max_iter; ++iter) {
    double ll = log_likelihood(model, data);
    report.loglik.push_back(ll);
    if (stepped && std::abs(ll - ll_prev) / std::max(1.0, std::abs(ll)) < tol) {
      report.converged = true;
      return {model, report};
    }
    ll_prev = ll;
    Mat resp = e_step(model, data);
    model = m_step(resp, data, model, &report.frozen);
    stepped = true;
    report.iterations = iter + 1;
  }
  report.loglik.push_back(log_likelihood(model, data));
  return {model, report};
}

}  // namespace stabledyn
