#include "stabledyn/model_io.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace stabledyn {

namespace {

using nlohmann::json;

json matrix_to_json(const Mat &m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat matrix_from_json(const json &j, int rows, int cols, const std::string &what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw SchemaError(what + " must be a " + std::to_string(rows) + "-row array");
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json &row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw SchemaError(what + " row " + std::to_string(i) + " must have " +
                        std::to_string(cols) + " entries");
    for (int c = 0; c < cols; ++c) m(i, c) = row[c].get<double>();
  }
  return m;
}

Vec vector_from_json(const json &j, int size, const std::string &what) {
  if (!j.is_array() || static_cast<int>(j.size()) != size)
    throw SchemaError(what + " must have " + std::to_string(size) + " entries");
  Vec v(size);
  for (int i = 0; i < size; ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

void save_model_json(const std::string &path, const StableModel &model) {
  json j;
  j["format"] = "stable-model/1";
  j["generator"] = {
      {"tool", model.generator_tool.empty() ? kToolName : model.generator_tool},
      {"version", model.generator_version.empty() ? kVersion : model.generator_version},
      {"config", model.generator_config},
  };

  json gmm;
  gmm["K"] = model.gmm.K();
  gmm["dim"] = model.gmm.dim;
  json priors = json::array(), means = json::array(), covs = json::array();
  for (const auto &c : model.gmm.comps) {
    priors.push_back(c.prior);
    json mean = json::array();
    for (int i = 0; i < c.mean.size(); ++i) mean.push_back(c.mean[i]);
    means.push_back(std::move(mean));
    covs.push_back(matrix_to_json(c.cov));
  }
  gmm["priors"] = std::move(priors);
  gmm["means"] = std::move(means);
  gmm["covs"] = std::move(covs);
  j["gmm"] = std::move(gmm);

  json clf;
  clf["L"] = model.clf.L;
  clf["dim"] = model.clf.dim;
  json factors = json::array();
  for (const auto &g : model.clf.factors) factors.push_back(matrix_to_json(g));
  clf["G_factors"] = std::move(factors);
  clf["centers"] = matrix_to_json(model.clf.centers);
  j["clf"] = std::move(clf);

  j["controller"] = {
      {"rho0", model.controller.rho0},
      {"target_radius", model.controller.target_radius},
  };

  json meta;
  meta["projection"] = model.meta.projection;
  if (model.meta.origin_lonlat)
    meta["origin_lonlat"] = {(*model.meta.origin_lonlat)[0], (*model.meta.origin_lonlat)[1]};
  else
    meta["origin_lonlat"] = nullptr;
  json shift = json::array(), scales = json::array();
  for (int i = 0; i < model.meta.shift.size(); ++i) shift.push_back(model.meta.shift[i]);
  for (int i = 0; i < model.meta.scales.size(); ++i) scales.push_back(model.meta.scales[i]);
  meta["shift"] = std::move(shift);
  meta["scales"] = std::move(scales);
  meta["polar"] = model.meta.polar;
  meta["extent"] = model.meta.extent;
  j["meta"] = std::move(meta);

  j["J_init"] = model.J_init;
  j["J_final"] = model.J_final;
  j["iterations"] = model.iterations;
  j["converged"] = model.converged;
  j["history"] = model.history;

  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

StableModel load_model_json(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw SchemaError("'" + path + "' is not valid JSON: " + e.what());
  }

  if (!j.contains("format") || j["format"] != "stable-model/1")
    throw SchemaError("'" + path + "' is not a stable-model/1 file");

  StableModel model;
  try {
    const json &gen = j.at("generator");
    model.generator_tool = gen.at("tool").get<std::string>();
    model.generator_version = gen.at("version").get<std::string>();
    model.generator_config = gen.at("config").get<std::string>();

    const json &gmm = j.at("gmm");
    int K = gmm.at("K").get<int>();
    int dim = gmm.at("dim").get<int>();
    if (K < 1 || dim < 1) throw SchemaError("mixture sizes must be positive");
    model.gmm.dim = dim;
    int joint = 2 * dim;
    const json &priors = gmm.at("priors");
    const json &means = gmm.at("means");
    const json &covs = gmm.at("covs");
    if (static_cast<int>(priors.size()) != K || static_cast<int>(means.size()) != K ||
        static_cast<int>(covs.size()) != K)
      throw SchemaError("mixture blocks disagree with K");
    double prior_sum = 0.0;
    for (int k = 0; k < K; ++k) {
      GaussianComponent c;
      c.prior = priors[k].get<double>();
      prior_sum += c.prior;
      c.mean = vector_from_json(means[k], joint, "mean " + std::to_string(k));
      c.cov = matrix_from_json(covs[k], joint, joint, "covariance " + std::to_string(k));
      Eigen::LLT<Mat> llt(c.cov);
      if (llt.info() != Eigen::Success)
        throw ValidationError("component " + std::to_string(k) +
                              " covariance is not positive definite");
      model.gmm.comps.push_back(std::move(c));
    }
    if (std::abs(prior_sum - 1.0) > 1e-9)
      throw ValidationError("priors sum to " + fmt_double(prior_sum) + ", expected 1");

    const json &clf = j.at("clf");
    model.clf.L = clf.at("L").get<int>();
    model.clf.dim = clf.at("dim").get<int>();
    if (model.clf.dim != dim) throw ValidationError("mixture and Lyapunov dimensions disagree");
    if (model.clf.L < 0) throw SchemaError("L must be non-negative");
    const json &factors = clf.at("G_factors");
    if (static_cast<int>(factors.size()) != model.clf.L + 1)
      throw SchemaError("G_factors must hold L + 1 matrices");
    for (int l = 0; l <= model.clf.L; ++l)
      model.clf.factors.push_back(
          matrix_from_json(factors[l], dim, dim, "G factor " + std::to_string(l)));
    model.clf.centers = matrix_from_json(clf.at("centers"), dim, model.clf.L, "centers");

    const json &ctrl = j.at("controller");
    model.controller.rho0 = ctrl.at("rho0").get<double>();
    model.controller.target_radius = ctrl.at("target_radius").get<double>();

    const json &meta = j.at("meta");
    model.meta.projection = meta.at("projection").get<std::string>();
    if (!meta.at("origin_lonlat").is_null()) {
      Vec o = vector_from_json(meta.at("origin_lonlat"), 2, "origin_lonlat");
      model.meta.origin_lonlat = Eigen::Vector2d(o[0], o[1]);
    }
    model.meta.shift = vector_from_json(meta.at("shift"), meta.at("shift").size(), "shift");
    model.meta.scales = vector_from_json(meta.at("scales"), dim, "scales");
    model.meta.polar = meta.at("polar").get<bool>();
    model.meta.extent = meta.at("extent").get<double>();

    model.J_init = j.at("J_init").get<double>();
    model.J_final = j.at("J_final").get<double>();
    model.iterations = j.at("iterations").get<int>();
    model.converged = j.at("converged").get<bool>();
    model.history = j.at("history").get<std::vector<double>>();
  } catch (const json::exception &e) {
    throw SchemaError("'" + path + "' is missing required fields: " + e.what());
  }
  return model;
}

}  // namespace stabledyn
