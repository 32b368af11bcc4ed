#include "icfenc/encoding.hpp"

#include "icfenc/error.hpp"
#include "json.hpp"
#include "icfenc/interchange.hpp"
#include "parallel.hpp"

namespace icfenc {

using nlohmann::json;

namespace {

struct TrainingPlan {
  Matrix Z;
  std::shared_ptr<const StandardizationParams> params;
  const VoxelResponseMatrix* responses;
  const EncodingConfig* cfg;
  FeatureSource source;
};

TrainingPlan plan_training(const FeatureMatrix& features, const VoxelResponseMatrix& responses,
                           const EncodingConfig& cfg) {
  validate(features);
  validate(responses);
  cfg.solver.validate();
  if (features.image_ids != responses.image_ids)
    fail(ErrorKind::alignment, "features and responses are not aligned; run align() first");
  if (features.rows() < 2) fail(ErrorKind::validation, "training needs at least 2 samples");
  if (features.rows() <= cfg.solver.sparsity)
    fail(ErrorKind::validation, "training needs more samples (" + std::to_string(features.rows()) +
                                    ") than sparsity (" + std::to_string(cfg.solver.sparsity) + ")");

  TrainingPlan plan;
  auto params = std::make_shared<StandardizationParams>();
  if (cfg.standardize_features) {
    *params = fit_standardization(features.values);
  } else {
    params->means = Vector::Zero(features.cols());
    params->stds = Vector::Ones(features.cols());
  }
  plan.Z = params->apply(features.values);
  plan.params = std::move(params);
  plan.responses = &responses;
  plan.cfg = &cfg;
  plan.source = features.source;
  return plan;
}

VoxelEncodingModel fit_voxel(const TrainingPlan& plan, Index v) {
  VoxelEncodingModel m;
  m.voxel = plan.responses->voxels[static_cast<std::size_t>(v)];
  m.standardization = plan.params;
  m.feature_source = plan.source;
  Vector y = plan.responses->values.col(v);
  if (plan.cfg->center_responses) y.array() -= y.mean();
  try {
    m.solution = solve(plan.Z, y, plan.cfg->solver);
  } catch (const std::exception& e) {
    // Degrade to the mean model so one bad voxel cannot sink a whole run.
    m.solution = SparseSolution{};
    m.solution.intercept = y.mean();
    m.solution.residual_norm = (y.array() - y.mean()).matrix().norm();
    m.failed = true;
    m.failure = e.what();
  }
  return m;
}

EncodingModelSet assemble(const TrainingPlan& plan, const FeatureMatrix& features, const EncodingConfig& cfg,
                          std::vector<VoxelEncodingModel> models) {
  EncodingModelSet set;
  set.models = std::move(models);
  set.feature_source = features.source;
  set.training_ids = features.image_ids;
  set.config = cfg;
  set.standardization = plan.params;
  return set;
}

Matrix standardized_inputs(const EncodingModelSet& models, const FeatureMatrix& features) {
  if (!models.standardization) fail(ErrorKind::validation, "model set has no standardization parameters");
  if (features.cols() != models.feature_dim())
    fail(ErrorKind::validation, "feature dimension " + std::to_string(features.cols()) + " does not match model dimension " +
                                    std::to_string(models.feature_dim()));
  validate(features);
  return models.standardization->apply(features.values);
}

json solver_to_json(const EncodingConfig& c) {
  return {{"algorithm", to_string(c.solver.algorithm)},
          {"sparsity", c.solver.sparsity},
          {"comparability_ratio", c.solver.comparability_ratio},
          {"residual_tol", c.solver.residual_tol},
          {"max_support", c.solver.max_support},
          {"max_iterations", c.solver.max_iterations},
          {"standardize_features", c.standardize_features},
          {"center_responses", c.center_responses}};
}

StopReason parse_stop(const std::string& s) {
  for (auto r : {StopReason::max_support, StopReason::residual_tol, StopReason::zero_correlation,
                 StopReason::no_progress, StopReason::max_iterations})
    if (s == to_string(r)) return r;
  throw Error(ErrorKind::parse, "unknown stop reason '" + s + "'");
}

}  // namespace

double VoxelEncodingModel::predict_row(std::span<const double> features) const {
  const Vector z = standardization->apply_row(features);
  double out = solution.intercept;
  for (std::size_t k = 0; k < solution.support.size(); ++k) out += solution.coefficients[k] * z[solution.support[k]];
  return out;
}

std::size_t EncodingModelSet::failure_count() const {
  std::size_t n = 0;
  for (const auto& m : models) n += m.failed ? 1 : 0;
  return n;
}

EncodingModelSet train_voxelwise(const FeatureMatrix& features, const VoxelResponseMatrix& responses,
                                 const EncodingConfig& cfg, int workers) {
  const TrainingPlan plan = plan_training(features, responses, cfg);
  const Index V = responses.cols();
  std::vector<VoxelEncodingModel> models(static_cast<std::size_t>(V));
#pragma omp parallel for schedule(dynamic, 4) num_threads(detail::resolve_workers(workers))
  for (Index v = 0; v < V; ++v) models[static_cast<std::size_t>(v)] = fit_voxel(plan, v);
  return assemble(plan, features, cfg, std::move(models));
}

Matrix predict(const EncodingModelSet& models, const FeatureMatrix& features, int workers) {
  const Matrix Z = standardized_inputs(models, features);
  const auto V = std::ssize(models.models);
  Matrix out(Z.rows(), V);
#pragma omp parallel for schedule(static) num_threads(detail::resolve_workers(workers))
  for (Index v = 0; v < V; ++v) out.col(v) = predict_solution(models.models[static_cast<std::size_t>(v)].solution, Z);
  return out;
}

namespace reference {

EncodingModelSet train_voxelwise(const FeatureMatrix& features, const VoxelResponseMatrix& responses,
                                 const EncodingConfig& cfg) {
  const TrainingPlan plan = plan_training(features, responses, cfg);
  std::vector<VoxelEncodingModel> models;
  for (Index v = 0; v < responses.cols(); ++v) models.push_back(fit_voxel(plan, v));
  return assemble(plan, features, cfg, std::move(models));
}

Matrix predict(const EncodingModelSet& models, const FeatureMatrix& features) {
  const Matrix Z = standardized_inputs(models, features);
  Matrix out(Z.rows(), std::ssize(models.models));
  for (Index v = 0; v < out.cols(); ++v) {
    const auto& sol = models.models[static_cast<std::size_t>(v)].solution;
    for (Index i = 0; i < Z.rows(); ++i) {
      double acc = sol.intercept;
      for (std::size_t k = 0; k < sol.support.size(); ++k) acc += sol.coefficients[k] * Z(i, sol.support[k]);
      out(i, v) = acc;
    }
  }
  return out;
}

}  // namespace reference

std::string serialize_models(const EncodingModelSet& set) {
  if (!set.standardization) fail(ErrorKind::validation, "model set has no standardization parameters");
  const auto& p = *set.standardization;
  json models = json::array();
  for (const auto& m : set.models) {
    models.push_back({{"voxel_id", m.voxel.voxel_id},
                      {"subject", m.voxel.subject},
                      {"roi", to_string(m.voxel.roi)},
                      {"hemisphere", to_string(m.voxel.hemisphere)},
                      {"support", m.solution.support},
                      {"coefficients", m.solution.coefficients},
                      {"intercept", m.solution.intercept},
                      {"residual_norm", m.solution.residual_norm},
                      {"iterations", m.solution.iterations},
                      {"stop", to_string(m.solution.stop)},
                      {"rank_deficient", m.solution.rank_deficient},
                      {"failed", m.failed},
                      {"failure", m.failure}});
  }
  json doc = {{"format", "icfenc-models"},
              {"version", kModelFileVersion},
              {"feature_source", set.feature_source.tag()},
              {"feature_dim", p.dim()},
              {"training_ids", set.training_ids},
              {"solver", solver_to_json(set.config)},
              {"standardization",
               {{"means", std::vector<double>(p.means.data(), p.means.data() + p.dim())},
                {"stds", std::vector<double>(p.stds.data(), p.stds.data() + p.dim())}}},
              {"models", std::move(models)}};
  return doc.dump() + "\n";
}

EncodingModelSet parse_models(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, "model file is malformed at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "icfenc-models")
      throw Error(ErrorKind::parse, "not an encoding model file");
    const int version = doc.at("version").get<int>();
    if (version != kModelFileVersion)
      throw Error(ErrorKind::unsupported_version, "unsupported model file version " + std::to_string(version) +
                                                      " (supported: " + std::to_string(kModelFileVersion) + ")");
    EncodingModelSet set;
    set.feature_source = FeatureSource::parse(doc.at("feature_source").get<std::string>());
    set.training_ids = doc.at("training_ids").get<std::vector<std::string>>();

    const auto& s = doc.at("solver");
    set.config.solver.algorithm = parse_algorithm(s.at("algorithm").get<std::string>());
    set.config.solver.sparsity = s.at("sparsity").get<int>();
    set.config.solver.comparability_ratio = s.at("comparability_ratio").get<double>();
    set.config.solver.residual_tol = s.at("residual_tol").get<double>();
    set.config.solver.max_support = s.at("max_support").get<int>();
    set.config.solver.max_iterations = s.at("max_iterations").get<int>();
    set.config.standardize_features = s.at("standardize_features").get<bool>();
    set.config.center_responses = s.at("center_responses").get<bool>();

    const auto dim = doc.at("feature_dim").get<Index>();
    const auto means = doc.at("standardization").at("means").get<std::vector<double>>();
    const auto stds = doc.at("standardization").at("stds").get<std::vector<double>>();
    if (std::ssize(means) != dim || std::ssize(stds) != dim)
      throw Error(ErrorKind::parse, "standardization length does not match feature_dim");
    auto params = std::make_shared<StandardizationParams>();
    params->means = Eigen::Map<const Vector>(means.data(), dim);
    params->stds = Eigen::Map<const Vector>(stds.data(), dim);
    set.standardization = params;

    for (const auto& jm : doc.at("models")) {
      VoxelEncodingModel m;
      m.voxel.voxel_id = jm.at("voxel_id").get<std::string>();
      m.voxel.subject = jm.at("subject").get<std::string>();
      m.voxel.roi = parse_roi(jm.at("roi").get<std::string>());
      m.voxel.hemisphere = parse_hemisphere(jm.at("hemisphere").get<std::string>());
      m.solution.support = jm.at("support").get<std::vector<Index>>();
      m.solution.coefficients = jm.at("coefficients").get<std::vector<double>>();
      m.solution.intercept = jm.at("intercept").get<double>();
      m.solution.residual_norm = jm.at("residual_norm").get<double>();
      m.solution.iterations = jm.at("iterations").get<int>();
      m.solution.stop = parse_stop(jm.at("stop").get<std::string>());
      m.solution.rank_deficient = jm.at("rank_deficient").get<bool>();
      m.failed = jm.at("failed").get<bool>();
      m.failure = jm.at("failure").get<std::string>();
      if (m.solution.support.size() != m.solution.coefficients.size())
        throw Error(ErrorKind::parse, "voxel '" + m.voxel.voxel_id + "': support and coefficients differ in length");
      for (Index j : m.solution.support)
        if (j < 0 || j >= dim)
          throw Error(ErrorKind::parse, "voxel '" + m.voxel.voxel_id + "': support index out of range");
      m.standardization = params;
      m.feature_source = set.feature_source;
      set.models.push_back(std::move(m));
    }
    return set;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("model file has an invalid field: ") + e.what());
  }
}

void save_models(const EncodingModelSet& models, const std::filesystem::path& path) {
  interchange::write_file(path, serialize_models(models));
}

EncodingModelSet load_models(const std::filesystem::path& path) { return parse_models(interchange::read_file(path)); }

}  // namespace icfenc
