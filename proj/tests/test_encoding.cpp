#include "doctest.h"
#include "oracles.hpp"

#include "icfenc/encoding.hpp"
#include "icfenc/error.hpp"
#include "icfenc/evaluation.hpp"
#include "icfenc/synth.hpp"

using namespace icfenc;

namespace {

FeatureMatrix gaussian_features(Index n, Index d, std::mt19937_64& rng) {
  FeatureMatrix f;
  f.values = oracle::gaussian(n, d, rng);
  for (Index i = 0; i < n; ++i) f.image_ids.push_back("img" + std::to_string(i));
  return f;
}

VoxelResponseMatrix wrap(const Matrix& values, const std::vector<std::string>& ids) {
  VoxelResponseMatrix r;
  r.values = values;
  r.image_ids = ids;
  for (Index v = 0; v < values.cols(); ++v)
    r.voxels.push_back({"v" + std::to_string(v), "CSI1", static_cast<Roi>(v % 5), v % 2 ? Hemisphere::R : Hemisphere::L});
  return r;
}

EncodingConfig sparse(int s) {
  EncodingConfig c;
  c.solver = SolverConfig::with_sparsity(s);
  return c;
}

double pc(const Vector& a, const Vector& b) { return pearson({a.data(), static_cast<std::size_t>(a.size())}, {b.data(), static_cast<std::size_t>(b.size())}); }

}  // namespace

TEST_SUITE("encoding") {

TEST_CASE("a voxel equal to one feature column is fit exactly") {
  std::mt19937_64 rng(1);
  const auto f = gaussian_features(60, 20, rng);
  const auto r = wrap(f.values.col(5), f.image_ids);
  const auto models = train_voxelwise(f, r, sparse(3));
  REQUIRE(models.models.size() == 1);
  const auto& sol = models.models[0].solution;
  CHECK(std::find(sol.support.begin(), sol.support.end(), 5) != sol.support.end());
  const Matrix p = predict(models, f);
  CHECK(pc(p.col(0), r.values.col(0)) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK((p.col(0) - r.values.col(0)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("planted sparse voxels are recovered") {
  std::mt19937_64 rng(2);
  const auto f = gaussian_features(200, 100, rng);
  const auto Z = fit_standardization(f.values).apply(f.values);
  Matrix y(200, 200);
  std::vector<std::vector<Index>> truth;
  std::uniform_int_distribution<Index> col(0, 99);
  for (Index v = 0; v < 200; ++v) {
    std::vector<Index> s;
    while (s.size() < 4) {
      const Index j = col(rng);
      if (std::find(s.begin(), s.end(), j) == s.end()) s.push_back(j);
    }
    std::sort(s.begin(), s.end());
    y.col(v).setConstant(1.0);
    for (Index j : s) y.col(v) += (1.0 + 0.5 * static_cast<double>(j % 3)) * Z.col(j);
    truth.push_back(s);
  }
  const auto models = train_voxelwise(f, wrap(y, f.image_ids), sparse(4));
  REQUIRE(models.models.size() == 200);
  int ok = 0;
  for (Index v = 0; v < 200; ++v) {
    const auto& sup = models.models[static_cast<std::size_t>(v)].solution.support;
    ok += std::includes(sup.begin(), sup.end(), truth[static_cast<std::size_t>(v)].begin(), truth[static_cast<std::size_t>(v)].end());
    CHECK(models.models[static_cast<std::size_t>(v)].voxel.voxel_id == "v" + std::to_string(v));
  }
  CHECK(ok >= 190);
}

TEST_CASE("an empty-support model predicts its intercept") {
  std::mt19937_64 rng(3);
  const auto f = gaussian_features(20, 4, rng);
  const auto r = wrap(Matrix::Constant(20, 1, 2.5), f.image_ids);
  const auto models = train_voxelwise(f, r, sparse(2));
  CHECK(models.models[0].solution.support.empty());
  const Matrix p = predict(models, gaussian_features(7, 4, rng));
  CHECK((p.array() == 2.5).all());
}

TEST_CASE("planted synthetic voxels reach the noise ceiling") {
  // n_test = 1000 so that each voxel's own sampling spread (about 0.02) sits
  // well inside the tolerance. The per-voxel check fits at the planted
  // sparsity; the default s = 16 admits up to 32 columns for a 4-sparse
  // truth and its overfit tail dips below the band, so it only gets the mean check.
  SynthConfig sc;
  sc.n_test = 1000;
  const auto b = make_synthetic(sc);
  const double ceiling = std::sqrt(sc.snr / (1.0 + sc.snr));

  const auto matched = train_voxelwise(b.train_icf, b.train_responses, sparse(sc.planted_sparsity));
  const auto report = evaluate(matched, b.test_icf, b.test_responses);
  int within = 0;
  for (double r : report.pc) within += std::abs(r - ceiling) <= 0.1;
  CHECK(within == 200);

  const auto defaults = train_voxelwise(b.train_icf, b.train_responses, EncodingConfig{});
  CHECK(std::abs(evaluate(defaults, b.test_icf, b.test_responses).region_means.at("all") - ceiling) <= 0.1);
}

TEST_CASE("parallel and serial training agree bit for bit") {
  std::mt19937_64 rng(4);
  const auto f = gaussian_features(80, 40, rng);
  const auto r = wrap(oracle::gaussian(80, 30, rng), f.image_ids);
  const auto cfg = sparse(4);
  const auto one = serialize_models(train_voxelwise(f, r, cfg, 1));
  CHECK(serialize_models(train_voxelwise(f, r, cfg, 4)) == one);
  CHECK(serialize_models(reference::train_voxelwise(f, r, cfg)) == one);

  const auto m = train_voxelwise(f, r, cfg, 3);
  const Matrix p1 = predict(m, f, 1);
  CHECK(predict(m, f, 4) == p1);
  CHECK(reference::predict(m, f) == p1);
}

TEST_CASE("a voxel's model does not depend on the other voxels") {
  std::mt19937_64 rng(5);
  const auto f = gaussian_features(70, 30, rng);
  const Matrix y = oracle::gaussian(70, 6, rng);
  const auto full = train_voxelwise(f, wrap(y, f.image_ids), sparse(3));
  VoxelResponseMatrix sub = wrap(y.middleCols(2, 3), f.image_ids);
  for (Index v = 0; v < 3; ++v) sub.voxels[static_cast<std::size_t>(v)] = full.models[static_cast<std::size_t>(v + 2)].voxel;
  const auto part = train_voxelwise(f, sub, sparse(3));
  for (std::size_t v = 0; v < 3; ++v) CHECK(part.models[v].solution == full.models[v + 2].solution);
}

TEST_CASE("prediction is affine in the features") {
  std::mt19937_64 rng(6);
  const auto f = gaussian_features(50, 12, rng);
  const auto m = train_voxelwise(f, wrap(oracle::gaussian(50, 4, rng), f.image_ids), sparse(3));
  auto f1 = gaussian_features(9, 12, rng);
  auto f2 = gaussian_features(9, 12, rng);
  for (double alpha : {0.0, 0.3, 1.0, 2.5}) {
    FeatureMatrix mix = f1;
    mix.values = alpha * f1.values + (1 - alpha) * f2.values;
    const Matrix lhs = predict(m, mix);
    const Matrix rhs = alpha * predict(m, f1) + (1 - alpha) * predict(m, f2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("model files round trip") {
  std::mt19937_64 rng(7);
  auto f = gaussian_features(40, 10, rng);
  f.source = FeatureSource::cnn("layer2");
  const auto m = train_voxelwise(f, wrap(oracle::gaussian(40, 3, rng), f.image_ids), sparse(2));
  const auto text = serialize_models(m);
  const auto back = parse_models(text);
  REQUIRE(back.models.size() == 3);
  for (std::size_t v = 0; v < 3; ++v) {
    CHECK(back.models[v].voxel == m.models[v].voxel);
    CHECK(back.models[v].solution == m.models[v].solution);
    CHECK(back.models[v].feature_source == m.feature_source);
  }
  CHECK(back.feature_source == m.feature_source);
  CHECK(back.training_ids == m.training_ids);
  CHECK(back.standardization->means == m.standardization->means);
  CHECK(back.standardization->stds == m.standardization->stds);
  CHECK(serialize_models(back) == text);
  CHECK(predict(back, f) == predict(m, f));

  try {
    parse_models(text.substr(0, text.size() / 2));
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
  }
  std::string v2 = text;
  const auto pos = v2.find("\"version\":1");
  REQUIRE(pos != std::string::npos);
  v2.replace(pos, 11, "\"version\":2");
  try {
    parse_models(v2);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unsupported_version);
  }
}

TEST_CASE("training rejects misaligned or tiny inputs") {
  std::mt19937_64 rng(8);
  const auto f = gaussian_features(10, 4, rng);
  auto r = wrap(oracle::gaussian(10, 2, rng), f.image_ids);
  std::swap(r.image_ids[0], r.image_ids[1]);
  CHECK_THROWS_AS(train_voxelwise(f, r, sparse(2)), Error);
  CHECK_THROWS_AS(train_voxelwise(f, wrap(oracle::gaussian(10, 2, rng), f.image_ids), sparse(10)), Error);
  const auto m = train_voxelwise(f, wrap(oracle::gaussian(10, 2, rng), f.image_ids), sparse(2));
  CHECK_THROWS_AS(predict(m, gaussian_features(3, 5, rng)), Error);
}

}  // TEST_SUITE
