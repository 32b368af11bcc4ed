#include "doctest.h"
#include "oracles.hpp"

#include "icfenc/error.hpp"
#include "icfenc/evaluation.hpp"
#include "icfenc/interchange.hpp"

#include <set>

using namespace icfenc;

namespace {

double pc(const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); }

std::vector<double> vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

VoxelRecord voxel(const std::string& id, Roi roi, Hemisphere h, const std::string& subject = "CSI1") {
  return {id, subject, roi, h};
}

EvaluationReport report_with(const std::vector<double>& pcs, const std::string& layer = "") {
  EvaluationReport r;
  const Roi rois[] = {Roi::EV, Roi::LOC, Roi::OPA, Roi::PPA, Roi::RSC};
  for (std::size_t v = 0; v < pcs.size(); ++v)
    r.voxels.push_back(voxel("v" + std::to_string(v), rois[v % 5], (v / 5) % 2 ? Hemisphere::R : Hemisphere::L));
  r.feature_source = layer.empty() ? FeatureSource::icf() : FeatureSource::cnn(layer);
  r.n_test = 113;
  r.pc = pcs;
  std::map<std::string, double> sums;
  for (std::size_t v = 0; v < pcs.size(); ++v) {
    if (std::isnan(pcs[v])) {
      ++r.degenerate_count;
      continue;
    }
    for (const auto& label : region_labels_for(r.voxels[v])) {
      sums[label] += pcs[v];
      ++r.region_counts[label];
    }
  }
  for (const auto& [label, s] : sums) r.region_means[label] = s / static_cast<double>(r.region_counts[label]);
  return r;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("pearson hand values") {
  CHECK(pc({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0));
  CHECK(pc({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(pc({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(std::isnan(pc({1, 1, 1}, {1, 2, 3})));
  CHECK_THROWS_AS(pc({1, 2}, {1, 2}), Error);
  CHECK_THROWS_AS(pc({1, 2, 3}, {1, 2}), Error);
}

TEST_CASE("pearson is affine invariant, symmetric and bounded") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> coef(0.1, 10.0);
  std::uniform_real_distribution<double> shift(-100.0, 100.0);
  for (int t = 0; t < 200; ++t) {
    const auto x = vec(oracle::gaussian(30, 1, rng).col(0));
    auto y = vec(oracle::gaussian(30, 1, rng).col(0));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.5 * x[i];
    const double base = pc(x, y);
    CHECK(base >= -1.0);
    CHECK(base <= 1.0);
    CHECK(pc(y, x) == base);
    const double a = coef(rng), b = shift(rng), c = coef(rng), d = shift(rng);
    std::vector<double> xs(x.size()), ys(y.size()), yneg(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      xs[i] = a * x[i] + b;
      ys[i] = c * y[i] + d;
      yneg[i] = -c * y[i] + d;
    }
    CHECK(std::abs(pc(xs, ys) - base) <= 1e-12);
    CHECK(std::abs(pc(xs, yneg) + base) <= 1e-12);
  }
}

TEST_CASE("significance threshold agrees with the quadrature oracle") {
  const double r = significance_threshold(113, 0.001, Tails::two);
  CHECK(r == doctest::Approx(0.305).epsilon(0.005));
  CHECK(std::abs(r - oracle::critical_r(113, 0.001, true)) < 1e-9);
  for (int n : {10, 30, 113, 1000})
    for (double p : {0.05, 0.01, 0.001}) {
      CHECK(std::abs(significance_threshold(n, p, Tails::two) - oracle::critical_r(n, p, true)) < 1e-8);
      CHECK(std::abs(significance_threshold(n, p, Tails::one) - oracle::critical_r(n, p, false)) < 1e-8);
    }
  CHECK(significance_threshold(113, 0.01, Tails::two) < significance_threshold(113, 0.001, Tails::two));
  CHECK(significance_threshold(113, 0.01, Tails::one) < significance_threshold(113, 0.01, Tails::two));
  CHECK_THROWS_AS(significance_threshold(3, 0.01, Tails::two), Error);
  CHECK_THROWS_AS(significance_threshold(100, 1.5, Tails::two), Error);
  CHECK(parse_tails("one") == Tails::one);
  CHECK_THROWS_AS(parse_tails("three"), Error);
}

TEST_CASE("evaluate_predictions scores columns and summarises regions") {
  VoxelResponseMatrix obs;
  obs.voxels = {voxel("a", Roi::EV, Hemisphere::L), voxel("b", Roi::PPA, Hemisphere::L),
                voxel("c", Roi::LOC, Hemisphere::R)};
  obs.image_ids = {"1", "2", "3", "4"};
  obs.values.resize(4, 3);
  obs.values << 1, 1, 5, 2, 3, 5, 3, 2, 5, 4, 4, 5;
  Matrix pred(4, 3);
  pred << 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4;
  const auto r = evaluate_predictions(pred, obs, FeatureSource::icf());
  CHECK(r.pc[0] == doctest::Approx(1.0));
  CHECK(r.pc[1] == doctest::Approx(0.8));
  CHECK(std::isnan(r.pc[2]));
  CHECK(r.degenerate_count == 1);
  CHECK(r.n_test == 4);
  CHECK(r.region_counts.at("all") == 2);
  CHECK(r.region_means.at("all") == doctest::Approx(0.9));
  CHECK(r.region_means.at("LL") == doctest::Approx(1.0));
  CHECK(r.region_means.at("LH") == doctest::Approx(0.8));
  CHECK(r.region_means.at("L-PPA") == doctest::Approx(0.8));
  CHECK(r.region_counts.count("RH") == 0);

  const auto serial = reference::evaluate_predictions(pred, obs, FeatureSource::icf());
  CHECK(report_to_json(serial) == report_to_json(r));
}

TEST_CASE("shuffled responses give a near-zero mean correlation") {
  std::mt19937_64 rng(77);
  const Index n = 113, V = 200;
  const Matrix signal = oracle::gaussian(n, V, rng);
  VoxelResponseMatrix obs;
  obs.values = signal + oracle::gaussian(n, V, rng);
  for (Index i = 0; i < n; ++i) obs.image_ids.push_back(std::to_string(i));
  for (Index v = 0; v < V; ++v) obs.voxels.push_back(voxel("v" + std::to_string(v), Roi::EV, Hemisphere::L));
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  VoxelResponseMatrix shuffled = obs;
  for (Index i = 0; i < n; ++i) shuffled.values.row(i) = obs.values.row(perm[static_cast<std::size_t>(i)]);
  const auto r = evaluate_predictions(signal, shuffled, FeatureSource::icf());
  CHECK(std::abs(r.region_means.at("all")) <= 3.0 / std::sqrt(static_cast<double>(n)));
  const auto aligned = evaluate_predictions(signal, obs, FeatureSource::icf());
  CHECK(aligned.region_means.at("all") == doctest::Approx(std::sqrt(0.5)).epsilon(0.1));
}

TEST_CASE("layer profile and best layer") {
  SUBCASE("single report") {
    const auto p = layer_profile({report_with({0.1, 0.2, 0.3}, "l1")});
    CHECK(p.layers == std::vector<std::string>{"l1"});
    CHECK(p.means.rows() == 1);
  }
  SUBCASE("identical reports give a constant profile and the first layer wins") {
    std::vector<EvaluationReport> rs;
    for (int l = 0; l < 4; ++l) rs.push_back(report_with({0.1, 0.2, 0.3, 0.4, 0.5}, "l" + std::to_string(l)));
    const auto p = layer_profile(rs);
    for (Index c = 0; c < p.means.cols(); ++c)
      for (Index l = 1; l < 4; ++l) CHECK(p.means(l, c) == p.means(0, c));
    CHECK(best_layer(p, "all") == "l0");
  }
  SUBCASE("deeper layers carry more high-level signal") {
    std::vector<EvaluationReport> rs;
    for (int l = 0; l < 6; ++l) {
      std::vector<double> pcs;
      for (int v = 0; v < 10; ++v) pcs.push_back(v % 5 == 0 ? 0.3 : 0.05 * (l + 1) + 0.01 * v);
      rs.push_back(report_with(pcs, "l" + std::to_string(l)));
    }
    const auto p = layer_profile(rs);
    const auto col = std::find(p.regions.begin(), p.regions.end(), "LH") - p.regions.begin();
    for (Index l = 1; l < 6; ++l) CHECK(p.means(l, col) > p.means(l - 1, col));
    CHECK(best_layer(p, "LH") == "l5");
  }
  SUBCASE("unique maximum") {
    std::vector<EvaluationReport> rs;
    for (int l = 0; l < 10; ++l) rs.push_back(report_with({l == 7 ? 0.9 : 0.2, 0.1, 0.1}, "l" + std::to_string(l)));
    CHECK(best_layer(layer_profile(rs), "all") == "l7");
  }
  SUBCASE("each sub-region has its own winner") {
    std::vector<EvaluationReport> rs;
    for (int l = 0; l < 10; ++l) {
      std::vector<double> pcs(10, 0.1);
      pcs[static_cast<std::size_t>(l)] = 0.8;  // voxel l is the only member of its sub-region
      rs.push_back(report_with(pcs, "l" + std::to_string(l)));
    }
    const auto p = layer_profile(rs);
    std::set<std::string> winners;
    for (const auto& region : p.regions)
      if (region.size() > 2) winners.insert(best_layer(p, region));
    CHECK(winners.size() == 10);
  }
  CHECK_THROWS_AS(layer_profile({}), Error);
}

TEST_CASE("compare hand fixture") {
  const auto a = report_with({0.5, 0.1, 0.4});
  const auto b = report_with({0.3, 0.5, 0.4});
  const auto c = compare(a, b, 0.27);
  CHECK(c.classes[0] == VoxelClass::a_better);
  CHECK(c.classes[1] == VoxelClass::b_better);
  CHECK(c.classes[2] == VoxelClass::tie);
  CHECK(c.joint_significant == 2);
  CHECK(c.fraction_a_better == 0.5);
  CHECK(c.fraction_b_better == 0.0);
  CHECK(c.fraction_tie == 0.5);
  const auto counts = c.class_counts();
  Index total = 0;
  for (const auto& [cls, n] : counts) total += n;
  CHECK(total == 3);
  CHECK(c.bin_edges.size() == 41);
  CHECK(std::accumulate(c.bin_counts.begin(), c.bin_counts.end(), Index{0}) == 2);
  // Scatter has one row per voxel plus the header.
  const auto scatter = comparison_scatter_csv(c);
  CHECK(std::count(scatter.begin(), scatter.end(), '\n') == 4);
}

TEST_CASE("compare of a report with itself") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.2, 0.9);
  std::vector<double> pcs;
  for (int v = 0; v < 40; ++v) pcs.push_back(u(rng));
  pcs[3] = NAN;
  const auto a = report_with(pcs);
  const auto c = compare(a, a, 0.27);
  for (const auto& [sub, d] : c.mean_abs_distance) CHECK(d == 0.0);
  CHECK(c.mean_abs_distance.size() == 10);
  if (c.joint_significant > 0) CHECK(c.fraction_tie == 1.0);
  CHECK(c.classes[3] == VoxelClass::neither_significant);
}

TEST_CASE("report files") {
  auto r = report_with({0.123456789123, -0.5, NAN, 0.75}, "layer4");
  SUBCASE("csv round trip keeps 9 significant digits") {
    const auto back = report_from_csv(report_to_csv(r));
    REQUIRE(back.pc.size() == 4);
    for (std::size_t v = 0; v < 4; ++v) {
      if (std::isnan(r.pc[v])) {
        CHECK(std::isnan(back.pc[v]));
        continue;
      }
      CHECK(std::abs(back.pc[v] - r.pc[v]) <= 1e-9 * std::abs(r.pc[v]));
    }
    CHECK(back.voxels == r.voxels);
    CHECK(back.feature_source == r.feature_source);
  }
  SUBCASE("json round trip") {
    const auto text = report_to_json(r);
    const auto back = report_from_json(text);
    CHECK(report_to_json(back) == text);
    CHECK(std::isnan(back.pc[2]));
  }
  SUBCASE("empty report is header only") {
    EvaluationReport empty;
    const auto csv = report_to_csv(empty);
    CHECK(csv == "voxel_id,subject,roi,hemisphere,feature_source,n_test,pc\n");
  }
  SUBCASE("export and load") {
    const auto dir = std::filesystem::temp_directory_path() / "icfenc_unit";
    std::filesystem::create_directories(dir);
    export_report(r, ReportFormat::json, dir / "r.json");
    export_report(r, ReportFormat::csv, dir / "r.csv");
    CHECK(report_to_json(load_report(dir / "r.json")) == report_to_json(r));
    CHECK(load_report(dir / "r.csv").pc[0] == doctest::Approx(r.pc[0]));
  }
}

}  // TEST_SUITE
