#include "doctest.h"

#include "icfenc/config.hpp"
#include "icfenc/error.hpp"

using namespace icfenc;

namespace {

ErrorKind kind_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::internal;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults are valid") {
  PipelineConfig c;
  c.validate();
  CHECK(c.state_dim == 512);
  CHECK(c.sparsity == 16);
  CHECK(c.threshold == 0.27);
  CHECK(c.words_per_image == 2);
  CHECK(c.histogram_bins == 40);
  const auto s = c.solver();
  CHECK(s.max_support == 32);
  CHECK(s.comparability_ratio == 2.0);
  CHECK(s.algorithm == Algorithm::romp);
}

TEST_CASE("file values override defaults") {
  const auto c = parse_config(
      "# batch settings\n"
      "sparsity_s = 8\n"
      "max_support = 12\n"
      "algorithm = \"omp\"\n"
      "threshold = 0.3\n"
      "tails = \"one\"\n"
      "standardize_features = false\n"
      "stopwords = [\"the\", \"of\"]\n"
      "seed = 99\n");
  CHECK(c.sparsity == 8);
  CHECK(c.solver().max_support == 12);
  CHECK(c.solver().algorithm == Algorithm::omp);
  CHECK(c.threshold == 0.3);
  CHECK(c.tails == "one");
  CHECK_FALSE(c.standardize_features);
  CHECK(c.stopword_set() == std::set<std::string>{"the", "of"});
  CHECK(c.seed == 99);
  CHECK(c.state_dim == 512);
}

TEST_CASE("every documented key parses") {
  PipelineConfig d;
  std::string text;
  for (const auto& k : PipelineConfig::keys()) {
    if (k == "algorithm") text += k + " = \"mp\"\n";
    else if (k == "tails") text += k + " = \"two\"\n";
    else if (k == "stopwords") text += k + " = [\"x\"]\n";
    else if (k == "standardize_features" || k == "center_responses") text += k + " = true\n";
    else if (k == "comparability_ratio" || k == "residual_tol" || k == "threshold") text += k + " = 1.5\n";
    else text += k + " = 3\n";
  }
  // threshold 1.5 is out of range; every key is still recognised before validation
  CHECK(kind_of(text) == ErrorKind::validation);
  const auto pos = text.find("threshold = 1.5");
  text.replace(pos, 15, "threshold = 0.5");
  CHECK_NOTHROW(parse_config(text));
}

TEST_CASE("bad files are rejected") {
  CHECK(kind_of("sparsty = 4\n") == ErrorKind::validation);
  CHECK(kind_of("[solver]\nsparsity_s = 4\n") == ErrorKind::validation);
  CHECK(kind_of("sparsity_s = four\n") == ErrorKind::validation);
  CHECK(kind_of("sparsity_s = 0\n") == ErrorKind::validation);
  CHECK(kind_of("algorithm = \"lasso\"\n") == ErrorKind::validation);
  CHECK(kind_of("tails = \"both\"\n") == ErrorKind::validation);
  try {
    load_config("/nonexistent/icfenc.toml");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
  }
}

}  // TEST_SUITE
