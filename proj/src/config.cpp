#include "icfenc/config.hpp"

#include "icfenc/error.hpp"
#include "icfenc/interchange.hpp"
#include "icfenc/interpretation.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <sstream>

namespace icfenc {

namespace {

template <typename T>
T convert(const CLI::ConfigItem& item) {
  if (item.inputs.size() != 1) fail(ErrorKind::validation, "config key '" + item.name + "' expects a single value");
  T out{};
  if (!CLI::detail::lexical_conversion<T, T>(item.inputs, out))
    fail(ErrorKind::validation, "config key '" + item.name + "' has invalid value '" + item.inputs.front() + "'");
  return out;
}

}  // namespace

std::vector<std::string> PipelineConfig::default_stopword_list() {
  const auto& s = default_stopwords();
  return {s.begin(), s.end()};
}

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> k = {
      "state_dim", "sparsity_s",      "max_support", "comparability_ratio", "residual_tol",   "algorithm",
      "standardize_features", "center_responses", "threshold", "tails", "words_per_image", "stopwords",
      "histogram_bins", "seed",       "worker_count"};
  return k;
}

SolverConfig PipelineConfig::solver() const {
  SolverConfig c = SolverConfig::with_sparsity(sparsity);
  if (max_support > 0) c.max_support = max_support;
  c.comparability_ratio = comparability_ratio;
  c.residual_tol = residual_tol;
  c.algorithm = parse_algorithm(algorithm);
  return c;
}

std::set<std::string> PipelineConfig::stopword_set() const { return {stopwords.begin(), stopwords.end()}; }

void PipelineConfig::validate() const {
  if (state_dim < 1) fail(ErrorKind::validation, "state_dim must be positive");
  solver().validate();
  parse_tails(tails);
  if (!(threshold >= -1.0 && threshold <= 1.0)) fail(ErrorKind::validation, "threshold must lie in [-1, 1]");
  if (words_per_image < 1) fail(ErrorKind::validation, "words_per_image must be positive");
  if (histogram_bins < 1) fail(ErrorKind::validation, "histogram_bins must be positive");
  if (worker_count < 0) fail(ErrorKind::validation, "worker_count must be nonnegative");
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
  std::istringstream in{std::string(text)};
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    fail(ErrorKind::validation, std::string("config file: ") + e.what());
  }
  PipelineConfig c = std::move(base);
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty()) fail(ErrorKind::validation, "config sections are not supported (key '" + item.fullname() + "')");
    const auto& k = item.name;
    if (k == "state_dim") c.state_dim = convert<Index>(item);
    else if (k == "sparsity_s") c.sparsity = convert<int>(item);
    else if (k == "max_support") c.max_support = convert<int>(item);
    else if (k == "comparability_ratio") c.comparability_ratio = convert<double>(item);
    else if (k == "residual_tol") c.residual_tol = convert<double>(item);
    else if (k == "algorithm") c.algorithm = convert<std::string>(item);
    else if (k == "standardize_features") c.standardize_features = convert<bool>(item);
    else if (k == "center_responses") c.center_responses = convert<bool>(item);
    else if (k == "threshold") c.threshold = convert<double>(item);
    else if (k == "tails") c.tails = convert<std::string>(item);
    else if (k == "words_per_image") c.words_per_image = convert<int>(item);
    else if (k == "stopwords") c.stopwords = item.inputs.size() == 1 && item.inputs[0].empty() ? std::vector<std::string>{} : item.inputs;
    else if (k == "histogram_bins") c.histogram_bins = convert<int>(item);
    else if (k == "seed") c.seed = convert<std::uint64_t>(item);
    else if (k == "worker_count") c.worker_count = convert<int>(item);
    else fail(ErrorKind::validation, "unknown config key '" + k + "'");
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  return parse_config(interchange::read_file(path), std::move(base));
}

}  // namespace icfenc
