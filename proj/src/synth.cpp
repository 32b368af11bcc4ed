#include "icfenc/synth.hpp"

#include "icfenc/error.hpp"
#include "icfenc/features.hpp"
#include "icfenc/interchange.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace icfenc {

namespace {

// Features and responses are stored as f32 on disk; keep the in-memory bundle identical.
double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      "a",       "the",    "of",      "on",     "with",  "in",      "man",    "woman",  "people", "dog",
      "cat",     "horse",  "bird",    "train",  "bus",   "car",     "street", "table",  "plate",  "food",
      "pizza",   "room",   "bed",     "window", "field", "grass",   "tree",   "water",  "boat",   "beach",
      "sky",     "clock",  "tower",   "bench",  "park",  "kitchen", "chair",  "laptop", "phone",  "ball",
      "player",  "tennis", "snow",    "skis",   "sheep", "giraffe", "zebra",  "next",   "close",  "large",
      "small",   "white",  "red",     "sitting", "standing", "holding", "riding", "building", "group", "top"};
  return words;
}

std::string image_id(const char* split, Index i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05td", split, i);
  return buf;
}

std::vector<WordStateSequence> make_sequences(const char* split, Index count, const Matrix& prototypes,
                                              const SynthConfig& cfg, std::mt19937_64& rng) {
  const auto& vocab = vocabulary();
  std::uniform_int_distribution<int> length(cfg.min_tokens, cfg.max_tokens);
  std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1);
  std::normal_distribution<double> noise(0.0, 0.5);
  std::vector<WordStateSequence> out;
  for (Index i = 0; i < count; ++i) {
    WordStateSequence s;
    s.image_id = image_id(split, i);
    const int k = length(rng);
    s.states.resize(k, cfg.state_dim);
    for (int t = 0; t < k; ++t) {
      const std::size_t w = word(rng);
      s.tokens.push_back(vocab[w]);
      for (Index j = 0; j < cfg.state_dim; ++j)
        s.states(t, j) = f32(prototypes(static_cast<Index>(w), j) + noise(rng));
    }
    out.push_back(std::move(s));
  }
  return out;
}

FeatureMatrix degrade(const FeatureMatrix& f, const StandardizationParams& params, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureMatrix out = f;
  out.source = FeatureSource::cnn("degraded");
  for (Index i = 0; i < f.rows(); ++i)
    for (Index j = 0; j < f.cols(); ++j) out.values(i, j) = f32(f.values(i, j) + sd * params.stds[j] * noise(rng));
  return out;
}

std::vector<VoxelRecord> make_voxels(Index count) {
  const Roi rois[] = {Roi::EV, Roi::LOC, Roi::OPA, Roi::PPA, Roi::RSC};
  std::vector<VoxelRecord> out;
  for (Index v = 0; v < count; ++v) {
    char id[32];
    std::snprintf(id, sizeof id, "v%05td", v);
    out.push_back({id, "CSI" + std::to_string(1 + (v / 10) % 3), rois[v % 5],
                   (v / 5) % 2 == 0 ? Hemisphere::L : Hemisphere::R});
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_train < 2 || n_test < 3) fail(ErrorKind::validation, "synthetic splits need n_train >= 2 and n_test >= 3");
  if (voxels < 1 || state_dim < 1) fail(ErrorKind::validation, "synthetic voxels and state_dim must be positive");
  if (planted_sparsity < 1 || planted_sparsity > state_dim)
    fail(ErrorKind::validation, "planted sparsity must lie in [1, state_dim]");
  if (!(snr > 0.0)) fail(ErrorKind::validation, "snr must be positive");
  if (!(degraded_noise >= 0.0)) fail(ErrorKind::validation, "degraded noise must be nonnegative");
  if (min_tokens < 1 || max_tokens < min_tokens) fail(ErrorKind::validation, "token length bounds are invalid");
}

SynthBundle make_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix prototypes(std::ssize(vocabulary()), cfg.state_dim);
  for (Index w = 0; w < prototypes.rows(); ++w)
    for (Index j = 0; j < cfg.state_dim; ++j) prototypes(w, j) = gauss(rng);

  SynthBundle b;
  b.train_states = make_sequences("train", cfg.n_train, prototypes, cfg, rng);
  b.test_states = make_sequences("test", cfg.n_test, prototypes, cfg, rng);
  PoolingOptions opts;
  opts.state_dim = cfg.state_dim;
  b.train_icf = build_feature_matrix(b.train_states, opts, 1);
  b.test_icf = build_feature_matrix(b.test_states, opts, 1);

  const StandardizationParams params = fit_standardization(b.train_icf.values);
  const Matrix z_train = params.apply(b.train_icf.values);
  const Matrix z_test = params.apply(b.test_icf.values);

  const auto voxels = make_voxels(cfg.voxels);
  b.train_responses.voxels = voxels;
  b.test_responses.voxels = voxels;
  b.train_responses.image_ids = b.train_icf.image_ids;
  b.test_responses.image_ids = b.test_icf.image_ids;
  b.train_responses.values.resize(cfg.n_train, cfg.voxels);
  b.test_responses.values.resize(cfg.n_test, cfg.voxels);

  std::vector<Index> columns(static_cast<std::size_t>(cfg.state_dim));
  for (Index j = 0; j < cfg.state_dim; ++j) columns[static_cast<std::size_t>(j)] = j;
  std::uniform_real_distribution<double> magnitude(0.5, 1.5);
  std::bernoulli_distribution negative(0.5);
  for (Index v = 0; v < cfg.voxels; ++v) {
    PlantedVoxel p;
    std::shuffle(columns.begin(), columns.end(), rng);
    p.support.assign(columns.begin(), columns.begin() + cfg.planted_sparsity);
    std::sort(p.support.begin(), p.support.end());
    for (std::size_t k = 0; k < p.support.size(); ++k) p.weights.push_back(magnitude(rng) * (negative(rng) ? -1.0 : 1.0));
    p.intercept = gauss(rng);

    Vector signal_train = Vector::Zero(cfg.n_train);
    Vector signal_test = Vector::Zero(cfg.n_test);
    for (std::size_t k = 0; k < p.support.size(); ++k) {
      signal_train += p.weights[k] * z_train.col(p.support[k]);
      signal_test += p.weights[k] * z_test.col(p.support[k]);
    }
    const double var = (signal_train.array() - signal_train.mean()).square().mean();
    p.noise_sd = std::sqrt(var / cfg.snr);
    for (Index i = 0; i < cfg.n_train; ++i)
      b.train_responses.values(i, v) = f32(p.intercept + signal_train[i] + p.noise_sd * gauss(rng));
    for (Index i = 0; i < cfg.n_test; ++i)
      b.test_responses.values(i, v) = f32(p.intercept + signal_test[i] + p.noise_sd * gauss(rng));
    b.truth.push_back(std::move(p));
  }

  b.train_degraded = degrade(b.train_icf, params, cfg.degraded_noise, rng);
  b.test_degraded = degrade(b.test_icf, params, cfg.degraded_noise, rng);
  return b;
}

void write_bundle(const SynthBundle& b, const SynthConfig& cfg, const std::filesystem::path& dir) {
  using namespace interchange;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create '" + dir.string() + "': " + ec.message());

  write_word_states(b.train_states, dir / "train_states.jsonl", dir / "train_states.fmat");
  write_word_states(b.test_states, dir / "test_states.jsonl", dir / "test_states.fmat");
  write_fmat(from_features(b.train_icf), dir / "train_icf.fmat");
  write_fmat(from_features(b.test_icf), dir / "test_icf.fmat");
  write_fmat(from_features(b.train_degraded), dir / "train_degraded.fmat");
  write_fmat(from_features(b.test_degraded), dir / "test_degraded.fmat");
  write_responses(b.train_responses, dir / "train_responses.fmat", dir / "voxels.csv");
  write_responses(b.test_responses, dir / "test_responses.fmat", dir / "voxels.csv");

  nlohmann::json voxels = nlohmann::json::array();
  for (std::size_t v = 0; v < b.truth.size(); ++v) {
    const auto& p = b.truth[v];
    voxels.push_back({{"voxel_id", b.train_responses.voxels[v].voxel_id},
                      {"support", p.support},
                      {"weights", p.weights},
                      {"intercept", p.intercept},
                      {"noise_sd", p.noise_sd}});
  }
  nlohmann::json doc = {{"seed", cfg.seed},
                        {"n_train", cfg.n_train},
                        {"n_test", cfg.n_test},
                        {"state_dim", cfg.state_dim},
                        {"snr", cfg.snr},
                        {"degraded_noise", cfg.degraded_noise},
                        {"noise_ceiling", std::sqrt(cfg.snr / (1.0 + cfg.snr))},
                        {"voxels", std::move(voxels)}};
  write_file(dir / "truth.json", doc.dump(2) + "\n");
}

}  // namespace icfenc
