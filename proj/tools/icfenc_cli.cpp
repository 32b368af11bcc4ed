// icfenc: command-line driver for the caption-feature voxel encoding pipeline.
//
// Exit status: 0 success, 1 validation, 2 I/O, 3 internal.

#include "icfenc/config.hpp"
#include "icfenc/encoding.hpp"
#include "icfenc/error.hpp"
#include "icfenc/evaluation.hpp"
#include "icfenc/features.hpp"
#include "icfenc/interchange.hpp"
#include "icfenc/interpretation.hpp"
#include "icfenc/synth.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstring>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using namespace icfenc;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitInternal = 3;

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::io: return kExitIo;
    case ErrorKind::internal: return kExitInternal;
    default: return kExitValidation;
  }
}

void report_error(bool as_json, const std::string& kind, const std::string& code, const std::string& message,
                  int exit_code) {
  if (as_json) {
    nlohmann::json doc = {{"error", {{"kind", kind}, {"code", code}, {"message", message}, {"exit_code", exit_code}}}};
    std::cerr << doc.dump() << "\n";
  } else {
    std::cerr << "icfenc: " << message << "\n";
  }
}

void warn(const std::string& msg) { std::cerr << "icfenc: warning: " << msg << "\n"; }

// The config file must be known before option defaults are bound, so find it
// ahead of the real parse.
std::optional<std::string> find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0 && i + 1 < argc) return std::string(argv[i + 1]);
    if (std::strncmp(argv[i], "--config=", 9) == 0) return std::string(argv[i] + 9);
  }
  return std::nullopt;
}

bool has_flag(int argc, char** argv, const char* flag) {
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], flag) == 0) return true;
  return false;
}

void add_workers(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--workers", cfg.worker_count, "worker threads, 0 = all (config: worker_count)")
      ->capture_default_str();
}

void add_state_dim(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--state-dim", cfg.state_dim, "word-state dimension (config: state_dim)")->capture_default_str();
}

void add_solver(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--sparsity", cfg.sparsity, "candidates kept per pursuit step (config: sparsity_s)")
      ->capture_default_str();
  sub->add_option("--max-support", cfg.max_support, "support cap, 0 = 2 * sparsity (config: max_support)")
      ->capture_default_str();
  sub->add_option("--ratio", cfg.comparability_ratio, "comparability ratio (config: comparability_ratio)")
      ->capture_default_str();
  sub->add_option("--residual-tol", cfg.residual_tol, "residual norm stopping tolerance (config: residual_tol)")
      ->capture_default_str();
  sub->add_option("--algorithm", cfg.algorithm, "romp, omp or mp (config: algorithm)")
      ->capture_default_str()
      ->check(CLI::IsMember({"romp", "omp", "mp"}));
  sub->add_option("--standardize-features", cfg.standardize_features,
                  "z-score features on the training split (config: standardize_features)")
      ->capture_default_str();
  sub->add_option("--center-responses", cfg.center_responses,
                  "center each voxel's responses before fitting (config: center_responses)")
      ->capture_default_str();
}

EncodingConfig encoding_config(const PipelineConfig& cfg) {
  EncodingConfig e;
  e.solver = cfg.solver();
  e.standardize_features = cfg.standardize_features;
  e.center_responses = cfg.center_responses;
  return e;
}

PoolingOptions pooling(const PipelineConfig& cfg, bool keep_start, bool keep_end) {
  PoolingOptions o;
  o.state_dim = cfg.state_dim;
  o.skip_initial_state = !keep_start;
  o.skip_end_token = !keep_end;
  return o;
}

Alignment load_aligned(const fs::path& features, const fs::path& responses, const fs::path& voxels) {
  Alignment a = align(interchange::to_features(interchange::read_fmat(features)),
                      interchange::read_responses(responses, voxels));
  if (a.warning_count() > 0)
    warn("alignment dropped " + std::to_string(a.dropped_feature_ids.size()) + " feature rows and " +
         std::to_string(a.dropped_response_ids.size()) + " response rows without a match");
  return a;
}

std::vector<WordStateSequence> load_states(const fs::path& jsonl, const fs::path& fmat) {
  auto read = interchange::read_word_states(jsonl, fmat);
  for (const auto& w : read.warnings) warn(w);
  return std::move(read.sequences);
}

std::string safe_filename(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const bool error_json = has_flag(argc, argv, "--error-json");
  try {
    PipelineConfig cfg;
    if (auto path = find_config_arg(argc, argv)) cfg = load_config(*path);

    CLI::App app{"Caption-feature voxel encoding toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    bool error_json_flag = false;
    app.add_option("--config", config_path, "TOML key = value config file; flags override it");
    app.add_flag("--error-json", error_json_flag, "print failures as a JSON object on stderr");

    // pool
    auto* pool = app.add_subcommand("pool", "max-pool word states into an ICF feature matrix");
    fs::path pool_states, pool_matrix, pool_out;
    std::string pool_dtype = "f32";
    bool keep_start = false, keep_end = false;
    pool->add_option("--states", pool_states, "word-state index (.jsonl)")->required();
    pool->add_option("--states-matrix", pool_matrix, "stacked word states (.fmat)")->required();
    pool->add_option("--out", pool_out, "output feature matrix (.fmat)")->required();
    pool->add_option("--dtype", pool_dtype, "output precision")->capture_default_str()->check(CLI::IsMember({"f32", "f64"}));
    pool->add_flag("--keep-start", keep_start, "pool a leading <start> step too");
    pool->add_flag("--keep-end", keep_end, "pool a trailing <end> step too");
    add_state_dim(pool, cfg);
    add_workers(pool, cfg);

    // train
    auto* train = app.add_subcommand("train", "fit one sparse model per voxel");
    fs::path train_features, train_responses, train_voxels, train_out;
    train->add_option("--features", train_features, "training features (.fmat)")->required();
    train->add_option("--responses", train_responses, "training responses (.fmat)")->required();
    train->add_option("--voxels", train_voxels, "voxel metadata (.csv)")->required();
    train->add_option("--out", train_out, "model file (.json)")->required();
    add_solver(train, cfg);
    add_workers(train, cfg);

    // predict
    auto* pred = app.add_subcommand("predict", "predict voxel responses for a feature matrix");
    fs::path pred_models, pred_features, pred_out;
    pred->add_option("--models", pred_models, "model file (.json)")->required();
    pred->add_option("--features", pred_features, "features (.fmat)")->required();
    pred->add_option("--out", pred_out, "predictions (.fmat, f64)")->required();
    add_workers(pred, cfg);

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "score predictions with per-voxel Pearson correlation");
    fs::path eval_models, eval_features, eval_responses, eval_voxels, eval_json, eval_csv;
    eval->add_option("--models", eval_models, "model file (.json)")->required();
    eval->add_option("--features", eval_features, "test features (.fmat)")->required();
    eval->add_option("--responses", eval_responses, "test responses (.fmat)")->required();
    eval->add_option("--voxels", eval_voxels, "voxel metadata (.csv)")->required();
    eval->add_option("--out-json", eval_json, "report (.json)");
    eval->add_option("--out-csv", eval_csv, "report (.csv)");
    add_workers(eval, cfg);

    // layer-profile
    auto* prof = app.add_subcommand("layer-profile", "mean correlation per layer and region");
    std::vector<fs::path> prof_reports;
    fs::path prof_out, prof_best;
    prof->add_option("--report", prof_reports, "evaluation reports, in layer order")->required();
    prof->add_option("--out", prof_out, "profile table (.csv)")->required();
    prof->add_option("--best-out", prof_best, "best layer per region (.csv)");

    // compare
    auto* cmp = app.add_subcommand("compare", "compare two evaluation reports voxel by voxel");
    fs::path cmp_a, cmp_b;
    std::string cmp_prefix;
    cmp->add_option("--a", cmp_a, "report for model A")->required();
    cmp->add_option("--b", cmp_b, "report for model B")->required();
    cmp->add_option("--out-prefix", cmp_prefix, "writes <prefix>.json, _scatter.csv, _histogram.csv, _distance.csv")
        ->required();
    cmp->add_option("--threshold", cfg.threshold, "significance threshold on PC (config: threshold)")
        ->capture_default_str();
    cmp->add_option("--bins", cfg.histogram_bins, "histogram bins (config: histogram_bins)")->capture_default_str();

    // interpret
    auto* interp = app.add_subcommand("interpret", "word frequency tables for significant voxels");
    fs::path in_models, in_states, in_matrix, in_responses, in_voxels, in_report, in_out;
    std::string group_by = "region";
    std::size_t top_pairs = 10;
    interp->add_option("--models", in_models, "model file (.json)")->required();
    interp->add_option("--states", in_states, "test word-state index (.jsonl)")->required();
    interp->add_option("--states-matrix", in_matrix, "test word states (.fmat)")->required();
    interp->add_option("--responses", in_responses, "test responses (.fmat)")->required();
    interp->add_option("--voxels", in_voxels, "voxel metadata (.csv)")->required();
    interp->add_option("--report", in_report, "evaluation report; restricts to voxels at or above the threshold");
    interp->add_option("--out-dir", in_out, "directory for <voxel>.csv tables and similarity.csv")->required();
    interp->add_option("--group-by", group_by, "similarity grouping")->capture_default_str()->check(
        CLI::IsMember({"region", "subject"}));
    interp->add_option("--top-pairs", top_pairs, "cross-group pairs to list")->capture_default_str();
    interp->add_option("--threshold", cfg.threshold, "significance threshold on PC (config: threshold)")
        ->capture_default_str();
    interp->add_option("--k", cfg.words_per_image, "words selected per image (config: words_per_image)")
        ->capture_default_str();
    interp->add_option("--stopwords", cfg.stopwords, "words dropped from tables (config: stopwords)")
        ->capture_default_str();
    add_state_dim(interp, cfg);
    add_workers(interp, cfg);

    // wordcloud
    auto* cloud = app.add_subcommand("wordcloud", "render a frequency table as an SVG word cloud");
    fs::path cloud_table, cloud_out;
    WordCloudStyle style;
    cloud->add_option("--table", cloud_table, "frequency table (token,count .csv)")->required();
    cloud->add_option("--out", cloud_out, "output .svg")->required();
    cloud->add_option("--min-font", style.min_font)->capture_default_str();
    cloud->add_option("--max-font", style.max_font)->capture_default_str();
    cloud->add_option("--seed", cfg.seed, "layout seed (config: seed)")->capture_default_str();

    // threshold
    auto* thr = app.add_subcommand("threshold", "critical correlation for a t test");
    int thr_n = 0;
    double thr_p = 0.0;
    thr->add_option("--n", thr_n, "test samples")->required();
    thr->add_option("--p", thr_p, "significance level")->required();
    thr->add_option("--tails", cfg.tails, "one or two (config: tails)")->capture_default_str();

    // synth
    auto* syn = app.add_subcommand("synth", "write a synthetic fixture bundle with planted ground truth");
    fs::path syn_out;
    SynthConfig sc;
    syn->add_option("--out-dir", syn_out, "bundle directory")->required();
    syn->add_option("--seed", cfg.seed, "generator seed (config: seed)")->capture_default_str();
    add_state_dim(syn, cfg);
    syn->add_option("--n-train", sc.n_train)->capture_default_str();
    syn->add_option("--n-test", sc.n_test)->capture_default_str();
    syn->add_option("--voxels", sc.voxels)->capture_default_str();
    syn->add_option("--planted-sparsity", sc.planted_sparsity)->capture_default_str();
    syn->add_option("--snr", sc.snr, "signal / noise variance")->capture_default_str();
    syn->add_option("--degraded-noise", sc.degraded_noise)->capture_default_str();

    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      report_error(error_json, "validation", "usage", e.what(), kExitValidation);
      return kExitValidation;
    }
    cfg.validate();
    const int workers = cfg.worker_count;

    if (*pool) {
      const auto seqs = load_states(pool_states, pool_matrix);
      const auto f = build_feature_matrix(seqs, pooling(cfg, keep_start, keep_end), workers);
      interchange::write_fmat(interchange::from_features(f, pool_dtype == "f64" ? interchange::Dtype::f64
                                                                                 : interchange::Dtype::f32),
                              pool_out);
    } else if (*train) {
      const auto a = load_aligned(train_features, train_responses, train_voxels);
      const auto models = train_voxelwise(a.features, a.responses, encoding_config(cfg), workers);
      if (auto n = models.failure_count()) warn(std::to_string(n) + " voxels fell back to mean models");
      save_models(models, train_out);
    } else if (*pred) {
      const auto models = load_models(pred_models);
      const auto f = interchange::to_features(interchange::read_fmat(pred_features));
      interchange::Fmat out = interchange::to_fmat(predict(models, f, workers), interchange::Dtype::f64);
      out.ids = f.image_ids;
      interchange::write_fmat(out, pred_out);
    } else if (*eval) {
      if (eval_json.empty() && eval_csv.empty()) fail(ErrorKind::validation, "evaluate needs --out-json or --out-csv");
      const auto models = load_models(eval_models);
      const auto a = load_aligned(eval_features, eval_responses, eval_voxels);
      const auto report = evaluate(models, a.features, a.responses, workers);
      if (report.degenerate_count > 0)
        warn(std::to_string(report.degenerate_count) + " voxels had constant predictions or responses");
      if (!eval_json.empty()) export_report(report, ReportFormat::json, eval_json);
      if (!eval_csv.empty()) export_report(report, ReportFormat::csv, eval_csv);
    } else if (*prof) {
      std::vector<EvaluationReport> reports;
      for (const auto& p : prof_reports) reports.push_back(load_report(p));
      const auto profile = layer_profile(reports);
      interchange::write_file(prof_out, profile_to_csv(profile));
      if (!prof_best.empty()) {
        std::string out = "region,best_layer\n";
        for (const auto& region : profile.regions) out += region + "," + best_layer(profile, region) + "\n";
        interchange::write_file(prof_best, out);
      }
    } else if (*cmp) {
      const auto c = compare(load_report(cmp_a), load_report(cmp_b), cfg.threshold, cfg.histogram_bins);
      interchange::write_file(cmp_prefix + ".json", comparison_to_json(c));
      interchange::write_file(cmp_prefix + "_scatter.csv", comparison_scatter_csv(c));
      interchange::write_file(cmp_prefix + "_histogram.csv", comparison_histogram_csv(c));
      interchange::write_file(cmp_prefix + "_distance.csv", comparison_distance_csv(c));
    } else if (*interp) {
      const auto models = load_models(in_models);
      const auto responses = interchange::read_responses(in_responses, in_voxels);
      auto seqs = load_states(in_states, in_matrix);

      std::map<std::string, Index> row_of;
      for (Index i = 0; i < responses.rows(); ++i) row_of[responses.image_ids[static_cast<std::size_t>(i)]] = i;
      std::vector<WordStateSequence> kept;
      std::vector<Index> rows;
      for (auto& s : seqs) {
        auto it = row_of.find(s.image_id);
        if (it == row_of.end()) continue;
        rows.push_back(it->second);
        kept.push_back(std::move(s));
      }
      if (kept.size() != seqs.size())
        warn(std::to_string(seqs.size() - kept.size()) + " captioned images have no responses and were skipped");
      if (kept.empty()) fail(ErrorKind::alignment, "word states and responses share no image ids");
      Matrix observed(std::ssize(rows), responses.cols());
      for (std::size_t i = 0; i < rows.size(); ++i) observed.row(static_cast<Index>(i)) = responses.values.row(rows[i]);

      std::vector<Index> columns;
      std::optional<EvaluationReport> report;
      if (!in_report.empty()) report = load_report(in_report);
      for (Index v = 0; v < std::ssize(models.models); ++v) {
        if (models.models[static_cast<std::size_t>(v)].voxel.voxel_id != responses.voxels[static_cast<std::size_t>(v)].voxel_id)
          fail(ErrorKind::validation, "voxel order differs between models and responses");
        if (report && !(report->pc[static_cast<std::size_t>(v)] >= cfg.threshold)) continue;
        columns.push_back(v);
      }
      if (columns.empty()) fail(ErrorKind::validation, "no voxels reach the significance threshold");

      const auto tables = interpret_voxels(models, kept, observed, columns, cfg.words_per_image, cfg.stopword_set(),
                                           pooling(cfg, false, false), workers);
      std::error_code ec;
      fs::create_directories(in_out, ec);
      if (ec) fail(ErrorKind::io, "cannot create '" + in_out.string() + "': " + ec.message());
      std::vector<LabeledTable> labeled;
      for (std::size_t c = 0; c < tables.size(); ++c) {
        for (const auto& w : tables[c].warnings) warn(w);
        interchange::write_file(in_out / (safe_filename(tables[c].voxel_id) + ".csv"), frequency_table_csv(tables[c]));
        if (tables[c].counts.empty()) continue;
        const auto& meta = responses.voxels[static_cast<std::size_t>(columns[c])];
        labeled.push_back({group_by == "subject" ? meta.subject : region_labels_for(meta)[2], tables[c]});
      }
      if (labeled.size() >= 2) {
        const auto sim = similarity_matrix(labeled, top_pairs);
        interchange::write_file(in_out / "similarity.csv", similarity_csv(labeled, sim));
        std::string pairs = "table_a,table_b,similarity\n";
        for (const auto& p : sim.top_pairs)
          pairs += labeled[p.first].group + "/" + labeled[p.first].table.voxel_id + "," + labeled[p.second].group +
                   "/" + labeled[p.second].table.voxel_id + "," + format_real(p.similarity) + "\n";
        interchange::write_file(in_out / "top_pairs.csv", pairs);
      }
    } else if (*cloud) {
      style.seed = cfg.seed;
      const auto table = parse_frequency_table_csv(interchange::read_file(cloud_table), cloud_table.stem().string());
      interchange::write_file(cloud_out, render_wordcloud_svg(table, style));
    } else if (*thr) {
      std::cout << format_real(significance_threshold(thr_n, thr_p, parse_tails(cfg.tails))) << "\n";
    } else if (*syn) {
      sc.seed = cfg.seed;
      sc.state_dim = cfg.state_dim;
      write_bundle(make_synthetic(sc), sc, syn_out);
    }
    return 0;
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    report_error(error_json, to_string(e.kind()), to_string(e.code()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error(error_json, "internal", "none", e.what(), kExitInternal);
    return kExitInternal;
  }
}
