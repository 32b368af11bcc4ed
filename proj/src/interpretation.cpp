#include "icfenc/interpretation.hpp"

#include "icfenc/error.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

namespace icfenc {

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80 ? 1 : 0;
  return n;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

bool overlaps(const PlacedWord& a, const PlacedWord& b, double pad) {
  return a.x < b.x + b.width + pad && b.x < a.x + a.width + pad && a.y < b.y + b.height + pad &&
         b.y < a.y + a.height + pad;
}

void check_model_dim(const VoxelEncodingModel& model, Index state_dim) {
  if (!model.standardization || model.standardization->dim() != state_dim)
    fail(ErrorKind::validation, "voxel '" + model.voxel.voxel_id + "' model expects " +
                                    std::to_string(model.standardization ? model.standardization->dim() : 0) +
                                    " features, word states have " + std::to_string(state_dim));
}

}  // namespace

ImageAttribution attribute_words(const VoxelEncodingModel& model, const WordStateSequence& seq, double observed,
                                 int k, const PoolingOptions& opts) {
  if (k < 1) fail(ErrorKind::validation, "words per image must be at least 1");
  check_model_dim(model, seq.states.cols());
  const auto [first, last] = word_state_rows(seq, opts);

  ImageAttribution out;
  out.image_id = seq.image_id;
  std::vector<double> row(static_cast<std::size_t>(seq.states.cols()));
  for (Index i = first; i < last; ++i) {
    for (Index j = 0; j < seq.states.cols(); ++j) row[static_cast<std::size_t>(j)] = seq.states(i, j);
    const double pred = model.predict_row(row);
    out.ranked.push_back({seq.tokens[static_cast<std::size_t>(i)], i, std::abs(pred - observed)});
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const TokenScore& a, const TokenScore& b) { return a.error < b.error; });
  const auto keep = std::min<std::size_t>(out.ranked.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < keep; ++i) out.selected.push_back(out.ranked[i].token);
  return out;
}

std::vector<std::pair<std::string, int>> WordFrequencyTable::ranked() const {
  std::vector<std::pair<std::string, int>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {"a", "an", "the", "of", "and", "to", "in", "on", "is", "are", "with", "at"};
  return words;
}

WordFrequencyTable build_frequency_table(const std::string& voxel_id, const std::vector<ImageAttribution>& attributions,
                                         const std::set<std::string>& stopwords) {
  if (attributions.empty()) fail(ErrorKind::validation, "no attributions for voxel '" + voxel_id + "'");
  WordFrequencyTable t;
  t.voxel_id = voxel_id;
  for (const auto& a : attributions) {
    for (const auto& tok : a.selected) {
      const std::string word = lowercase(tok);
      if (stopwords.count(word)) continue;
      ++t.counts[word];
      ++t.total_selections;
    }
  }
  if (t.counts.empty()) t.warnings.push_back("voxel '" + voxel_id + "': every selected word was a stopword");
  return t;
}

std::vector<WordFrequencyTable> interpret_voxels(const EncodingModelSet& models,
                                                 const std::vector<WordStateSequence>& seqs, const Matrix& observed,
                                                 const std::vector<Index>& voxel_columns, int k,
                                                 const std::set<std::string>& stopwords, const PoolingOptions& opts,
                                                 int workers) {
  if (seqs.empty()) fail(ErrorKind::validation, "no word-state sequences to interpret");
  if (observed.rows() != std::ssize(seqs))
    fail(ErrorKind::validation, "observed responses have " + std::to_string(observed.rows()) + " rows for " +
                                    std::to_string(seqs.size()) + " sequences");
  if (k < 1) fail(ErrorKind::validation, "words per image must be at least 1");
  for (const auto& s : seqs) word_state_rows(s, opts);
  for (Index v : voxel_columns) {
    if (v < 0 || v >= std::ssize(models.models) || v >= observed.cols())
      fail(ErrorKind::validation, "voxel column " + std::to_string(v) + " out of range");
    check_model_dim(models.models[static_cast<std::size_t>(v)], opts.state_dim);
  }

  std::vector<WordFrequencyTable> out(voxel_columns.size());
  const auto n = std::ssize(voxel_columns);
#pragma omp parallel for schedule(dynamic) num_threads(detail::resolve_workers(workers))
  for (Index c = 0; c < n; ++c) {
    const Index v = voxel_columns[static_cast<std::size_t>(c)];
    const auto& model = models.models[static_cast<std::size_t>(v)];
    std::vector<ImageAttribution> attrs;
    attrs.reserve(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i)
      attrs.push_back(attribute_words(model, seqs[i], observed(static_cast<Index>(i), v), k, opts));
    out[static_cast<std::size_t>(c)] = build_frequency_table(model.voxel.voxel_id, attrs, stopwords);
  }
  return out;
}

std::string frequency_table_csv(const WordFrequencyTable& t) {
  std::string out = "token,count\n";
  for (const auto& [tok, n] : t.ranked()) out += tok + "," + std::to_string(n) + "\n";
  return out;
}

WordFrequencyTable parse_frequency_table_csv(std::string_view csv, std::string voxel_id) {
  std::istringstream in{std::string(csv)};
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "token,count") fail(ErrorKind::parse, "frequency table must start with header 'token,count'");
  WordFrequencyTable t;
  t.voxel_id = std::move(voxel_id);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    int count = 0;
    try {
      if (comma == std::string::npos || comma == 0) throw std::invalid_argument("missing field");
      std::size_t used = 0;
      count = std::stoi(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      fail(ErrorKind::parse, "frequency table line " + std::to_string(line_no) + ": expected token,count");
    }
    if (count < 1) fail(ErrorKind::parse, "frequency table line " + std::to_string(line_no) + ": count must be positive");
    t.counts[line.substr(0, comma)] += count;
    t.total_selections += count;
  }
  return t;
}

std::vector<PlacedWord> layout_wordcloud(const WordFrequencyTable& table, const WordCloudStyle& style) {
  if (table.counts.empty())
    fail(ErrorKind::validation, "word cloud for '" + table.voxel_id +
                                    "' has no words; review the significance threshold or stopword list");
  if (style.palette.empty()) fail(ErrorKind::validation, "word cloud palette is empty");
  if (!(style.min_font > 0.0 && style.max_font >= style.min_font))
    fail(ErrorKind::validation, "font sizes must satisfy 0 < min_font <= max_font");

  const auto words = table.ranked();
  const int cmax = words.front().second;
  const int cmin = words.back().second;

  std::mt19937_64 rng(style.seed);
  const double theta0 = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 * std::numbers::pi;

  std::vector<PlacedWord> placed;
  for (std::size_t w = 0; w < words.size(); ++w) {
    PlacedWord p;
    p.token = words[w].first;
    p.count = words[w].second;
    p.font_size = cmax == cmin ? style.max_font
                               : style.min_font + (style.max_font - style.min_font) * (p.count - cmin) / (cmax - cmin);
    p.width = kAdvanceEm * p.font_size * static_cast<double>(utf8_length(p.token));
    p.height = p.font_size;
    p.color = style.palette[w % style.palette.size()];

    // Walk an Archimedean spiral outward until the box is clear of every placed word.
    for (long step = 0;; ++step) {
      const double phi = 0.1 * static_cast<double>(step);
      const double r = 3.0 * phi;
      p.x = r * std::cos(theta0 + phi) - p.width / 2.0;
      p.y = r * std::sin(theta0 + phi) - p.height / 2.0;
      if (std::none_of(placed.begin(), placed.end(), [&](const PlacedWord& q) { return overlaps(p, q, style.padding); }))
        break;
    }
    placed.push_back(std::move(p));
  }

  double minx = placed.front().x, miny = placed.front().y;
  for (const auto& p : placed) {
    minx = std::min(minx, p.x);
    miny = std::min(miny, p.y);
  }
  const double margin = 10.0;
  for (auto& p : placed) {
    p.x = std::round((p.x - minx + margin) * 100.0) / 100.0;
    p.y = std::round((p.y - miny + margin) * 100.0) / 100.0;
    p.font_size = std::round(p.font_size * 100.0) / 100.0;
  }
  return placed;
}

std::string render_wordcloud_svg(const WordFrequencyTable& table, const WordCloudStyle& style) {
  const auto placed = layout_wordcloud(table, style);
  double width = 0.0, height = 0.0;
  for (const auto& p : placed) {
    width = std::max(width, p.x + p.width);
    height = std::max(height, p.y + p.height);
  }
  width = std::ceil(width + 10.0);
  height = std::ceil(height + 10.0);

  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed2(width) + "\" height=\"" + fixed2(height) +
         "\" viewBox=\"0 0 " + fixed2(width) + " " + fixed2(height) + "\">\n";
  svg += "<title>" + xml_escape(table.voxel_id) + "</title>\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& p : placed) {
    svg += "<text x=\"" + fixed2(p.x) + "\" y=\"" + fixed2(p.y + kAscentEm * p.font_size) + "\" font-family=\"" +
           xml_escape(style.font_family) + "\" font-size=\"" + fixed2(p.font_size) + "\" fill=\"" + p.color +
           "\" data-count=\"" + std::to_string(p.count) + "\">" + xml_escape(p.token) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

double word_distribution_similarity(const WordFrequencyTable& a, const WordFrequencyTable& b) {
  if (a.counts.empty() || b.counts.empty()) fail(ErrorKind::validation, "similarity needs two nonempty tables");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [tok, n] : a.counts) {
    na += static_cast<double>(n) * n;
    auto it = b.counts.find(tok);
    if (it != b.counts.end()) dot += static_cast<double>(n) * it->second;
  }
  for (const auto& [tok, n] : b.counts) nb += static_cast<double>(n) * n;
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

SimilarityResult similarity_matrix(const std::vector<LabeledTable>& tables, std::size_t top_n) {
  if (tables.size() < 2) fail(ErrorKind::validation, "similarity matrix needs at least two tables");
  const auto n = std::ssize(tables);
  SimilarityResult out;
  out.matrix = Matrix::Identity(n, n);
  std::vector<SimilarPair> cross;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const auto& ti = tables[static_cast<std::size_t>(i)];
      const auto& tj = tables[static_cast<std::size_t>(j)];
      const double s = word_distribution_similarity(ti.table, tj.table);
      out.matrix(i, j) = s;
      out.matrix(j, i) = s;
      if (ti.group != tj.group) cross.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), s});
    }
  }
  std::stable_sort(cross.begin(), cross.end(), [](const auto& a, const auto& b) { return a.similarity > b.similarity; });
  if (cross.size() > top_n) cross.resize(top_n);
  out.top_pairs = std::move(cross);
  return out;
}

std::string similarity_csv(const std::vector<LabeledTable>& tables, const SimilarityResult& result) {
  auto label = [](const LabeledTable& t) { return t.group + "/" + t.table.voxel_id; };
  std::string out = "table";
  for (const auto& t : tables) out += "," + label(t);
  out += "\n";
  for (std::size_t i = 0; i < tables.size(); ++i) {
    out += label(tables[i]);
    for (std::size_t j = 0; j < tables.size(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", result.matrix(static_cast<Index>(i), static_cast<Index>(j)));
      out += std::string(",") + buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace icfenc
