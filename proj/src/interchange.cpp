#include "icfenc/interchange.hpp"

#include "icfenc/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <set>
#include <sstream>

namespace icfenc::interchange {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "FMAT";
constexpr std::size_t kPreamble = 4 + 1 + 4;

std::size_t width(Dtype d) { return d == Dtype::f32 ? 4 : 8; }

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(std::string_view in, std::size_t at) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

[[noreturn]] void format_error(FormatCode code, const std::string& what) {
  const ErrorKind kind = code == FormatCode::unsupported_version ? ErrorKind::unsupported_version : ErrorKind::parse;
  throw Error(kind, "FMAT " + std::string(to_string(code)) + ": " + what, code);
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = nl + 1;
  }
  return lines;
}

[[noreturn]] void line_error(std::size_t line, const std::string& what) {
  fail(ErrorKind::validation, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::string encode_fmat(const Fmat& m) {
  if (m.rows < 0 || m.cols < 0 || std::ssize(m.values) != m.rows * m.cols)
    fail(ErrorKind::validation, "FMAT value count does not match shape");
  if (m.ids && std::ssize(*m.ids) != m.rows) fail(ErrorKind::validation, "FMAT ids length does not match rows");

  json header = {{"dtype", m.dtype == Dtype::f32 ? "f32" : "f64"},
                 {"shape", {m.rows, m.cols}},
                 {"order", "row-major"}};
  if (m.ids) header["ids"] = *m.ids;
  if (m.source) header["source"] = *m.source;
  const std::string text = header.dump();

  std::string out(kMagic);
  out.push_back(static_cast<char>(kFmatVersion));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + m.values.size() * width(m.dtype));
  for (double v : m.values) {
    if (m.dtype == Dtype::f32)
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    else
      put_le(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Fmat decode_fmat(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
    format_error(FormatCode::bad_magic, "file does not start with \"FMAT\"");
  if (bytes.size() < kPreamble) format_error(FormatCode::truncated_header, "file ends inside the preamble");
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kFmatVersion)
    format_error(FormatCode::unsupported_version, "version byte " + std::to_string(version) + " (supported: 1)");
  const std::size_t header_len = get_le<std::uint32_t>(bytes, 5);
  if (bytes.size() - kPreamble < header_len)
    format_error(FormatCode::truncated_header, "header_len " + std::to_string(header_len) + " exceeds file size");

  json header;
  try {
    header = json::parse(bytes.substr(kPreamble, header_len));
  } catch (const json::parse_error& e) {
    format_error(FormatCode::bad_header, std::string("header is not valid JSON: ") + e.what());
  }

  Fmat m;
  try {
    if (!header.is_object()) format_error(FormatCode::bad_header, "header must be a JSON object");
    const std::string dtype = header.at("dtype").get<std::string>();
    if (dtype == "f32") m.dtype = Dtype::f32;
    else if (dtype == "f64") m.dtype = Dtype::f64;
    else format_error(FormatCode::bad_header, "unsupported dtype '" + dtype + "'");
    if (header.at("order").get<std::string>() != "row-major")
      format_error(FormatCode::bad_header, "order must be \"row-major\"");
    const auto& shape = header.at("shape");
    if (!shape.is_array() || shape.size() != 2 || !shape[0].is_number_unsigned() || !shape[1].is_number_unsigned())
      format_error(FormatCode::bad_header, "shape must be two nonnegative integers");
    m.rows = shape[0].get<Index>();
    m.cols = shape[1].get<Index>();
    if (header.contains("ids")) m.ids = header["ids"].get<std::vector<std::string>>();
    if (header.contains("source")) m.source = header["source"].get<std::string>();
  } catch (const json::exception& e) {
    format_error(FormatCode::bad_header, std::string("malformed header field: ") + e.what());
  }
  if (m.ids && std::ssize(*m.ids) != m.rows)
    format_error(FormatCode::ids_length, std::to_string(m.ids->size()) + " ids for " + std::to_string(m.rows) + " rows");

  const std::size_t count = static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols);
  const std::size_t payload = bytes.size() - kPreamble - header_len;
  if (payload != count * width(m.dtype))
    format_error(FormatCode::payload_length, "payload holds " + std::to_string(payload) + " bytes, shape needs " +
                                                 std::to_string(count * width(m.dtype)));

  m.values.resize(count);
  std::size_t at = kPreamble + header_len;
  for (std::size_t i = 0; i < count; ++i, at += width(m.dtype)) {
    m.values[i] = m.dtype == Dtype::f32 ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, at)))
                                        : std::bit_cast<double>(get_le<std::uint64_t>(bytes, at));
  }
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::io, "error reading '" + path.string() + "'");
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "error writing '" + path.string() + "'");
}

void write_fmat(const Fmat& m, const std::filesystem::path& path) { write_file(path, encode_fmat(m)); }

Fmat read_fmat(const std::filesystem::path& path) { return decode_fmat(read_file(path)); }

Fmat to_fmat(const Matrix& values, Dtype dtype) {
  Fmat m;
  m.dtype = dtype;
  m.rows = values.rows();
  m.cols = values.cols();
  m.values.resize(static_cast<std::size_t>(m.rows * m.cols));
  for (Index i = 0; i < m.rows; ++i)
    for (Index j = 0; j < m.cols; ++j) m.values[static_cast<std::size_t>(i * m.cols + j)] = values(i, j);
  return m;
}

Matrix to_matrix(const Fmat& m) {
  Matrix out(m.rows, m.cols);
  for (Index i = 0; i < m.rows; ++i)
    for (Index j = 0; j < m.cols; ++j) out(i, j) = m.values[static_cast<std::size_t>(i * m.cols + j)];
  return out;
}

Fmat from_features(const FeatureMatrix& f, Dtype dtype) {
  Fmat m = to_fmat(f.values, dtype);
  m.ids = f.image_ids;
  m.source = f.source.tag();
  return m;
}

FeatureMatrix to_features(const Fmat& m) {
  if (!m.ids) fail(ErrorKind::validation, "feature FMAT must carry image ids");
  FeatureMatrix f;
  f.values = to_matrix(m);
  f.image_ids = *m.ids;
  f.source = m.source ? FeatureSource::parse(*m.source) : FeatureSource::icf();
  validate(f);
  return f;
}

WordStatesRead parse_word_states(std::string_view jsonl, const Fmat& states) {
  WordStatesRead out;
  const Matrix all = to_matrix(states);
  struct Range {
    Index start, end;
    std::size_t line;
  };
  std::vector<Range> ranges;

  const auto lines = split_lines(jsonl);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::size_t line_no = n + 1;
    const auto& line = lines[n];
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    WordStateSequence seq;
    Index start = 0, end = 0;
    try {
      seq.image_id = rec.at("image_id").get<std::string>();
      seq.tokens = rec.at("tokens").get<std::vector<std::string>>();
      const auto& r = rec.at("state_rows");
      if (!r.is_array() || r.size() != 2) line_error(line_no, "state_rows must be [start, end]");
      start = r[0].get<Index>();
      end = r[1].get<Index>();
    } catch (const json::exception& e) {
      line_error(line_no, std::string("malformed record: ") + e.what());
    }
    if (seq.tokens.empty()) line_error(line_no, "record has no tokens");
    if (start < 0 || end < start || end > states.rows)
      line_error(line_no, "state_rows [" + std::to_string(start) + ", " + std::to_string(end) +
                              ") out of bounds for " + std::to_string(states.rows) + " state rows");
    if (end - start != std::ssize(seq.tokens))
      line_error(line_no, std::to_string(seq.tokens.size()) + " tokens but state_rows spans " +
                              std::to_string(end - start) + " rows");
    seq.states = all.middleRows(start, end - start);
    ranges.push_back({start, end, line_no});
    out.sequences.push_back(std::move(seq));
  }

  std::sort(ranges.begin(), ranges.end(), [](const Range& a, const Range& b) {
    return a.start != b.start ? a.start < b.start : a.line < b.line;
  });
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].start < ranges[i - 1].end) {
      const auto line = std::max(ranges[i].line, ranges[i - 1].line);
      line_error(line, "state_rows overlap with line " + std::to_string(std::min(ranges[i].line, ranges[i - 1].line)));
    }
  }
  if (out.sequences.empty()) out.warnings.push_back("word-state index contains no records");
  return out;
}

WordStatesRead read_word_states(const std::filesystem::path& jsonl, const std::filesystem::path& states) {
  return parse_word_states(read_file(jsonl), read_fmat(states));
}

void write_word_states(const std::vector<WordStateSequence>& seqs, const std::filesystem::path& jsonl,
                       const std::filesystem::path& states, Dtype dtype) {
  Index total = 0, dim = 0;
  for (const auto& s : seqs) {
    if (std::ssize(s.tokens) != s.states.rows())
      fail(ErrorKind::validation, "sequence '" + s.image_id + "' has mismatched tokens and states");
    if (total > 0 && s.states.cols() != dim) fail(ErrorKind::validation, "sequences disagree on state dimension");
    dim = s.states.cols();
    total += s.states.rows();
  }
  Matrix stacked(total, dim);
  std::string index;
  Index row = 0;
  for (const auto& s : seqs) {
    stacked.middleRows(row, s.states.rows()) = s.states;
    json rec = {{"image_id", s.image_id}, {"tokens", s.tokens}, {"state_rows", {row, row + s.states.rows()}}};
    index += rec.dump() + "\n";
    row += s.states.rows();
  }
  write_fmat(to_fmat(stacked, dtype), states);
  write_file(jsonl, index);
}

std::vector<VoxelRecord> parse_voxel_meta(std::string_view csv) {
  const auto lines = split_lines(csv);
  if (lines.empty() || lines[0] != "voxel_id,subject,roi,hemisphere")
    line_error(1, "expected header 'voxel_id,subject,roi,hemisphere'");
  std::vector<VoxelRecord> out;
  std::set<std::string> seen;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(lines[n]);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() != 4) line_error(n + 1, "expected 4 fields, got " + std::to_string(fields.size()));
    VoxelRecord v;
    v.voxel_id = fields[0];
    v.subject = fields[1];
    try {
      v.roi = parse_roi(fields[2]);
      v.hemisphere = parse_hemisphere(fields[3]);
    } catch (const Error& e) {
      line_error(n + 1, e.what());
    }
    if (v.voxel_id.empty()) line_error(n + 1, "empty voxel_id");
    if (!seen.insert(v.voxel_id).second) line_error(n + 1, "duplicate voxel_id '" + v.voxel_id + "'");
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<VoxelRecord> read_voxel_meta(const std::filesystem::path& path) { return parse_voxel_meta(read_file(path)); }

void write_voxel_meta(const std::vector<VoxelRecord>& voxels, const std::filesystem::path& path) {
  std::string out = "voxel_id,subject,roi,hemisphere\n";
  for (const auto& v : voxels)
    out += v.voxel_id + "," + v.subject + "," + to_string(v.roi) + "," + to_string(v.hemisphere) + "\n";
  write_file(path, out);
}

VoxelResponseMatrix assemble_responses(const Fmat& values, std::vector<VoxelRecord> voxels) {
  if (std::ssize(voxels) != values.cols)
    fail(ErrorKind::validation, "response matrix has " + std::to_string(values.cols) + " columns but metadata lists " +
                                    std::to_string(voxels.size()) + " voxels");
  if (!values.ids) fail(ErrorKind::validation, "response FMAT must carry image ids");
  VoxelResponseMatrix r;
  r.values = to_matrix(values);
  r.image_ids = *values.ids;
  r.voxels = std::move(voxels);
  validate(r);
  return r;
}

VoxelResponseMatrix read_responses(const std::filesystem::path& fmat, const std::filesystem::path& meta) {
  return assemble_responses(read_fmat(fmat), read_voxel_meta(meta));
}

void write_responses(const VoxelResponseMatrix& r, const std::filesystem::path& fmat,
                     const std::filesystem::path& meta, Dtype dtype) {
  Fmat m = to_fmat(r.values, dtype);
  m.ids = r.image_ids;
  write_fmat(m, fmat);
  write_voxel_meta(r.voxels, meta);
}

}  // namespace icfenc::interchange
