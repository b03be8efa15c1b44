#include "ccax/io.hpp"

#include "ccax/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace ccax {
namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in, const std::string& what) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != 8) throw FormatError(what + ": truncated header");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return v;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

double parse_double(std::string_view text, const std::string& where) {
  // from_chars rejects a leading '+', which some writers emit.
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw FormatError(where + ": cannot parse '" + std::string(text) + "' as a number");
  }
  if (!std::isfinite(v)) throw FormatError(where + ": non-finite value");
  return v;
}

std::size_t parse_index(std::string_view text, const std::string& where) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw FormatError(where + ": cannot parse '" + std::string(text) + "' as a row index");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string location(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

FeatureMatrix load_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<double> values;
  Eigen::Index cols = -1;
  Eigen::Index rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = trim(line);
    if (body.empty()) continue;
    Eigen::Index count = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = body.find(',', start);
      const auto field = trim(body.substr(start, comma == std::string_view::npos ? body.npos : comma - start));
      values.push_back(parse_double(field, location(path, lineno)));
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cols < 0) cols = count;
    if (count != cols) {
      throw DimensionError(location(path, lineno) + ": expected " + std::to_string(cols) +
                           " columns, got " + std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(path.string() + ": empty file");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  }
  return FeatureMatrix(std::move(m));
}

}  // namespace

void write_fmat(std::ostream& out, const Eigen::MatrixXd& values) {
  out.write(kFmatMagic.data(), static_cast<std::streamsize>(kFmatMagic.size()));
  put_u64(out, static_cast<std::uint64_t>(values.rows()));
  put_u64(out, static_cast<std::uint64_t>(values.cols()));
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      put_u64(out, std::bit_cast<std::uint64_t>(values(i, j)));
    }
  }
}

FeatureMatrix read_fmat(std::istream& in, const std::string& what) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() == 0) throw FormatError(what + ": empty file");
  if (in.gcount() != 8 || std::string_view(magic.data(), magic.size()) != kFmatMagic) {
    throw FormatError(what + ": bad FMAT1 magic");
  }
  const auto rows = get_u64(in, what);
  const auto cols = get_u64(in, what);
  if (rows == 0 || cols == 0) {
    throw DimensionError(what + ": header declares an empty " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " matrix");
  }
  if (rows > (std::uint64_t{1} << 40) / cols) throw DimensionError(what + ": implausible header size");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::vector<unsigned char> row_bytes(cols * 8);
  for (std::uint64_t i = 0; i < rows; ++i) {
    in.read(reinterpret_cast<char*>(row_bytes.data()), static_cast<std::streamsize>(row_bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != row_bytes.size()) {
      throw DimensionError(what + ": payload shorter than the " + std::to_string(rows) + "x" +
                           std::to_string(cols) + " header");
    }
    for (std::uint64_t j = 0; j < cols; ++j) {
      std::uint64_t bits = 0;
      for (int b = 7; b >= 0; --b) bits = (bits << 8) | row_bytes[j * 8 + static_cast<std::size_t>(b)];
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::bit_cast<double>(bits);
    }
  }
  return FeatureMatrix(std::move(m));
}

FeatureMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format) {
  if (format == MatrixFormat::csv) return load_csv(path);
  auto in = open_in(path, std::ios::in | std::ios::binary);
  auto m = read_fmat(in, path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DimensionError(path.string() + ": trailing bytes after the declared payload");
  }
  return m;
}

MatrixFormat format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? MatrixFormat::csv : MatrixFormat::fmat1;
}

FeatureMatrix load_matrix_auto(const std::filesystem::path& path) { return load_matrix(path, format_for(path)); }

void save_matrix_auto(const FeatureMatrix& m, const std::filesystem::path& path) {
  if (format_for(path) == MatrixFormat::csv) save_matrix_csv(m, path);
  else save_matrix(m, path);
}

void save_matrix(const FeatureMatrix& m, const std::filesystem::path& path) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  write_fmat(out, m.values());
  finish(out, path);
}

void save_matrix_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
  auto out = open_out(path);
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, m.values()(i, j));
      if (j > 0) out << ',';
      out.write(buf, end - buf);
    }
    out << '\n';
  }
  finish(out, path);
}

// ---------------------------------------------------------------------------
// Embedding table

EmbeddingTable::EmbeddingTable(std::vector<std::string> tokens, Eigen::MatrixXd vectors)
    : tokens_(std::move(tokens)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(tokens_.size()) != vectors_.rows()) {
    throw DimensionError("embedding table: token count does not match vector count");
  }
  if (tokens_.empty() || vectors_.cols() < 1) throw DimensionError("embedding table is empty");
  if (!vectors_.allFinite()) throw FormatError("embedding table: non-finite value");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw FormatError("embedding table: empty token");
    if (!index_.emplace(tokens_[i], i).second) {
      throw FormatError("embedding table: duplicate token '" + tokens_[i] + "'");
    }
  }
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Eigen::VectorXd EmbeddingTable::vector(std::string_view token) const {
  auto i = find(token);
  if (!i) throw FormatError("token '" + std::string(token) + "' is not in the embedding table");
  return vectors_.row(static_cast<Eigen::Index>(*i)).transpose();
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  const auto header = split_ws(line);
  if (header.size() != 2) throw FormatError(location(path, 1) + ": expected '<count> <dim>' header");
  const auto count = parse_index(header[0], location(path, 1));
  const auto dim = parse_index(header[1], location(path, 1));
  if (count == 0 || dim == 0) throw DimensionError(location(path, 1) + ": empty table declared");

  std::vector<std::string> tokens;
  tokens.reserve(count);
  Eigen::MatrixXd vectors(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  std::unordered_set<std::string> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (tokens.size() == count) {
      throw FormatError(location(path, lineno) + ": more entries than the declared count " +
                        std::to_string(count));
    }
    if (fields.size() != dim + 1) {
      throw DimensionError(location(path, lineno) + ": expected " + std::to_string(dim) +
                           " values, got " + std::to_string(fields.size() - 1));
    }
    std::string token(fields[0]);
    if (!seen.insert(token).second) {
      throw FormatError(location(path, lineno) + ": duplicate token '" + token + "'");
    }
    const auto r = static_cast<Eigen::Index>(tokens.size());
    for (std::size_t j = 0; j < dim; ++j) {
      vectors(r, static_cast<Eigen::Index>(j)) = parse_double(fields[j + 1], location(path, lineno));
    }
    tokens.push_back(std::move(token));
  }
  if (tokens.size() != count) {
    throw FormatError(path.string() + ": header declares " + std::to_string(count) + " entries, found " +
                      std::to_string(tokens.size()));
  }
  return EmbeddingTable(std::move(tokens), std::move(vectors));
}

void save_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << table.size() << ' ' << table.dim() << '\n';
  char buf[40];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.tokens()[i];
    for (Eigen::Index j = 0; j < table.dim(); ++j) {
      std::snprintf(buf, sizeof buf, " %.17g", table.vectors()(static_cast<Eigen::Index>(i), j));
      out << buf;
    }
    out << '\n';
  }
  finish(out, path);
}

// ---------------------------------------------------------------------------
// Corpus

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  for (auto raw : split_ws(line)) {
    const auto punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
    while (!raw.empty() && punct(raw.front())) raw.remove_prefix(1);
    while (!raw.empty() && punct(raw.back())) raw.remove_suffix(1);
    if (raw.empty()) continue;
    std::string token(raw);
    std::transform(token.begin(), token.end(), token.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(token));
  }
  return out;
}

std::vector<std::size_t> load_pairing(const std::filesystem::path& path, std::optional<std::size_t> image_rows) {
  auto in = open_in(path);
  std::vector<std::size_t> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto idx = parse_index(body, location(path, lineno));
    if (image_rows && idx >= *image_rows) {
      throw DimensionError(location(path, lineno) + ": image row " + std::to_string(idx) +
                           " out of range (" + std::to_string(*image_rows) + " images)");
    }
    pairs.push_back(idx);
  }
  if (pairs.empty()) throw FormatError(path.string() + ": empty pairing file");
  return pairs;
}

void save_pairing(const std::vector<std::size_t>& pairs, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (auto p : pairs) out << p << '\n';
  finish(out, path);
}

SentenceCorpus load_corpus(const std::filesystem::path& path, const EmbeddingTable& table, OovPolicy oov_policy,
                           const std::optional<std::filesystem::path>& pairing_path,
                           std::optional<std::size_t> image_rows) {
  auto in = open_in(path);
  SentenceCorpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> kept;
    for (auto& tok : tokenize(line)) {
      if (table.contains(tok)) {
        kept.push_back(std::move(tok));
      } else if (oov_policy == OovPolicy::error) {
        throw FormatError(location(path, lineno) + ": unknown token '" + tok + "'");
      }
    }
    if (kept.empty()) {
      throw FormatError(location(path, lineno) + ": sentence has no in-vocabulary tokens");
    }
    corpus.sentences.push_back(std::move(kept));
  }
  if (corpus.sentences.empty()) throw FormatError(path.string() + ": empty corpus");

  if (pairing_path) {
    corpus.pair_index = load_pairing(*pairing_path, image_rows);
    if (corpus.pair_index.size() != corpus.sentences.size()) {
      throw DimensionError(pairing_path->string() + ": " + std::to_string(corpus.pair_index.size()) +
                           " pair entries for " + std::to_string(corpus.sentences.size()) + " sentences");
    }
  } else {
    corpus.pair_index.resize(corpus.sentences.size());
    for (std::size_t i = 0; i < corpus.pair_index.size(); ++i) {
      if (image_rows && i >= *image_rows) {
        throw DimensionError(path.string() + ": positional pairing needs more than " +
                             std::to_string(*image_rows) + " image rows");
      }
      corpus.pair_index[i] = i;
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Splits

std::string_view to_string(SplitRole role) {
  switch (role) {
    case SplitRole::train: return "train";
    case SplitRole::val: return "val";
    case SplitRole::test: return "test";
  }
  return "?";
}

std::vector<std::size_t> SplitAssignment::rows_with(SplitRole role) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < roles.size(); ++i) {
    if (roles[i] == role) out.push_back(i);
  }
  return out;
}

SplitAssignment load_splits(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::pair<std::size_t, SplitRole>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto tab = body.find('\t');
    if (tab == std::string_view::npos) throw FormatError(location(path, lineno) + ": expected '<row>\\t<role>'");
    const auto row = parse_index(body.substr(0, tab), location(path, lineno));
    const auto name = trim(body.substr(tab + 1));
    SplitRole role{};
    if (name == "train") {
      role = SplitRole::train;
    } else if (name == "val") {
      role = SplitRole::val;
    } else if (name == "test") {
      role = SplitRole::test;
    } else {
      throw FormatError(location(path, lineno) + ": unknown split '" + std::string(name) + "'");
    }
    entries.emplace_back(row, role);
  }
  if (entries.empty()) throw FormatError(path.string() + ": empty split file");
  SplitAssignment out;
  out.roles.resize(entries.size());
  std::vector<bool> seen(entries.size(), false);
  for (const auto& [row, role] : entries) {
    if (row >= entries.size() || seen[row]) {
      throw FormatError(path.string() + ": rows must be 0..n-1 each listed once (row " + std::to_string(row) + ")");
    }
    seen[row] = true;
    out.roles[row] = role;
  }
  return out;
}

void save_splits(const SplitAssignment& splits, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < splits.roles.size(); ++i) out << i << '\t' << to_string(splits.roles[i]) << '\n';
  finish(out, path);
}

}  // namespace ccax
