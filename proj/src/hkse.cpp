#include "ccax/hkse.hpp"

#include "ccax/error.hpp"
#include "ccax/parallel.hpp"
#include "ccax/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace ccax {
namespace {

void draw_layer(Eigen::MatrixXd& w, Eigen::VectorXd& b, Eigen::Index rows, Eigen::Index cols, double bandwidth,
                Rng rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double scale = std::sqrt(bandwidth);
  w.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = scale * normal(rng);
  b.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) b(i) = phase(rng);
}

Eigen::VectorXd fourier(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::VectorXd& v) {
  Eigen::VectorXd z = w * v + b;
  const double scale = std::sqrt(2.0 / static_cast<double>(w.rows()));
  return (z.array().cos() * scale).matrix();
}

double squared_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double t = a(i) - b(i);
    acc += t * t;
  }
  return acc;
}

double dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) acc += a(i) * b(i);
  return acc;
}

// mean of k(s1_i, s2_j) over all pairs, order-independent
double mean_pair_kernel(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, LayerKind kind, double gamma) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(s1.rows() * s2.rows()));
  for (Eigen::Index i = 0; i < s1.rows(); ++i) {
    const Eigen::VectorXd a = s1.row(i).transpose();
    for (Eigen::Index j = 0; j < s2.rows(); ++j) values.push_back(word_kernel(a, s2.row(j).transpose(), kind, gamma));
  }
  return exact_sum(values) / static_cast<double>(s1.rows() * s2.rows());
}

void check_layer(LayerKind kind, double bandwidth, Eigen::Index dim, const char* name) {
  if (kind != LayerKind::rbf) return;
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw InvalidArgument(std::string("rbf ") + name + " layer needs a positive bandwidth");
  if (dim < 1) throw InvalidArgument(std::string("rbf ") + name + " layer needs at least one feature");
}

}  // namespace

std::string to_string(LayerKind kind) { return kind == LayerKind::lin ? "lin" : "rbf"; }

LayerKind parse_layer_kind(std::string_view text) {
  if (text == "lin") return LayerKind::lin;
  if (text == "rbf") return LayerKind::rbf;
  throw InvalidArgument("unknown layer kind '" + std::string(text) + "' (expected lin or rbf)");
}

double exact_sum(std::span<const double> values) {
  // Shewchuk's algorithm with a correctly rounded final step.
  std::vector<double> partials;
  for (double x : values) {
    std::size_t i = 0;
    for (double y : partials) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[i++] = lo;
      x = hi;
    }
    partials.resize(i);
    partials.push_back(x);
  }
  std::size_t n = partials.size();
  if (n == 0) return 0.0;
  double hi = partials[--n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials[--n];
    hi = x + y;
    lo = y - (hi - x);
    if (lo != 0.0) break;
  }
  if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    if (y == x - hi) hi = x;
  }
  return hi;
}

HkseMap HkseMap::build(LayerKind word, LayerKind sentence, double gamma, double eta, Eigen::Index m,
                       Eigen::Index m_prime, Eigen::Index d, std::uint64_t seed) {
  if (d < 1) throw InvalidArgument("word vector dimension must be at least 1");
  check_layer(word, gamma, m, "word");
  check_layer(sentence, eta, m_prime, "sentence");
  HkseMap map;
  map.word_kind_ = word;
  map.sentence_kind_ = sentence;
  map.gamma_ = word == LayerKind::rbf ? gamma : 0.0;
  map.eta_ = sentence == LayerKind::rbf ? eta : 0.0;
  map.d_ = d;
  map.seed_ = seed;
  if (word == LayerKind::rbf) draw_layer(map.w_word_, map.b_word_, m, d, gamma, make_rng(seed, "hkse-word"));
  if (sentence == LayerKind::rbf)
    draw_layer(map.w_sent_, map.b_sent_, m_prime, map.word_dim(), eta, make_rng(seed, "hkse-sent"));
  return map;
}

Eigen::Index HkseMap::word_dim() const { return word_kind_ == LayerKind::rbf ? w_word_.rows() : d_; }

Eigen::Index HkseMap::output_dim() const {
  return sentence_kind_ == LayerKind::rbf ? w_sent_.rows() : word_dim();
}

Eigen::VectorXd HkseMap::word_feature(const Eigen::VectorXd& a) const {
  if (a.size() != d_)
    throw DimensionError("word vector has dimension " + std::to_string(a.size()) + ", map expects " +
                         std::to_string(d_));
  if (word_kind_ == LayerKind::lin) return a;
  return fourier(w_word_, b_word_, a);
}

Eigen::VectorXd HkseMap::embed_sentence(const Eigen::MatrixXd& tokens) const {
  if (tokens.rows() == 0) throw InvalidArgument("cannot embed an empty sentence");
  if (tokens.cols() != d_)
    throw DimensionError("word vectors have dimension " + std::to_string(tokens.cols()) + ", map expects " +
                         std::to_string(d_));
  const auto n = tokens.rows();
  Eigen::MatrixXd feats(word_dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) feats.col(i) = word_feature(tokens.row(i).transpose());
  Eigen::VectorXd pooled(feats.rows());
  std::vector<double> column(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < feats.rows(); ++r) {
    for (Eigen::Index i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = feats(r, i);
    pooled(r) = exact_sum(column) / static_cast<double>(n);
  }
  if (sentence_kind_ == LayerKind::lin) return pooled;
  return fourier(w_sent_, b_sent_, pooled);
}

void HkseMap::append_to(ModelArchive& archive, std::string_view prefix) const {
  const std::string p(prefix);
  archive.set(p + "word_variant", to_string(word_kind_));
  archive.set(p + "sent_variant", to_string(sentence_kind_));
  archive.set(p + "gamma", gamma_);
  archive.set(p + "eta", eta_);
  archive.set(p + "m", static_cast<long long>(word_kind_ == LayerKind::rbf ? w_word_.rows() : 0));
  archive.set(p + "m_prime", static_cast<long long>(sentence_kind_ == LayerKind::rbf ? w_sent_.rows() : 0));
  archive.set(p + "d", static_cast<long long>(d_));
  archive.set(p + "seed", std::to_string(seed_));
  if (word_kind_ == LayerKind::rbf) {
    archive.add_blob(p + "W_WORD", FeatureMatrix(w_word_));
    archive.add_blob(p + "B_WORD", FeatureMatrix(b_word_.transpose()));
  }
  if (sentence_kind_ == LayerKind::rbf) {
    archive.add_blob(p + "W_SENT", FeatureMatrix(w_sent_));
    archive.add_blob(p + "B_SENT", FeatureMatrix(b_sent_.transpose()));
  }
}

ModelArchive HkseMap::to_archive() const {
  ModelArchive archive;
  archive.set("model", std::string("hkse"));
  archive.set("maps", 1LL);
  append_to(archive, "");
  return archive;
}

HkseMap HkseMap::from_archive(const ModelArchive& archive, std::string_view prefix) {
  const std::string p(prefix);
  HkseMap map;
  map.word_kind_ = parse_layer_kind(archive.get(p + "word_variant"));
  map.sentence_kind_ = parse_layer_kind(archive.get(p + "sent_variant"));
  map.gamma_ = archive.get_double(p + "gamma");
  map.eta_ = archive.get_double(p + "eta");
  map.d_ = archive.get_int(p + "d");
  try {
    map.seed_ = std::stoull(archive.get(p + "seed"));
  } catch (const std::logic_error&) {
    throw FormatError("archive: bad hkse seed");
  }
  const auto m = archive.get_int(p + "m");
  const auto m_prime = archive.get_int(p + "m_prime");
  if (map.d_ < 1) throw FormatError("archive: hkse map has d < 1");
  auto load = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    const auto& blob = archive.blob(p + name).values();
    if (blob.rows() != rows || blob.cols() != cols)
      throw FormatError("archive: blob " + p + name + " has shape " + std::to_string(blob.rows()) + "x" +
                        std::to_string(blob.cols()) + ", manifest implies " + std::to_string(rows) + "x" +
                        std::to_string(cols));
    return Eigen::MatrixXd(blob);
  };
  if (map.word_kind_ == LayerKind::rbf) {
    if (m < 1) throw FormatError("archive: rbf word layer with m < 1");
    map.w_word_ = load("W_WORD", m, map.d_);
    map.b_word_ = load("B_WORD", 1, m).row(0).transpose();
  }
  if (map.sentence_kind_ == LayerKind::rbf) {
    if (m_prime < 1) throw FormatError("archive: rbf sentence layer with m_prime < 1");
    map.w_sent_ = load("W_SENT", m_prime, map.word_dim());
    map.b_sent_ = load("B_SENT", 1, m_prime).row(0).transpose();
  }
  return map;
}

double word_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, LayerKind kind, double gamma) {
  if (a.size() != b.size()) throw DimensionError("word vectors differ in dimension");
  if (kind == LayerKind::lin) return dot(a, b);
  return std::exp(-0.5 * gamma * squared_distance(a, b));
}

double exact_kernel(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, LayerKind word, LayerKind sentence,
                    double gamma, double eta) {
  if (s1.rows() == 0 || s2.rows() == 0) throw InvalidArgument("exact kernel of an empty sentence");
  if (s1.cols() != s2.cols()) throw DimensionError("sentences differ in word vector dimension");
  if (word == LayerKind::rbf && !(gamma > 0.0)) throw InvalidArgument("rbf word kernel needs gamma > 0");
  if (sentence == LayerKind::rbf && !(eta > 0.0)) throw InvalidArgument("rbf sentence kernel needs eta > 0");
  const double cross = mean_pair_kernel(s1, s2, word, gamma);
  if (sentence == LayerKind::lin) return cross;
  const double self1 = mean_pair_kernel(s1, s1, word, gamma);
  const double self2 = mean_pair_kernel(s2, s2, word, gamma);
  // self1 + self2 is commutative, so the result is symmetric in (s1, s2)
  const double delta = 2.0 * cross - (self1 + self2);
  return std::exp(0.5 * eta * std::min(delta, 0.0));
}

double bandwidth_heuristic(const EmbeddingTable& table, std::size_t sample_size, std::uint64_t seed) {
  std::vector<std::size_t> picked(table.size());
  for (std::size_t i = 0; i < picked.size(); ++i) picked[i] = i;
  if (sample_size < table.size()) {
    auto rng = make_rng(seed, "bandwidth");
    for (std::size_t i = 0; i < sample_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, picked.size() - 1);
      std::swap(picked[i], picked[pick(rng)]);
    }
    picked.resize(sample_size);
  }
  if (picked.size() < 2) throw InvalidArgument("bandwidth heuristic needs at least two sampled words");
  const auto& vecs = table.vectors();
  std::vector<double> dist;
  dist.reserve(picked.size() * (picked.size() - 1) / 2);
  for (std::size_t i = 0; i < picked.size(); ++i)
    for (std::size_t j = i + 1; j < picked.size(); ++j)
      dist.push_back(std::sqrt(squared_distance(vecs.row(static_cast<Eigen::Index>(picked[i])).transpose(),
                                                vecs.row(static_cast<Eigen::Index>(picked[j])).transpose())));
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>((dist.size() - 1) / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  const double median = *mid;
  if (!(median > 0.0)) throw SingularInputError("median pairwise word distance is zero");
  return 1.0 / (median * median);
}

Eigen::Index hoeffding_dimension(double log_cardinality, double delta, double epsilon) {
  if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  const double bound = std::ceil((log_cardinality - std::log(epsilon)) / (2.0 * delta * delta));
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(bound));
}

DimensionBound dimension_bound(std::size_t vocab_size, std::size_t max_sentence_length, double delta,
                               double epsilon) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
  if (vocab_size < 1) throw InvalidArgument("vocabulary size must be at least 1");
  if (max_sentence_length < 1) throw InvalidArgument("sentence length must be at least 1");
  const double log_a = std::log(static_cast<double>(vocab_size));
  return {hoeffding_dimension(2.0 * log_a, delta, epsilon),
          hoeffding_dimension(2.0 * static_cast<double>(max_sentence_length) * log_a, delta, epsilon)};
}

Eigen::MatrixXd sentence_vectors(const std::vector<std::string>& tokens, const EmbeddingTable& table) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(tokens.size()), table.dim());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto row = table.find(tokens[i]);
    if (!row) throw FormatError("token '" + tokens[i] + "' is not in the embedding table");
    out.row(static_cast<Eigen::Index>(i)) = table.vectors().row(static_cast<Eigen::Index>(*row));
  }
  return out;
}

FeatureMatrix embed_corpus(std::span<const HkseMap> maps, const SentenceCorpus& corpus, const EmbeddingTable& table,
                           std::size_t threads) {
  if (maps.empty()) throw InvalidArgument("embed_corpus needs at least one map");
  if (corpus.size() == 0) throw InvalidArgument("corpus is empty");
  Eigen::Index width = 0;
  for (const auto& map : maps) {
    if (map.input_dim() != table.dim())
      throw DimensionError("map expects word vectors of dimension " + std::to_string(map.input_dim()) +
                           ", table has " + std::to_string(table.dim()));
    width += map.output_dim();
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(corpus.size()), width);
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    const auto& tokens = corpus.sentences[i];
    if (tokens.empty()) throw InvalidArgument("sentence " + std::to_string(i) + " has no known tokens");
    const Eigen::MatrixXd vecs = sentence_vectors(tokens, table);
    Eigen::Index col = 0;
    for (const auto& map : maps) {
      const Eigen::VectorXd e = map.embed_sentence(vecs);
      out.block(static_cast<Eigen::Index>(i), col, 1, e.size()) = e.transpose();
      col += e.size();
    }
  });
  return FeatureMatrix(std::move(out));
}

}  // namespace ccax
