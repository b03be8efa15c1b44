#pragma once

#include "ccax/archive.hpp"
#include "ccax/feature_matrix.hpp"
#include "ccax/io.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ccax {

/// lin: identity map (linear kernel). rbf: random Fourier features of a Gaussian kernel.
enum class LayerKind { lin, rbf };

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view text);

/// Hierarchical kernel sentence embedding.
///
/// A sentence with word vectors a_1..a_n maps to
///   Phi_sent( (1/n) sum_i Phi_word(a_i) )
/// where an rbf layer with bandwidth g is sqrt(2/m) cos(W v + b), the rows of
/// W drawn from N(0, g I) and b from Unif[0, 2pi). Inner products of rbf
/// features approximate exp(-g/2 ||u - v||^2). (lin, lin) is the mean word vector.
///
/// The map is frozen at construction; embedding is a pure function.
class HkseMap {
 public:
  /// m is ignored for a lin word layer and m_prime for a lin sentence layer.
  /// Random arrays come from the "hkse-word" and "hkse-sent" sub-streams of seed.
  static HkseMap build(LayerKind word, LayerKind sentence, double gamma, double eta, Eigen::Index m,
                       Eigen::Index m_prime, Eigen::Index d, std::uint64_t seed);

  LayerKind word_kind() const { return word_kind_; }
  LayerKind sentence_kind() const { return sentence_kind_; }
  double gamma() const { return gamma_; }
  double eta() const { return eta_; }
  Eigen::Index input_dim() const { return d_; }
  std::uint64_t seed() const { return seed_; }

  const Eigen::MatrixXd& w_word() const { return w_word_; }
  const Eigen::VectorXd& b_word() const { return b_word_; }
  const Eigen::MatrixXd& w_sent() const { return w_sent_; }
  const Eigen::VectorXd& b_sent() const { return b_sent_; }

  /// Dimension after the word layer (m for rbf, d for lin).
  Eigen::Index word_dim() const;
  /// Dimension of a sentence embedding.
  Eigen::Index output_dim() const;

  Eigen::VectorXd word_feature(const Eigen::VectorXd& a) const;
  /// tokens holds one word vector per row. Mean pooling uses a correctly
  /// rounded sum, so the result does not depend on token order.
  Eigen::VectorXd embed_sentence(const Eigen::MatrixXd& tokens) const;

  ModelArchive to_archive() const;
  void append_to(ModelArchive& archive, std::string_view prefix) const;
  static HkseMap from_archive(const ModelArchive& archive, std::string_view prefix = "");

 private:
  HkseMap() = default;

  LayerKind word_kind_ = LayerKind::lin;
  LayerKind sentence_kind_ = LayerKind::lin;
  double gamma_ = 0.0;
  double eta_ = 0.0;
  Eigen::Index d_ = 0;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd w_word_;
  Eigen::VectorXd b_word_;
  Eigen::MatrixXd w_sent_;
  Eigen::VectorXd b_sent_;
};

/// The kernel the map approximates, evaluated exactly by double sums over
/// token pairs. With D the squared MMD between the two bags of words under
/// the word kernel, an rbf sentence layer gives exp(-eta D / 2); a lin
/// sentence layer gives the inner product of the word-kernel mean embeddings.
/// Symmetric in its arguments bit for bit.
double exact_kernel(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, LayerKind word, LayerKind sentence,
                    double gamma, double eta);

/// Word-level kernel: exp(-gamma/2 ||a-b||^2) for rbf, a.b for lin.
double word_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, LayerKind kind, double gamma);

/// 1 / median(||a - b||)^2 over all pairs of a uniform word sample (the whole
/// vocabulary if sample_size >= |A|). Lower-middle median for even counts.
double bandwidth_heuristic(const EmbeddingTable& table, std::size_t sample_size, std::uint64_t seed);

struct DimensionBound {
  Eigen::Index m_min = 0;
  Eigen::Index m_prime_min = 0;
};

/// max(1, ceil((log_cardinality - ln epsilon) / (2 delta^2))).
Eigen::Index hoeffding_dimension(double log_cardinality, double delta, double epsilon);

/// Feature counts sufficient for the two-layer approximation guarantee:
/// m >= ln(|A|^2 / eps) / (2 delta^2), m' >= ln(|A|^(2s) / eps) / (2 delta^2).
DimensionBound dimension_bound(std::size_t vocab_size, std::size_t max_sentence_length, double delta,
                               double epsilon);

/// Word vectors of a tokenized sentence, one row per token.
Eigen::MatrixXd sentence_vectors(const std::vector<std::string>& tokens, const EmbeddingTable& table);

/// One row per sentence; with several maps their embeddings are concatenated
/// left to right.
FeatureMatrix embed_corpus(std::span<const HkseMap> maps, const SentenceCorpus& corpus, const EmbeddingTable& table,
                           std::size_t threads = 1);

/// Correctly rounded sum of the values (order-independent).
double exact_sum(std::span<const double> values);

}  // namespace ccax
