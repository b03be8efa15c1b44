#pragma once

#include "ccax/feature_matrix.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ccax {

enum class MatrixFormat { fmat1, csv };

/// Magic bytes of the FMAT1 binary matrix format.
inline constexpr std::string_view kFmatMagic = "FMATRX01";

/// Reads a matrix from disk. FMAT1 must match its header exactly; CSV is one
/// sample per line of comma separated decimals.
FeatureMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format = MatrixFormat::fmat1);
/// Picks the format from the extension: ".csv" is CSV, anything else FMAT1.
FeatureMatrix load_matrix_auto(const std::filesystem::path& path);
MatrixFormat format_for(const std::filesystem::path& path);
/// Writes CSV for a ".csv" path, FMAT1 otherwise.
void save_matrix_auto(const FeatureMatrix& m, const std::filesystem::path& path);
void save_matrix(const FeatureMatrix& m, const std::filesystem::path& path);
void save_matrix_csv(const FeatureMatrix& m, const std::filesystem::path& path);

// Stream-level FMAT1 codec, shared with the archive reader/writer.
void write_fmat(std::ostream& out, const Eigen::MatrixXd& values);
FeatureMatrix read_fmat(std::istream& in, const std::string& what);

/// Word-vector table in the plain-text word2vec layout.
class EmbeddingTable {
 public:
  EmbeddingTable(std::vector<std::string> tokens, Eigen::MatrixXd vectors);

  std::size_t size() const { return tokens_.size(); }
  Eigen::Index dim() const { return vectors_.cols(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  /// One row per token, in file order.
  const Eigen::MatrixXd& vectors() const { return vectors_; }

  std::optional<std::size_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  Eigen::VectorXd vector(std::string_view token) const;

 private:
  std::vector<std::string> tokens_;
  Eigen::MatrixXd vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

EmbeddingTable load_embedding_table(const std::filesystem::path& path);
/// Writes every value with 17 significant digits so a reload is exact.
void save_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path);

/// Lowercases, splits on ASCII whitespace, strips punctuation from token edges.
/// Tokens that are pure punctuation vanish.
std::vector<std::string> tokenize(std::string_view line);

enum class OovPolicy { skip, error };

struct SentenceCorpus {
  std::vector<std::vector<std::string>> sentences;
  /// Image row paired with each sentence.
  std::vector<std::size_t> pair_index;

  std::size_t size() const { return sentences.size(); }
};

/// Loads one sentence per line. Without a pairing file sentence i pairs with
/// image row i. When image_rows is given every pair index is checked against it.
SentenceCorpus load_corpus(const std::filesystem::path& path, const EmbeddingTable& table,
                           OovPolicy oov_policy = OovPolicy::skip,
                           const std::optional<std::filesystem::path>& pairing_path = std::nullopt,
                           std::optional<std::size_t> image_rows = std::nullopt);

/// One decimal image row index per line.
std::vector<std::size_t> load_pairing(const std::filesystem::path& path,
                                      std::optional<std::size_t> image_rows = std::nullopt);
void save_pairing(const std::vector<std::size_t>& pairs, const std::filesystem::path& path);

enum class SplitRole { train, val, test };

std::string_view to_string(SplitRole role);

struct SplitAssignment {
  std::vector<SplitRole> roles;  // indexed by row

  std::vector<std::size_t> rows_with(SplitRole role) const;
};

/// "<row-index>\t<train|val|test>" per line; every row must appear exactly once.
SplitAssignment load_splits(const std::filesystem::path& path);
void save_splits(const SplitAssignment& splits, const std::filesystem::path& path);

}  // namespace ccax
