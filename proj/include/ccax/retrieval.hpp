#pragma once

#include "ccax/cca.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ccax {

/// Search: caption queries against images. Annotation: image queries against captions.
enum class Task { search, annotation };
enum class Similarity { cosine, l2 };

std::string to_string(Task task);
std::string to_string(Similarity similarity);
Similarity parse_similarity(const std::string& text);

/// How canonical correlations weight the two projections.
///
///  asymmetric: search uses (Sigma U^T, V^T), annotation uses (U^T, Sigma V^T)
///  symmetric(a): (Sigma^a U^T, Sigma^a V^T) for both tasks
///  sweep(a): (Sigma^a U^T, Sigma^(1-a) V^T) for both tasks
struct Weighting {
  enum class Kind { asymmetric, symmetric, sweep };

  Kind kind = Kind::asymmetric;
  double alpha = 0.0;

  static Weighting asymmetric() { return {}; }
  static Weighting symmetric(double alpha);
  static Weighting sweep(double alpha);

  std::string describe() const;
};

/// "asymmetric", "symmetric:<alpha>" or "sweep:<alpha>".
Weighting parse_weighting(const std::string& text);

/// Sigma^alpha elementwise, with 0^0 = 1.
Eigen::VectorXd sigma_power(const Eigen::VectorXd& sigma, double alpha);

struct TaskEmbedding {
  Task task = Task::search;
  Weighting weighting;
  Eigen::MatrixXd image_proj;  // k x m_x
  Eigen::MatrixXd text_proj;   // k x m_y
  Eigen::VectorXd mean_x;
  Eigen::VectorXd mean_y;

  /// Rows of x are centered with the training means, then projected.
  Eigen::MatrixXd embed_images(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd embed_texts(const Eigen::MatrixXd& y) const;
};

TaskEmbedding make_task_embedding(const CcaModel& model, Task task, Weighting weighting);

/// Per query, item indices by descending similarity; ties by ascending index.
struct RankedList {
  std::vector<std::vector<std::uint32_t>> order;

  std::size_t queries() const { return order.size(); }
};

RankedList rank(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& items,
                Similarity similarity = Similarity::cosine, std::size_t threads = 1);

/// Per-query set of correct item indices.
using GroundTruth = std::vector<std::vector<std::size_t>>;

struct EvalReport {
  double r1 = 0.0;  // percentages
  double r5 = 0.0;
  double r10 = 0.0;
  double median_rank = 0.0;  // 1-indexed; even counts average the middle two
  std::size_t n_queries = 0;
  std::size_t n_items = 0;
};

EvalReport evaluate(const RankedList& ranked, const GroundTruth& truth);

/// 1-indexed rank of each query's best-ranked ground-truth item, computed
/// without materializing the ranked lists. Agrees with rank() + evaluate().
std::vector<std::size_t> best_truth_ranks(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& items,
                                          const GroundTruth& truth, Similarity similarity = Similarity::cosine,
                                          std::size_t threads = 1);

EvalReport report_from_ranks(const std::vector<std::size_t>& ranks, std::size_t n_items);

/// Held-out images with their captions. pair_index[i] is the image of caption i.
struct RetrievalSet {
  Eigen::MatrixXd images;
  Eigen::MatrixXd texts;
  std::vector<std::size_t> pair_index;

  void validate() const;
  /// Ground truth for caption queries (a singleton: the paired image).
  GroundTruth search_truth() const;
  /// Ground truth for image queries (all captions of the image).
  GroundTruth annotation_truth() const;
  /// Images [begin, end) and the captions that pair with them, re-indexed.
  RetrievalSet image_block(std::size_t begin, std::size_t end) const;
};

struct BidirectionalReport {
  EvalReport search;
  EvalReport annotation;
};

/// Evaluates both tasks; asymmetric weighting gives each task its own embedding.
BidirectionalReport evaluate_bidirectional(const CcaModel& model, const RetrievalSet& set, Weighting weighting,
                                           Similarity similarity = Similarity::cosine, std::size_t threads = 1);
/// Same with a separately selected model per task.
BidirectionalReport evaluate_bidirectional(const CcaModel& search_model, const CcaModel& annotation_model,
                                           const RetrievalSet& set, Weighting weighting,
                                           Similarity similarity = Similarity::cosine, std::size_t threads = 1);

/// Splits the images into `blocks` contiguous equal blocks (with their
/// captions), evaluates each, and appends the mean report as the last entry.
std::vector<BidirectionalReport> evaluate_blocks(const CcaModel& search_model, const CcaModel& annotation_model,
                                                 const RetrievalSet& set, Weighting weighting, std::size_t blocks,
                                                 Similarity similarity = Similarity::cosine,
                                                 std::size_t threads = 1);

struct SweepRow {
  double alpha = 0.0;
  double r10_search = 0.0;
  double r10_annotation = 0.0;
};

std::vector<SweepRow> alpha_sweep(const CcaModel& model, const RetrievalSet& set, const std::vector<double>& alphas,
                                  Similarity similarity = Similarity::cosine, std::size_t threads = 1);

/// TSV header "task\tr1\tr5\tr10\tmedr\tn_queries\tn_items" then one row per entry.
void write_report_tsv(std::ostream& out, const std::vector<std::pair<std::string, EvalReport>>& rows);
/// TSV header "alpha\tr10_search\tr10_annotation".
void write_sweep_tsv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace ccax
