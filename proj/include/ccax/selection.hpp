#pragma once

#include "ccax/cca.hpp"
#include "ccax/retrieval.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace ccax {

/// r1_per_task selects each task's best cell independently; r1_combined
/// selects the single cell maximizing the mean of both tasks' r@1.
enum class SelectionMetric { r1_per_task, r1_combined };

std::string to_string(SelectionMetric metric);
SelectionMetric parse_selection_metric(const std::string& text);

/// Validation scores over a regularization grid. Axis values are ranks for a
/// T-SVD path and penalties for a Tikhonov path.
struct PathGrid {
  RegularizationSpec::Kind kind = RegularizationSpec::Kind::tsvd;
  std::vector<double> axis_x;
  std::vector<double> axis_y;
  Eigen::MatrixXd r1_search;      // |axis_x| x |axis_y|
  Eigen::MatrixXd r1_annotation;  // |axis_x| x |axis_y|
  Eigen::MatrixXd cell_seconds;
  double total_seconds = 0.0;

  RegularizationSpec cell_spec(Eigen::Index ix, Eigen::Index iy) const;
};

struct Selection {
  RegularizationSpec spec;
  Eigen::Index ix = 0;
  Eigen::Index iy = 0;
  double score = 0.0;
};

struct SelectionResult {
  Selection best_search;
  Selection best_annotation;
  SelectionMetric metric = SelectionMetric::r1_per_task;
};

struct PathOptions {
  SelectionMetric metric = SelectionMetric::r1_per_task;
  Similarity similarity = Similarity::cosine;
  std::size_t threads = 0;  // 0 = all hardware threads
};

struct PathRun {
  PathGrid grid;
  SelectionResult selection;
};

/// Ranks ceil(j * rank / size) for j = 1..size, deduplicated.
std::vector<Eigen::Index> default_rank_grid(Eigen::Index rank, std::size_t size = 20);
/// Squared singular values at default_rank_grid positions.
std::vector<double> default_penalty_grid(const Eigen::VectorXd& singular_values, std::size_t size = 20);
/// gamma = s_k^2 for each 1-based rank k.
std::vector<double> penalties_for_ranks(const Eigen::VectorXd& singular_values, const std::vector<Eigen::Index>& ranks);

/// Argmax with the deterministic tie-break: smallest (k_x, k_y) for T-SVD,
/// largest (gamma_x, gamma_y) for Tikhonov (the most regularized cell wins).
SelectionResult select_best(const PathGrid& grid, SelectionMetric metric);

/// T-SVD path: every cell takes the SVD of the leading k_x x k_y block of the
/// shared correlation operator.
PathRun tsvd_path(const CcaDecomposition& train, const RetrievalSet& val, const std::vector<Eigen::Index>& ranks_x,
                  const std::vector<Eigen::Index>& ranks_y, const PathOptions& options = {});
PathRun tsvd_path(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train, const RetrievalSet& val,
                  const std::vector<Eigen::Index>& ranks_x, const std::vector<Eigen::Index>& ranks_y,
                  const PathOptions& options = {});

/// Tikhonov path: every cell rescales the shared base operator and takes a full SVD.
PathRun tikhonov_path(const CcaDecomposition& train, const RetrievalSet& val, const std::vector<double>& gammas_x,
                      const std::vector<double>& gammas_y, const PathOptions& options = {});
PathRun tikhonov_path(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train, const RetrievalSet& val,
                      const std::vector<double>& gammas_x, const std::vector<double>& gammas_y,
                      const PathOptions& options = {});

struct GuidedResult {
  PathRun tsvd;
  CcaModel search_model;
  CcaModel annotation_model;
};

/// Runs the T-SVD path, then maps each task's winning (k_x, k_y) to
/// (s_{x,k_x}^2, s_{y,k_y}^2) and fits Tikhonov CCA there.
GuidedResult guided_tikhonov(const CcaDecomposition& train, const RetrievalSet& val,
                             const std::vector<Eigen::Index>& ranks_x, const std::vector<Eigen::Index>& ranks_y,
                             const PathOptions& options = {});
GuidedResult guided_tikhonov(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train, const RetrievalSet& val,
                             const std::vector<Eigen::Index>& ranks_x, const std::vector<Eigen::Index>& ranks_y,
                             const PathOptions& options = {});

struct TimingComparison {
  std::vector<double> tsvd_runs;
  std::vector<double> tikhonov_runs;
  double tsvd_seconds = 0.0;      // median
  double tikhonov_seconds = 0.0;  // median
  double speedup = 0.0;           // tikhonov / tsvd
  std::size_t cells = 0;
};

/// Times both full paths (including their decompositions) single-threaded.
/// The Tikhonov grid uses the penalties s^2 at the same ranks, so both grids
/// have identical sizes. One warm-up run of each is discarded.
TimingComparison measure_path_timing(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
                                     const RetrievalSet& val, const std::vector<Eigen::Index>& ranks_x,
                                     const std::vector<Eigen::Index>& ranks_y, std::size_t repeats = 3,
                                     Similarity similarity = Similarity::cosine);

/// TSV: param_x, param_y, r1_search, r1_annotation, cell_seconds.
void write_path_tsv(std::ostream& out, const PathGrid& grid);
/// TSV: path, median_seconds, runs, cells; then a speedup row.
void write_timing_tsv(std::ostream& out, const TimingComparison& timing);

}  // namespace ccax
