#pragma once

#include "ccax/archive.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>

namespace ccax {

struct CenteredMatrix {
  Eigen::MatrixXd centered;
  Eigen::VectorXd means;
};

/// Subtracts each column's mean. A single row centers to zeros.
CenteredMatrix center_columns(const Eigen::MatrixXd& m);

/// Thin SVD m = u_left * diag(s) * v_right^T, truncated at numerical rank.
///
/// Each column pair is sign-normalized so that the largest-magnitude entry of
/// the v_right column is positive (first such entry on ties).
struct SvdFactors {
  Eigen::MatrixXd u_left;
  Eigen::VectorXd s;
  Eigen::MatrixXd v_right;

  Eigen::Index rank() const { return s.size(); }
};

/// max(rows, cols) * 2^-52.
double default_rank_tol(Eigen::Index rows, Eigen::Index cols);

/// Singular values below rank_tol * s_1 (and exact zeros) are discarded.
SvdFactors thin_svd(const Eigen::MatrixXd& m, std::optional<double> rank_tol = std::nullopt);

struct RegularizationSpec {
  enum class Kind { none, tikhonov, tsvd };

  Kind kind = Kind::none;
  double gamma_x = 0.0;
  double gamma_y = 0.0;
  Eigen::Index k_x = 0;
  Eigen::Index k_y = 0;

  static RegularizationSpec none() { return {}; }
  static RegularizationSpec tikhonov(double gamma_x, double gamma_y);
  static RegularizationSpec tsvd(Eigen::Index k_x, Eigen::Index k_y);

  std::string describe() const;
};

std::string to_string(RegularizationSpec::Kind kind);
RegularizationSpec::Kind parse_regularization_kind(const std::string& text);

/// Fitted CCA model. Columns of u and v are canonical weight pairs ordered by
/// nonincreasing canonical correlation.
struct CcaModel {
  Eigen::MatrixXd u;      // m_x x k
  Eigen::MatrixXd v;      // m_y x k
  Eigen::VectorXd sigma;  // k, clamped to [0, 1]
  Eigen::VectorXd mean_x;
  Eigen::VectorXd mean_y;
  RegularizationSpec reg;
  Eigen::Index n_train = 0;
  // Numerical ranks of the centered training views.
  Eigen::Index rank_x = 0;
  Eigen::Index rank_y = 0;

  Eigen::Index k() const { return sigma.size(); }
  Eigen::Index m_x() const { return u.rows(); }
  Eigen::Index m_y() const { return v.rows(); }
};

/// Everything the solvers share: centered views, their thin SVDs, the
/// correlation operator T = U_x^T U_y, the whitening maps V S^-1 and the
/// Tikhonov base operator S_x T S_y. Computed once and reused by every fit
/// and by the regularization paths.
class CcaDecomposition {
 public:
  CcaDecomposition(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                   std::optional<double> rank_tol = std::nullopt);

  const SvdFactors& x_factors() const { return x_svd_; }
  const SvdFactors& y_factors() const { return y_svd_; }
  const Eigen::VectorXd& mean_x() const { return mean_x_; }
  const Eigen::VectorXd& mean_y() const { return mean_y_; }
  Eigen::Index n() const { return n_; }
  Eigen::Index rank_x() const { return x_svd_.rank(); }
  Eigen::Index rank_y() const { return y_svd_.rank(); }

  /// T = U_x^T U_y (rank_x x rank_y).
  const Eigen::MatrixXd& correlation_operator() const { return t_; }
  /// S_x T S_y.
  const Eigen::MatrixXd& tikhonov_base() const { return t0_; }
  const Eigen::MatrixXd& whitening_x() const { return w_x_; }
  const Eigen::MatrixXd& whitening_y() const { return w_y_; }

  CcaModel fit_plain() const;
  CcaModel fit_tikhonov(double gamma_x, double gamma_y) const;
  CcaModel fit_tsvd(Eigen::Index k_x, Eigen::Index k_y) const;
  CcaModel fit(const RegularizationSpec& spec) const;

  /// (S^2 + gamma I)^{-1/2} as a vector.
  Eigen::VectorXd tikhonov_scale_x(double gamma_x) const;
  Eigen::VectorXd tikhonov_scale_y(double gamma_y) const;

 private:
  CcaModel assemble(const Eigen::MatrixXd& op, const Eigen::MatrixXd& left_map,
                    const Eigen::MatrixXd& right_map, RegularizationSpec spec) const;

  Eigen::VectorXd mean_x_, mean_y_;
  Eigen::Index n_ = 0;
  SvdFactors x_svd_, y_svd_;
  Eigen::MatrixXd t_, t0_, w_x_, w_y_;
};

/// Plain CCA by the Bjorck-Golub construction.
CcaModel cca_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);
/// Tikhonov-regularized CCA: constraints U^T (X^T X + gamma_x I) U = I.
CcaModel cca_fit_tikhonov(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double gamma_x, double gamma_y);
/// Truncated-SVD CCA: each view replaced by its best rank-k approximation.
CcaModel cca_fit_tsvd(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Eigen::Index k_x, Eigen::Index k_y);
CcaModel cca_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const RegularizationSpec& spec);

/// s / sqrt(s^2 + alpha^2); 0 at s = 0.
double spectral_filter_soft(double s, double alpha);
/// 1 if s >= threshold, else 0.
double spectral_filter_hard(double s, double threshold);

/// Builds the regularized correlation operator twice, once in closed form and
/// once by elementwise spectral filtering of the singular values, and returns
/// the largest absolute entry difference.
double verify_filter_forms(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const RegularizationSpec& spec);

/// Archive layout: blobs U, V, SIGMA, MEAN_X, MEAN_Y (vectors stored as 1 x len)
/// and manifest keys kind, gamma_x, gamma_y, k_x, k_y, n, m_x, m_y.
ModelArchive to_archive(const CcaModel& model);
CcaModel cca_model_from_archive(const ModelArchive& archive);

}  // namespace ccax
