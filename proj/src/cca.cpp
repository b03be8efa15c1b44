#include "ccax/cca.hpp"

#include "ccax/diagnostics.hpp"
#include "ccax/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ccax {
namespace {

// Largest-magnitude entry of each `anchor` column made positive; `other`
// columns flip along with it.
void canonicalize_signs(Eigen::MatrixXd& anchor, Eigen::MatrixXd& other) {
  for (Eigen::Index j = 0; j < anchor.cols(); ++j) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < anchor.rows(); ++i) {
      const double a = std::abs(anchor(i, j));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (anchor.rows() > 0 && anchor(best, j) < 0.0) {
      anchor.col(j) *= -1.0;
      if (j < other.cols()) other.col(j) *= -1.0;
    }
  }
}

void require_svd_success(Eigen::ComputationInfo info, const char* what) {
  if (info != Eigen::Success) {
    throw SingularInputError(std::string("singular value decomposition failed to converge (") + what + ")");
  }
}

}  // namespace

CenteredMatrix center_columns(const Eigen::MatrixXd& m) {
  CenteredMatrix out;
  out.means = m.colwise().mean().transpose();
  out.centered = m.rowwise() - out.means.transpose();
  return out;
}

double default_rank_tol(Eigen::Index rows, Eigen::Index cols) {
  return static_cast<double>(std::max(rows, cols)) * std::ldexp(1.0, -52);
}

SvdFactors thin_svd(const Eigen::MatrixXd& m, std::optional<double> rank_tol) {
  if (!m.allFinite()) throw FormatError("thin_svd: matrix has non-finite entries");
  const double tol = rank_tol.value_or(default_rank_tol(m.rows(), m.cols()));
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  require_svd_success(svd.info(), "data matrix");
  const auto& s = svd.singularValues();
  Eigen::Index rank = 0;
  if (s.size() > 0 && s(0) > 0.0) {
    const double cut = tol * s(0);
    while (rank < s.size() && s(rank) > 0.0 && s(rank) >= cut) ++rank;
  }
  SvdFactors f;
  f.s = s.head(rank);
  f.u_left = svd.matrixU().leftCols(rank);
  f.v_right = svd.matrixV().leftCols(rank);
  canonicalize_signs(f.v_right, f.u_left);
  return f;
}

RegularizationSpec RegularizationSpec::tikhonov(double gamma_x, double gamma_y) {
  if (!(gamma_x >= 0.0) || !(gamma_y >= 0.0) || !std::isfinite(gamma_x) || !std::isfinite(gamma_y)) {
    throw InvalidArgument("Tikhonov penalties must be finite and >= 0");
  }
  RegularizationSpec r;
  r.kind = Kind::tikhonov;
  r.gamma_x = gamma_x;
  r.gamma_y = gamma_y;
  return r;
}

RegularizationSpec RegularizationSpec::tsvd(Eigen::Index k_x, Eigen::Index k_y) {
  if (k_x < 1 || k_y < 1) throw InvalidArgument("truncation ranks must be >= 1");
  RegularizationSpec r;
  r.kind = Kind::tsvd;
  r.k_x = k_x;
  r.k_y = k_y;
  return r;
}

std::string RegularizationSpec::describe() const {
  std::ostringstream os;
  os << to_string(kind);
  if (kind == Kind::tikhonov) os << "(gamma_x=" << format_double(gamma_x) << ", gamma_y=" << format_double(gamma_y) << ")";
  if (kind == Kind::tsvd) os << "(k_x=" << k_x << ", k_y=" << k_y << ")";
  return os.str();
}

std::string to_string(RegularizationSpec::Kind kind) {
  switch (kind) {
    case RegularizationSpec::Kind::none: return "none";
    case RegularizationSpec::Kind::tikhonov: return "tikhonov";
    case RegularizationSpec::Kind::tsvd: return "tsvd";
  }
  return "?";
}

RegularizationSpec::Kind parse_regularization_kind(const std::string& text) {
  if (text == "none") return RegularizationSpec::Kind::none;
  if (text == "tikhonov") return RegularizationSpec::Kind::tikhonov;
  if (text == "tsvd") return RegularizationSpec::Kind::tsvd;
  throw FormatError("unknown regularization kind '" + text + "'");
}

// ---------------------------------------------------------------------------

CcaDecomposition::CcaDecomposition(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                   std::optional<double> rank_tol) {
  if (x.rows() != y.rows()) {
    throw DimensionError("views have different sample counts: " + std::to_string(x.rows()) + " vs " +
                         std::to_string(y.rows()));
  }
  if (x.rows() < 1 || x.cols() < 1 || y.cols() < 1) throw DimensionError("empty view");
  n_ = x.rows();
  if (n_ <= std::max(x.cols(), y.cols())) {
    warn("n = " + std::to_string(n_) + " does not exceed max(m_x, m_y) = " +
         std::to_string(std::max(x.cols(), y.cols())) + "; covariances are singular and rank truncation applies");
  }
  auto cx = center_columns(x);
  auto cy = center_columns(y);
  mean_x_ = std::move(cx.means);
  mean_y_ = std::move(cy.means);
  x_svd_ = thin_svd(cx.centered, rank_tol);
  y_svd_ = thin_svd(cy.centered, rank_tol);
  if (x_svd_.rank() == 0) throw SingularInputError("X has zero numerical rank after centering");
  if (y_svd_.rank() == 0) throw SingularInputError("Y has zero numerical rank after centering");

  t_ = x_svd_.u_left.transpose() * y_svd_.u_left;
  t0_ = x_svd_.s.asDiagonal() * t_ * y_svd_.s.asDiagonal();
  w_x_ = x_svd_.v_right * x_svd_.s.cwiseInverse().asDiagonal();
  w_y_ = y_svd_.v_right * y_svd_.s.cwiseInverse().asDiagonal();
}

Eigen::VectorXd CcaDecomposition::tikhonov_scale_x(double gamma_x) const {
  return (x_svd_.s.array().square() + gamma_x).rsqrt().matrix();
}

Eigen::VectorXd CcaDecomposition::tikhonov_scale_y(double gamma_y) const {
  return (y_svd_.s.array().square() + gamma_y).rsqrt().matrix();
}

CcaModel CcaDecomposition::assemble(const Eigen::MatrixXd& op, const Eigen::MatrixXd& left_map,
                                    const Eigen::MatrixXd& right_map, RegularizationSpec spec) const {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(op, Eigen::ComputeThinU | Eigen::ComputeThinV);
  require_svd_success(svd.info(), "correlation operator");
  Eigen::MatrixXd p_x = svd.matrixU();
  Eigen::MatrixXd p_y = svd.matrixV();
  canonicalize_signs(p_x, p_y);

  CcaModel model;
  model.sigma = svd.singularValues().cwiseMax(0.0).cwiseMin(1.0);
  model.u = left_map * p_x;
  model.v = right_map * p_y;
  model.mean_x = mean_x_;
  model.mean_y = mean_y_;
  model.reg = spec;
  model.n_train = n_;
  model.rank_x = rank_x();
  model.rank_y = rank_y();
  return model;
}

CcaModel CcaDecomposition::fit_plain() const { return assemble(t_, w_x_, w_y_, RegularizationSpec::none()); }

CcaModel CcaDecomposition::fit_tikhonov(double gamma_x, double gamma_y) const {
  const auto spec = RegularizationSpec::tikhonov(gamma_x, gamma_y);
  const auto scale_x = tikhonov_scale_x(gamma_x);
  const auto scale_y = tikhonov_scale_y(gamma_y);
  const Eigen::MatrixXd op = scale_x.asDiagonal() * t0_ * scale_y.asDiagonal();
  const Eigen::MatrixXd left = x_svd_.v_right * scale_x.asDiagonal();
  const Eigen::MatrixXd right = y_svd_.v_right * scale_y.asDiagonal();
  return assemble(op, left, right, spec);
}

CcaModel CcaDecomposition::fit_tsvd(Eigen::Index k_x, Eigen::Index k_y) const {
  const auto spec = RegularizationSpec::tsvd(k_x, k_y);
  if (k_x > rank_x() || k_y > rank_y()) {
    throw InvalidArgument("truncation ranks (" + std::to_string(k_x) + ", " + std::to_string(k_y) +
                          ") exceed the numerical ranks (" + std::to_string(rank_x()) + ", " +
                          std::to_string(rank_y()) + ")");
  }
  return assemble(t_.topLeftCorner(k_x, k_y), w_x_.leftCols(k_x), w_y_.leftCols(k_y), spec);
}

CcaModel CcaDecomposition::fit(const RegularizationSpec& spec) const {
  switch (spec.kind) {
    case RegularizationSpec::Kind::none: return fit_plain();
    case RegularizationSpec::Kind::tikhonov: return fit_tikhonov(spec.gamma_x, spec.gamma_y);
    case RegularizationSpec::Kind::tsvd: return fit_tsvd(spec.k_x, spec.k_y);
  }
  throw InvalidArgument("unknown regularization kind");
}

CcaModel cca_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) { return CcaDecomposition(x, y).fit_plain(); }

CcaModel cca_fit_tikhonov(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double gamma_x, double gamma_y) {
  RegularizationSpec::tikhonov(gamma_x, gamma_y);  // validate before the decomposition
  return CcaDecomposition(x, y).fit_tikhonov(gamma_x, gamma_y);
}

CcaModel cca_fit_tsvd(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Eigen::Index k_x, Eigen::Index k_y) {
  RegularizationSpec::tsvd(k_x, k_y);
  return CcaDecomposition(x, y).fit_tsvd(k_x, k_y);
}

CcaModel cca_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const RegularizationSpec& spec) {
  return CcaDecomposition(x, y).fit(spec);
}

// ---------------------------------------------------------------------------

double spectral_filter_soft(double s, double alpha) {
  if (s == 0.0) return 0.0;
  return s / std::sqrt(s * s + alpha * alpha);
}

double spectral_filter_hard(double s, double threshold) { return s >= threshold ? 1.0 : 0.0; }

double verify_filter_forms(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const RegularizationSpec& spec) {
  const CcaDecomposition d(x, y);
  const auto& sx = d.x_factors().s;
  const auto& sy = d.y_factors().s;
  const auto& t = d.correlation_operator();

  Eigen::MatrixXd closed;
  Eigen::MatrixXd filtered;
  switch (spec.kind) {
    case RegularizationSpec::Kind::none:
    case RegularizationSpec::Kind::tikhonov: {
      const double gx = spec.kind == RegularizationSpec::Kind::none ? 0.0 : spec.gamma_x;
      const double gy = spec.kind == RegularizationSpec::Kind::none ? 0.0 : spec.gamma_y;
      // (S^2 + gI)^{-1/2} S T S (S^2 + gI)^{-1/2}, as literal diagonal products
      const Eigen::MatrixXd dx = Eigen::MatrixXd((sx.array().square() + gx).rsqrt().matrix().asDiagonal());
      const Eigen::MatrixXd dy = Eigen::MatrixXd((sy.array().square() + gy).rsqrt().matrix().asDiagonal());
      const Eigen::MatrixXd ssx = Eigen::MatrixXd(sx.asDiagonal());
      const Eigen::MatrixXd ssy = Eigen::MatrixXd(sy.asDiagonal());
      closed = dx * ssx * t * ssy * dy;
      Eigen::VectorXd fx(sx.size()), fy(sy.size());
      for (Eigen::Index i = 0; i < sx.size(); ++i) fx(i) = spectral_filter_soft(sx(i), std::sqrt(gx));
      for (Eigen::Index i = 0; i < sy.size(); ++i) fy(i) = spectral_filter_soft(sy(i), std::sqrt(gy));
      filtered = fx.asDiagonal() * t * fy.asDiagonal();
      break;
    }
    case RegularizationSpec::Kind::tsvd: {
      if (spec.k_x > d.rank_x() || spec.k_y > d.rank_y()) {
        throw InvalidArgument("truncation ranks exceed the numerical ranks");
      }
      closed = d.x_factors().u_left.leftCols(spec.k_x).transpose() * d.y_factors().u_left.leftCols(spec.k_y);
      Eigen::VectorXd hx(sx.size()), hy(sy.size());
      for (Eigen::Index i = 0; i < sx.size(); ++i) hx(i) = spectral_filter_hard(sx(i), sx(spec.k_x - 1));
      for (Eigen::Index i = 0; i < sy.size(); ++i) hy(i) = spectral_filter_hard(sy(i), sy(spec.k_y - 1));
      const Eigen::MatrixXd full = hx.asDiagonal() * t * hy.asDiagonal();
      filtered = full.topLeftCorner(spec.k_x, spec.k_y);
      break;
    }
  }
  return (closed - filtered).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------

namespace {

FeatureMatrix as_row(const Eigen::VectorXd& v) { return FeatureMatrix(Eigen::MatrixXd(v.transpose())); }

}  // namespace

ModelArchive to_archive(const CcaModel& model) {
  ModelArchive a;
  a.set("model", std::string("cca"));
  a.set("kind", to_string(model.reg.kind));
  a.set("gamma_x", model.reg.gamma_x);
  a.set("gamma_y", model.reg.gamma_y);
  const bool truncated = model.reg.kind == RegularizationSpec::Kind::tsvd;
  a.set("k_x", static_cast<long long>(truncated ? model.reg.k_x : model.rank_x));
  a.set("k_y", static_cast<long long>(truncated ? model.reg.k_y : model.rank_y));
  a.set("n", static_cast<long long>(model.n_train));
  a.set("m_x", static_cast<long long>(model.m_x()));
  a.set("m_y", static_cast<long long>(model.m_y()));
  a.set("k", static_cast<long long>(model.k()));
  a.set("rank_x", static_cast<long long>(model.rank_x));
  a.set("rank_y", static_cast<long long>(model.rank_y));
  a.add_blob("U", FeatureMatrix(model.u));
  a.add_blob("V", FeatureMatrix(model.v));
  a.add_blob("SIGMA", as_row(model.sigma));
  a.add_blob("MEAN_X", as_row(model.mean_x));
  a.add_blob("MEAN_Y", as_row(model.mean_y));
  return a;
}

CcaModel cca_model_from_archive(const ModelArchive& a) {
  CcaModel m;
  const auto kind = parse_regularization_kind(a.get("kind"));
  m.u = a.blob("U").values();
  m.v = a.blob("V").values();
  m.sigma = a.blob("SIGMA").values().row(0).transpose();
  m.mean_x = a.blob("MEAN_X").values().row(0).transpose();
  m.mean_y = a.blob("MEAN_Y").values().row(0).transpose();
  m.n_train = a.get_int("n");
  m.rank_x = a.has("rank_x") ? a.get_int("rank_x") : a.get_int("k_x");
  m.rank_y = a.has("rank_y") ? a.get_int("rank_y") : a.get_int("k_y");

  const auto check = [&](bool ok, const std::string& what) {
    if (!ok) throw DimensionError("archive manifest disagrees with blob shapes: " + what);
  };
  check(a.blob("SIGMA").rows() == 1 && a.blob("MEAN_X").rows() == 1 && a.blob("MEAN_Y").rows() == 1,
        "vector blobs must be single rows");
  check(a.get_int("m_x") == m.u.rows() && m.mean_x.size() == m.u.rows(), "m_x");
  check(a.get_int("m_y") == m.v.rows() && m.mean_y.size() == m.v.rows(), "m_y");
  check(m.u.cols() == m.sigma.size() && m.v.cols() == m.sigma.size(), "k");
  if (a.has("k")) check(a.get_int("k") == m.sigma.size(), "k");

  switch (kind) {
    case RegularizationSpec::Kind::none: m.reg = RegularizationSpec::none(); break;
    case RegularizationSpec::Kind::tikhonov:
      m.reg = RegularizationSpec::tikhonov(a.get_double("gamma_x"), a.get_double("gamma_y"));
      break;
    case RegularizationSpec::Kind::tsvd:
      m.reg = RegularizationSpec::tsvd(a.get_int("k_x"), a.get_int("k_y"));
      break;
  }
  return m;
}

}  // namespace ccax
