#pragma once

// Shared fixtures and independent oracles for the test suites.

#include "ccax/cca.hpp"
#include "ccax/retrieval.hpp"

#include <Eigen/Dense>

#include <unistd.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

// Two views sharing a few latent factors, so correlations are spread out.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> correlated_views(Eigen::Index n, Eigen::Index mx, Eigen::Index my,
                                                                    std::uint64_t seed) {
  const Eigen::Index r = std::min<Eigen::Index>(3, std::min(mx, my));
  const Eigen::MatrixXd z = random_matrix(n, r, seed);
  Eigen::MatrixXd x = z * random_matrix(r, mx, seed + 1) + random_matrix(n, mx, seed + 2);
  Eigen::MatrixXd y = z * random_matrix(r, my, seed + 3) + random_matrix(n, my, seed + 4);
  x.rowwise() += random_matrix(1, mx, seed + 5).row(0);
  return {x, y};
}

inline Eigen::MatrixXd centered(const Eigen::MatrixXd& m) { return m.rowwise() - m.colwise().mean(); }

// Canonical correlations straight from the covariance formulation:
// the positive eigenvalues of [[0, Cxy], [Cyx, 0]] w = rho [[Cxx + gx I, 0], [0, Cyy + gy I]] w.
inline Eigen::VectorXd generalized_eigen_correlations(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                                      double gamma_x = 0.0, double gamma_y = 0.0) {
  const Eigen::MatrixXd xc = centered(x), yc = centered(y);
  const auto mx = x.cols(), my = y.cols();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(mx + my, mx + my);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(mx + my, mx + my);
  a.topRightCorner(mx, my) = xc.transpose() * yc;
  a.bottomLeftCorner(my, mx) = yc.transpose() * xc;
  b.topLeftCorner(mx, mx) = xc.transpose() * xc + gamma_x * Eigen::MatrixXd::Identity(mx, mx);
  b.bottomRightCorner(my, my) = yc.transpose() * yc + gamma_y * Eigen::MatrixXd::Identity(my, my);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, b);
  Eigen::VectorXd ev = solver.eigenvalues();  // ascending
  const auto k = std::min(mx, my);
  Eigen::VectorXd out(k);
  for (Eigen::Index i = 0; i < k; ++i) out(i) = ev(ev.size() - 1 - i);
  return out;
}

// Rank-k reconstruction of the centered matrix from its SVD.
inline Eigen::MatrixXd truncate(const Eigen::MatrixXd& m, Eigen::Index k) {
  const Eigen::MatrixXd c = centered(m);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal() *
         svd.matrixV().leftCols(k).transpose();
}

// The metric each fit kind makes its weights orthonormal in.
inline Eigen::MatrixXd fit_metric(const Eigen::MatrixXd& view, const ccax::RegularizationSpec& spec, bool x_side) {
  const Eigen::MatrixXd c = centered(view);
  const auto m = view.cols();
  switch (spec.kind) {
    case ccax::RegularizationSpec::Kind::none: return c.transpose() * c;
    case ccax::RegularizationSpec::Kind::tikhonov:
      return c.transpose() * c + (x_side ? spec.gamma_x : spec.gamma_y) * Eigen::MatrixXd::Identity(m, m);
    case ccax::RegularizationSpec::Kind::tsvd: {
      const Eigen::MatrixXd t = truncate(view, x_side ? spec.k_x : spec.k_y);
      return t.transpose() * t;
    }
  }
  return {};
}

// max |U^T Mx U - I|, |V^T My V - I| and |U^T Cxy V - diag(sigma)|.
inline double orthonormality_residual(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const ccax::CcaModel& model) {
  const Eigen::MatrixXd mx = fit_metric(x, model.reg, true);
  const Eigen::MatrixXd my = fit_metric(y, model.reg, false);
  const auto k = model.k();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(k, k);
  double r = (model.u.transpose() * mx * model.u - id).cwiseAbs().maxCoeff();
  r = std::max(r, (model.v.transpose() * my * model.v - id).cwiseAbs().maxCoeff());
  const Eigen::MatrixXd xc = model.reg.kind == ccax::RegularizationSpec::Kind::tsvd ? truncate(x, model.reg.k_x) : centered(x);
  const Eigen::MatrixXd yc = model.reg.kind == ccax::RegularizationSpec::Kind::tsvd ? truncate(y, model.reg.k_y) : centered(y);
  const Eigen::MatrixXd cross = model.u.transpose() * xc.transpose() * yc * model.v;
  r = std::max(r, (cross - Eigen::MatrixXd(model.sigma.asDiagonal())).cwiseAbs().maxCoeff());
  return r;
}

// Relative residual of the normal equations (X^T X) U Sigma = X^T Y V and the Y-side analogue.
inline double cross_view_residual(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const ccax::CcaModel& model) {
  const Eigen::MatrixXd xc = centered(x), yc = centered(y);
  const Eigen::MatrixXd rhs_x = xc.transpose() * yc * model.v;
  const Eigen::MatrixXd lhs_x = xc.transpose() * xc * model.u * model.sigma.asDiagonal();
  const Eigen::MatrixXd rhs_y = yc.transpose() * xc * model.u;
  const Eigen::MatrixXd lhs_y = yc.transpose() * yc * model.v * model.sigma.asDiagonal();
  return std::max((lhs_x - rhs_x).cwiseAbs().maxCoeff() / rhs_x.cwiseAbs().maxCoeff(),
                  (lhs_y - rhs_y).cwiseAbs().maxCoeff() / rhs_y.cwiseAbs().maxCoeff());
}

// Evaluates retrieval with explicit loops and full sorts: cosine similarity,
// descending, ties by index; rank of the best ground-truth item.
struct BruteReport {
  double r1, r5, r10, medr;
};

inline BruteReport brute_force_eval(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& items,
                                    const std::vector<std::vector<std::size_t>>& truth) {
  std::vector<double> ranks;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (Eigen::Index i = 0; i < items.rows(); ++i) {
      double dot = 0, nq = 0, ni = 0;
      for (Eigen::Index c = 0; c < queries.cols(); ++c) {
        dot += queries(q, c) * items(i, c);
        nq += queries(q, c) * queries(q, c);
        ni += items(i, c) * items(i, c);
      }
      scored.emplace_back(dot / (std::sqrt(nq) * std::sqrt(ni)), static_cast<std::size_t>(i));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t pos = 0; pos < scored.size(); ++pos) {
      const auto& t = truth[static_cast<std::size_t>(q)];
      if (std::find(t.begin(), t.end(), scored[pos].second) != t.end()) {
        ranks.push_back(static_cast<double>(pos + 1));
        break;
      }
    }
  }
  auto pct = [&](double k) {
    return 100.0 * static_cast<double>(std::count_if(ranks.begin(), ranks.end(), [&](double r) { return r <= k; })) /
           static_cast<double>(ranks.size());
  };
  std::sort(ranks.begin(), ranks.end());
  const auto n = ranks.size();
  const double medr = n % 2 ? ranks[n / 2] : 0.5 * (ranks[n / 2 - 1] + ranks[n / 2]);
  return {pct(1), pct(5), pct(10), medr};
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ccax-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
