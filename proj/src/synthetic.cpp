#include "ccax/synthetic.hpp"

#include "ccax/error.hpp"
#include "ccax/rng.hpp"

#include <cmath>
#include <random>
#include <string>

namespace ccax {
namespace {

Eigen::MatrixXd draw_loadings(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = normal(rng);
  for (Eigen::Index j = 0; j < cols; ++j) a.col(j) *= scale / a.col(j).norm();
  return a;
}

Eigen::VectorXd draw_view(const Eigen::MatrixXd& loadings, const Eigen::VectorXd& z, double noise, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v = loadings * z;
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += noise * normal(rng);
  return v;
}

SplitAssignment block_splits(const LatentModelConfig& cfg) {
  SplitAssignment s;
  s.roles.assign(cfg.n_train, SplitRole::train);
  s.roles.insert(s.roles.end(), cfg.n_val, SplitRole::val);
  s.roles.insert(s.roles.end(), cfg.n_test, SplitRole::test);
  return s;
}

}  // namespace

void LatentModelConfig::validate() const {
  if (total() == 0) throw InvalidArgument("synthetic data needs at least one sample");
  if (latent_dim < 1 || m_x < 1 || m_y < 1) throw InvalidArgument("synthetic dimensions must be positive");
  if (latent_dim > std::min(m_x, m_y))
    throw InvalidArgument("latent dimension " + std::to_string(latent_dim) + " exceeds min(m_x, m_y)");
  if (!(loading_scale > 0.0) || !std::isfinite(loading_scale))
    throw InvalidArgument("loading scale must be positive");
  if (!(noise_x > 0.0) || !(noise_y > 0.0) || !std::isfinite(noise_x) || !std::isfinite(noise_y))
    throw InvalidArgument("noise levels must be positive");
}

LatentPairs generate_latent_pairs(const LatentModelConfig& cfg) {
  cfg.validate();
  auto rng = make_rng(cfg.seed, "synth");
  const Eigen::MatrixXd a = draw_loadings(cfg.m_x, cfg.latent_dim, cfg.loading_scale, rng);
  const Eigen::MatrixXd b = draw_loadings(cfg.m_y, cfg.latent_dim, cfg.loading_scale, rng);
  const auto n = static_cast<Eigen::Index>(cfg.total());
  Eigen::MatrixXd x(n, cfg.m_x), y(n, cfg.m_y);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(cfg.latent_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = normal(rng);
    x.row(i) = draw_view(a, z, cfg.noise_x, rng).transpose();
    y.row(i) = draw_view(b, z, cfg.noise_y, rng).transpose();
  }
  return {FeatureMatrix(std::move(x)), FeatureMatrix(std::move(y)), block_splits(cfg)};
}

CaptionLikeData generate_caption_like(const LatentModelConfig& cfg, std::size_t captions_per_item) {
  cfg.validate();
  if (captions_per_item < 1) throw InvalidArgument("captions_per_item must be at least 1");
  auto rng = make_rng(cfg.seed, "synth");
  const Eigen::MatrixXd a = draw_loadings(cfg.m_x, cfg.latent_dim, cfg.loading_scale, rng);
  const Eigen::MatrixXd b = draw_loadings(cfg.m_y, cfg.latent_dim, cfg.loading_scale, rng);
  const auto n = static_cast<Eigen::Index>(cfg.total());
  const auto c = static_cast<Eigen::Index>(captions_per_item);
  Eigen::MatrixXd x(n, cfg.m_x), y(n * c, cfg.m_y);
  std::vector<std::size_t> pairs(static_cast<std::size_t>(n * c));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(cfg.latent_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = normal(rng);
    x.row(i) = draw_view(a, z, cfg.noise_x, rng).transpose();
    for (Eigen::Index k = 0; k < c; ++k) {
      y.row(i * c + k) = draw_view(b, z, cfg.noise_y, rng).transpose();
      pairs[static_cast<std::size_t>(i * c + k)] = static_cast<std::size_t>(i);
    }
  }
  return {FeatureMatrix(std::move(x)), FeatureMatrix(std::move(y)), std::move(pairs), block_splits(cfg),
          captions_per_item};
}

RetrievalSet CaptionLikeData::retrieval_set(SplitRole role) const {
  const auto rows = image_splits.rows_with(role);
  if (rows.empty()) throw InvalidArgument("split '" + std::string(to_string(role)) + "' has no images");
  std::vector<std::ptrdiff_t> remap(static_cast<std::size_t>(images.rows()), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) remap[rows[i]] = static_cast<std::ptrdiff_t>(i);
  RetrievalSet set;
  set.images = images.select_rows(rows).values();
  std::vector<std::size_t> caps;
  for (std::size_t t = 0; t < pair_index.size(); ++t) {
    if (remap[pair_index[t]] < 0) continue;
    caps.push_back(t);
    set.pair_index.push_back(static_cast<std::size_t>(remap[pair_index[t]]));
  }
  set.texts = texts.select_rows(caps).values();
  return set;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> CaptionLikeData::training_pairs(SplitRole role) const {
  std::vector<std::size_t> image_rows, caps;
  for (std::size_t t = 0; t < pair_index.size(); ++t) {
    if (image_splits.roles[pair_index[t]] != role) continue;
    caps.push_back(t);
    image_rows.push_back(pair_index[t]);
  }
  if (caps.empty()) throw InvalidArgument("split '" + std::string(to_string(role)) + "' has no captions");
  return {images.values()(image_rows, Eigen::all), texts.values()(caps, Eigen::all)};
}

}  // namespace ccax
