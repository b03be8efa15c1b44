#pragma once

#include "ccax/feature_matrix.hpp"
#include "ccax/io.hpp"
#include "ccax/retrieval.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace ccax {

/// Gaussian latent-factor model: z ~ N(0, I_r), x = A z + e_x, y = B z + e_y.
/// A and B have N(0,1) entries, then each column is scaled to norm loading_scale.
struct LatentModelConfig {
  std::size_t n_train = 2000;
  std::size_t n_val = 500;
  std::size_t n_test = 500;
  Eigen::Index latent_dim = 20;
  Eigen::Index m_x = 128;
  Eigen::Index m_y = 64;
  double loading_scale = 1.0;
  double noise_x = 0.1;
  double noise_y = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t total() const { return n_train + n_val + n_test; }
};

struct LatentPairs {
  FeatureMatrix x;
  FeatureMatrix y;
  SplitAssignment splits;  // contiguous blocks: train, then val, then test
};

/// Draws from the "synth" sub-stream of cfg.seed.
LatentPairs generate_latent_pairs(const LatentModelConfig& cfg);

/// Images with several captions each; every caption shares its image's latent
/// vector and draws its own noise. The split sizes count images.
struct CaptionLikeData {
  FeatureMatrix images;
  FeatureMatrix texts;
  std::vector<std::size_t> pair_index;  // image row of each caption
  SplitAssignment image_splits;
  std::size_t captions_per_item = 1;

  /// Images of one split with their captions, re-indexed.
  RetrievalSet retrieval_set(SplitRole role) const;
  /// One (image, caption) row pair per caption of the split's images.
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> training_pairs(SplitRole role) const;
};

CaptionLikeData generate_caption_like(const LatentModelConfig& cfg, std::size_t captions_per_item);

}  // namespace ccax
