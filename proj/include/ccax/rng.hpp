#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ccax {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named sub-stream ("hkse-word", "synth", ...)
/// so each component stays reproducible when others change how much they draw.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

inline Rng make_rng(std::uint64_t seed, std::string_view label) { return Rng(derive_seed(seed, label)); }

}  // namespace ccax
