#pragma once

#include <span>

#include "dppnet/types.hpp"

namespace dppnet {

// Draws index i with probability weights[i] / sum(weights). Negative weights
// count as zero. Throws kDegenerateDistribution if the total is not positive.
std::size_t draw_categorical(std::span<const double> weights, Rng& rng);

// Index of the largest entry, lowest index on ties. Entries flagged in
// `excluded` are skipped. Returns weights.size() if nothing is eligible.
std::size_t argmax_lowest(std::span<const double> weights, std::span<const std::uint8_t> excluded = {});

}  // namespace dppnet
