#pragma once

// One generated case = grown tree + rendered noisy image + ground-truth
// keypoints. Seeds whose projected nodes collide (closer than the keypoint
// separation) or whose growth stalls are regrown with a derived seed.

#include <cstdint>

#include "vastree/core.hpp"
#include "vastree/render.hpp"
#include "vastree/ssagen.hpp"

namespace vastree::dataset {

struct CaseConfig {
  ssagen::GrowthConfig growth;  ///< growth.seed is the dataset base seed
  render::RenderConfig render;  ///< noise_seed is replaced by the case seed
  int max_attempts = 64;
};

struct Case {
  std::size_t index = 0;
  std::uint64_t seed = 0;  ///< seed actually grown
  int attempts = 1;
  Tree tree;
  ImageGrid image;
  KeypointSet keypoints;  ///< all node positions, row-major
  std::size_t root_keypoint = 0;
  bool has_crossing = false;
};

/// base + index for the first attempt, a hash of (base, index, attempt) after.
std::uint64_t attempt_seed(std::uint64_t base, std::size_t index, int attempt);

/// Throws GenerationFailed after max_attempts rejected growths.
Case make_case(const CaseConfig& config, std::size_t index);

/// Index of the keypoint at the tree root's position.
std::size_t root_keypoint_index(const Tree& tree, const KeypointSet& keypoints);

}  // namespace vastree::dataset
