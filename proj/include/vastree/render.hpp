#pragma once

// Image synthesis from trees: orthographic ray-traced vessel tubes, Perlin
// noise, and Gaussian keypoint target grids.
//
// Each kernel has a serial reference (`*_serial`) and an OpenMP version
// parallel over rows. Per-pixel accumulation order is identical in both, so
// outputs are bit-identical.

#include <cstdint>

#include "vastree/core.hpp"

namespace vastree::render {

struct RenderConfig {
  int height = 250;
  int width = 250;
  int noise_octaves = 4;
  double noise_amplitude = 0.15;
  std::uint64_t noise_seed = 0;
  /// Lattice cells across the image for the coarsest octave.
  double noise_base_frequency = 8.0;
  double blob_sigma = 2.0;  ///< pixels

  void validate() const;
};

/// Raw chord-length sum in pixel units (no normalization).
ImageGrid render_chords(const Tree& tree, int height, int width);
ImageGrid render_chords_serial(const Tree& tree, int height, int width);

/// Chord image scaled so its maximum is 1.0 (all-zero when the tree draws nothing).
ImageGrid render_tree(const Tree& tree, const RenderConfig& config);
ImageGrid render_tree_serial(const Tree& tree, const RenderConfig& config);

/// Classic gradient-lattice noise in roughly [-1, 1].
class PerlinNoise {
 public:
  explicit PerlinNoise(std::uint64_t seed);
  double operator()(double x, double y) const;

 private:
  int perm_[512];
};

/// Sum over octaves of amplitude * 0.5^o * perlin_o(2^o * base * world).
ImageGrid perlin_field(const RenderConfig& config);
ImageGrid perlin_field_serial(const RenderConfig& config);

/// img + perlin_field, clamped to [0, 1.5]. Identity when amplitude == 0.
ImageGrid add_perlin(const ImageGrid& img, const RenderConfig& config);

/// Max over keypoints of exp(-d^2 / (2 sigma^2)), d in pixels from the
/// keypoint's pixel.
ImageGrid render_keypoint_targets(const KeypointSet& keypoints, const RenderConfig& config);
ImageGrid render_keypoint_targets_serial(const KeypointSet& keypoints, const RenderConfig& config);

/// 0.7 * foreground MSE (target > 0.5) + 0.3 * background MSE.
double weighted_mse_keypoint_loss(const ImageGrid& pred, const ImageGrid& target);

}  // namespace vastree::render
