#pragma once

// Model-facing inputs: the image-based prompt channel, static positional
// channels, patch crops, keypoint extraction by NMS and training jitter.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "vastree/core.hpp"

namespace vastree::prompt {

inline constexpr double kDefaultAlpha = 30.0;

/// Channels in fixed order: Intensity, Prompt, PosX, PosY, PosXSin, PosYSin.
struct ChannelStack {
  std::vector<ImageGrid> channels;
  double alpha = kDefaultAlpha;

  int height() const { return channels.empty() ? 0 : channels.front().height(); }
  int width() const { return channels.empty() ? 0 : channels.front().width(); }
  const ImageGrid& channel(Channel tag) const;
};

/// sin(alpha * d), d = world distance from each pixel center to `query`.
/// All zeros when there is no query (root step).
ImageGrid prompt_channel(std::optional<WorldPoint> query, int height, int width,
                         double alpha = kDefaultAlpha);
ImageGrid prompt_channel_serial(std::optional<WorldPoint> query, int height, int width,
                                double alpha = kDefaultAlpha);

/// PosX, PosY, PosXSin, PosYSin; they depend only on (H, W, alpha).
std::vector<ImageGrid> positional_channels(int height, int width, double alpha = kDefaultAlpha);

/// Builds stacks for one image, caching the positional channels.
class StackBuilder {
 public:
  explicit StackBuilder(ImageGrid image, double alpha = kDefaultAlpha);

  const ImageGrid& image() const { return image_; }
  double alpha() const { return alpha_; }
  int height() const { return image_.height(); }
  int width() const { return image_.width(); }

  ChannelStack build(std::optional<WorldPoint> query) const;

 private:
  ImageGrid image_;
  double alpha_;
  std::shared_ptr<const std::vector<ImageGrid>> positional_;
};

/// size x size crop per channel around world_to_pixel(center); zero padded.
struct Patch {
  int size = 0;
  std::vector<ImageGrid> channels;
};

/// Throws ParameterError for even or non-positive sizes.
Patch crop_patch(const ChannelStack& stack, const WorldPoint& center, int size = 51);

/// Strict local maxima of the (2*window+1)^2 neighbourhood above `threshold`.
/// Equal values are resolved in favour of the smallest (row, col). Output is
/// row-major.
KeypointSet nms_extract(const ImageGrid& grid, double threshold = 0.5, int window = 5);

/// Independent Gaussian displacement (sigma in pixels) per point, clamped to
/// the domain; order preserved.
KeypointSet jitter_keypoints(const KeypointSet& keypoints, double sigma_px, std::uint64_t seed,
                             int height, int width);

}  // namespace vastree::prompt
