#include "vastree/prompt.hpp"

#include <algorithm>
#include <cmath>

#include "vastree/rng.hpp"

namespace vastree::prompt {

const ImageGrid& ChannelStack::channel(Channel tag) const {
  for (const auto& c : channels)
    if (c.tag() == tag) return c;
  throw ParameterError("channel not present in stack");
}

namespace {

void prompt_row(int row, const WorldPoint& q, double alpha, ImageGrid& out) {
  const int h = out.height();
  const int w = out.width();
  const double y = static_cast<double>(row) / (h - 1);
  for (int col = 0; col < w; ++col) {
    const double x = static_cast<double>(col) / (w - 1);
    out(row, col) = std::sin(alpha * std::hypot(x - q.x, y - q.y));
  }
}

void check_shape(int height, int width) {
  if (height < 2 || width < 2) throw DomainError("grid must be at least 2x2");
}

}  // namespace

ImageGrid prompt_channel_serial(std::optional<WorldPoint> query, int height, int width, double alpha) {
  check_shape(height, width);
  ImageGrid out(height, width, Channel::Prompt);
  if (!query) return out;
  for (int row = 0; row < height; ++row) prompt_row(row, *query, alpha, out);
  return out;
}

ImageGrid prompt_channel(std::optional<WorldPoint> query, int height, int width, double alpha) {
  check_shape(height, width);
  ImageGrid out(height, width, Channel::Prompt);
  if (!query) return out;
#pragma omp parallel for schedule(static)
  for (int row = 0; row < height; ++row) prompt_row(row, *query, alpha, out);
  return out;
}

std::vector<ImageGrid> positional_channels(int height, int width, double alpha) {
  check_shape(height, width);
  ImageGrid px(height, width, Channel::PosX);
  ImageGrid py(height, width, Channel::PosY);
  ImageGrid sx(height, width, Channel::PosXSin);
  ImageGrid sy(height, width, Channel::PosYSin);
  for (int row = 0; row < height; ++row)
    for (int col = 0; col < width; ++col) {
      const double x = static_cast<double>(col) / (width - 1);
      const double y = static_cast<double>(row) / (height - 1);
      px(row, col) = x;
      py(row, col) = y;
      sx(row, col) = std::sin(alpha * x);
      sy(row, col) = std::sin(alpha * y);
    }
  return {std::move(px), std::move(py), std::move(sx), std::move(sy)};
}

StackBuilder::StackBuilder(ImageGrid image, double alpha)
    : image_(std::move(image)), alpha_(alpha) {
  image_.set_tag(Channel::Intensity);
  positional_ = std::make_shared<const std::vector<ImageGrid>>(
      positional_channels(image_.height(), image_.width(), alpha_));
}

ChannelStack StackBuilder::build(std::optional<WorldPoint> query) const {
  ChannelStack stack;
  stack.alpha = alpha_;
  stack.channels.reserve(6);
  stack.channels.push_back(image_);
  stack.channels.push_back(prompt_channel(query, image_.height(), image_.width(), alpha_));
  for (const auto& c : *positional_) stack.channels.push_back(c);
  return stack;
}

Patch crop_patch(const ChannelStack& stack, const WorldPoint& center, int size) {
  if (size <= 0 || size % 2 == 0) throw ParameterError("patch size must be odd and positive");
  const PixelIndex c = world_to_pixel(center, stack.height(), stack.width());
  const int half = size / 2;
  Patch patch{size, {}};
  for (const auto& ch : stack.channels) {
    ImageGrid out(size, size, ch.tag());
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        const int r = c.row - half + i;
        const int q = c.col - half + j;
        if (ch.contains(r, q)) out(i, j) = ch(r, q);
      }
    patch.channels.push_back(std::move(out));
  }
  return patch;
}

KeypointSet nms_extract(const ImageGrid& grid, double threshold, int window) {
  std::vector<WorldPoint> peaks;
  const int h = grid.height();
  const int w = grid.width();
  for (int row = 0; row < h; ++row)
    for (int col = 0; col < w; ++col) {
      const double v = grid(row, col);
      if (!(v > threshold)) continue;
      bool is_max = true;
      for (int r = std::max(0, row - window); r <= std::min(h - 1, row + window) && is_max; ++r)
        for (int q = std::max(0, col - window); q <= std::min(w - 1, col + window); ++q) {
          if (r == row && q == col) continue;
          const double u = grid(r, q);
          // Plateau: the earliest pixel in row-major order wins.
          if (u > v || (u == v && PixelIndex{r, q} < PixelIndex{row, col})) {
            is_max = false;
            break;
          }
        }
      if (is_max) peaks.push_back(pixel_to_world({row, col}, h, w));
    }
  return KeypointSet::in_order(std::move(peaks));
}

KeypointSet jitter_keypoints(const KeypointSet& keypoints, double sigma_px, std::uint64_t seed,
                             int height, int width) {
  if (sigma_px < 0.0) throw ParameterError("jitter sigma must be >= 0");
  std::vector<WorldPoint> out(keypoints.points().begin(), keypoints.points().end());
  if (sigma_px == 0.0) return KeypointSet::in_order(std::move(out));
  const double sx = sigma_px / (width - 1);
  const double sy = sigma_px / (height - 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    Rng rng = Rng::keyed({seed, 0x717732ULL, i});
    out[i].x = std::clamp(out[i].x + sx * rng.normal(), 0.0, 1.0);
    out[i].y = std::clamp(out[i].y + sy * rng.normal(), 0.0, 1.0);
  }
  return KeypointSet::in_order(std::move(out));
}

}  // namespace vastree::prompt
