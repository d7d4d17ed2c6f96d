#include "vastree/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vastree/rng.hpp"

namespace vastree::render {

void RenderConfig::validate() const {
  if (height < 16 || width < 16) throw ParameterError("render grid must be at least 16x16");
  if (!(noise_amplitude >= 0.0)) throw ParameterError("noise_amplitude must be >= 0");
  if (noise_octaves < 0) throw ParameterError("noise_octaves must be >= 0");
  if (!(blob_sigma > 0.0)) throw ParameterError("blob_sigma must be > 0");
}

namespace {

struct Tube {
  std::vector<PixelPoint> line;
  double radius = 0.0;  // pixels
  int row_lo = 0, row_hi = -1, col_lo = 0, col_hi = -1;
};

std::vector<Tube> build_tubes(const Tree& tree, int height, int width) {
  std::vector<Tube> tubes;
  tubes.reserve(tree.edges.size());
  for (std::size_t e = 0; e < tree.edges.size(); ++e) {
    Tube t;
    t.radius = tree.node(tree.edges[e].child).radius * (width - 1);
    if (!(t.radius > 0.0)) continue;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& p : tree.edge_polyline(e)) {
      const PixelPoint q = world_to_pixel_units(p, height, width);
      t.line.push_back(q);
      x0 = std::min(x0, q.x);
      x1 = std::max(x1, q.x);
      y0 = std::min(y0, q.y);
      y1 = std::max(y1, q.y);
    }
    t.col_lo = std::max(0, static_cast<int>(std::floor(x0 - t.radius)));
    t.col_hi = std::min(width - 1, static_cast<int>(std::ceil(x1 + t.radius)));
    t.row_lo = std::max(0, static_cast<int>(std::floor(y0 - t.radius)));
    t.row_hi = std::min(height - 1, static_cast<int>(std::ceil(y1 + t.radius)));
    tubes.push_back(std::move(t));
  }
  return tubes;
}

/// Squared distance from p to segment ab.
double segment_dist2(PixelPoint p, PixelPoint a, PixelPoint b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x;
  const double ey = a.y + t * dy - p.y;
  return ex * ex + ey * ey;
}

// Every edge is one capsule chain; the chord through it uses the distance to
// the nearest point of its polyline, so interior joints are not counted twice.
void chord_row(int row, const std::vector<Tube>& tubes, ImageGrid& out) {
  for (const auto& t : tubes) {
    if (row < t.row_lo || row > t.row_hi) continue;
    const double r2 = t.radius * t.radius;
    for (int col = t.col_lo; col <= t.col_hi; ++col) {
      const PixelPoint p{static_cast<double>(col), static_cast<double>(row)};
      double s2 = 1e300;
      for (std::size_t i = 0; i + 1 < t.line.size(); ++i)
        s2 = std::min(s2, segment_dist2(p, t.line[i], t.line[i + 1]));
      if (s2 < r2) out(row, col) += 2.0 * std::sqrt(r2 - s2);
    }
  }
}

void normalize(ImageGrid& img) {
  const double m = img.max_value();
  if (m > 0.0)
    for (double& v : img.data()) v /= m;
}

}  // namespace

ImageGrid render_chords_serial(const Tree& tree, int height, int width) {
  ImageGrid out(height, width, Channel::Intensity);
  const auto tubes = build_tubes(tree, height, width);
  for (int row = 0; row < height; ++row) chord_row(row, tubes, out);
  return out;
}

ImageGrid render_chords(const Tree& tree, int height, int width) {
  ImageGrid out(height, width, Channel::Intensity);
  const auto tubes = build_tubes(tree, height, width);
#pragma omp parallel for schedule(dynamic, 8)
  for (int row = 0; row < height; ++row) chord_row(row, tubes, out);
  return out;
}

ImageGrid render_tree_serial(const Tree& tree, const RenderConfig& config) {
  config.validate();
  ImageGrid img = render_chords_serial(tree, config.height, config.width);
  normalize(img);
  return img;
}

ImageGrid render_tree(const Tree& tree, const RenderConfig& config) {
  config.validate();
  ImageGrid img = render_chords(tree, config.height, config.width);
  normalize(img);
  return img;
}

PerlinNoise::PerlinNoise(std::uint64_t seed) {
  std::iota(perm_, perm_ + 256, 0);
  Rng rng = Rng::keyed({seed, 0x9e71'1a11ULL});
  for (int i = 255; i > 0; --i) std::swap(perm_[i], perm_[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  std::copy(perm_, perm_ + 256, perm_ + 256);
}

namespace {

double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }
double lerp(double t, double a, double b) { return a + t * (b - a); }

double grad(int hash, double x, double y) {
  // Eight gradient directions: axes and diagonals.
  switch (hash & 7) {
    case 0: return x + y;
    case 1: return -x + y;
    case 2: return x - y;
    case 3: return -x - y;
    case 4: return x;
    case 5: return -x;
    case 6: return y;
    default: return -y;
  }
}

}  // namespace

double PerlinNoise::operator()(double x, double y) const {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int xi = static_cast<int>(fx) & 255;
  const int yi = static_cast<int>(fy) & 255;
  x -= fx;
  y -= fy;
  const double u = fade(x);
  const double v = fade(y);
  const int a = perm_[xi] + yi;
  const int b = perm_[xi + 1] + yi;
  return lerp(v, lerp(u, grad(perm_[a], x, y), grad(perm_[b], x - 1, y)),
              lerp(u, grad(perm_[a + 1], x, y - 1), grad(perm_[b + 1], x - 1, y - 1)));
}

namespace {

struct Octaves {
  std::vector<PerlinNoise> noise;
  std::vector<double> amplitude;
  std::vector<double> frequency;
};

Octaves make_octaves(const RenderConfig& config) {
  Octaves o;
  for (int k = 0; k < config.noise_octaves; ++k) {
    o.noise.emplace_back(config.noise_seed + static_cast<std::uint64_t>(k));
    o.amplitude.push_back(config.noise_amplitude * std::ldexp(1.0, -k));
    o.frequency.push_back(config.noise_base_frequency * std::ldexp(1.0, k));
  }
  return o;
}

void noise_row(int row, const Octaves& o, ImageGrid& out) {
  const int h = out.height();
  const int w = out.width();
  const double wy = static_cast<double>(row) / (h - 1);
  for (int col = 0; col < w; ++col) {
    const double wx = static_cast<double>(col) / (w - 1);
    double v = 0.0;
    for (std::size_t k = 0; k < o.noise.size(); ++k)
      v += o.amplitude[k] * o.noise[k](wx * o.frequency[k], wy * o.frequency[k]);
    out(row, col) = v;
  }
}

}  // namespace

ImageGrid perlin_field_serial(const RenderConfig& config) {
  config.validate();
  ImageGrid out(config.height, config.width, Channel::Intensity);
  const Octaves o = make_octaves(config);
  for (int row = 0; row < config.height; ++row) noise_row(row, o, out);
  return out;
}

ImageGrid perlin_field(const RenderConfig& config) {
  config.validate();
  ImageGrid out(config.height, config.width, Channel::Intensity);
  const Octaves o = make_octaves(config);
#pragma omp parallel for schedule(static)
  for (int row = 0; row < config.height; ++row) noise_row(row, o, out);
  return out;
}

ImageGrid add_perlin(const ImageGrid& img, const RenderConfig& config) {
  if (config.noise_amplitude == 0.0 || config.noise_octaves == 0) return img;
  RenderConfig shaped = config;
  shaped.height = img.height();
  shaped.width = img.width();
  const ImageGrid noise = perlin_field(shaped);
  ImageGrid out = img;
  auto dst = out.data();
  auto src = noise.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::clamp(dst[i] + src[i], 0.0, 1.5);
  return out;
}

namespace {

void blob_row(int row, const std::vector<PixelIndex>& centers, double sigma, ImageGrid& out) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int col = 0; col < out.width(); ++col) {
    double best = 0.0;
    for (const auto& c : centers) {
      const double dr = row - c.row;
      const double dc = col - c.col;
      best = std::max(best, std::exp(-(dr * dr + dc * dc) * inv));
    }
    out(row, col) = best;
  }
}

std::vector<PixelIndex> blob_centers(const KeypointSet& keypoints, const RenderConfig& config) {
  std::vector<PixelIndex> centers;
  for (const auto& p : keypoints.points())
    centers.push_back(world_to_pixel(p, config.height, config.width));
  return centers;
}

}  // namespace

ImageGrid render_keypoint_targets_serial(const KeypointSet& keypoints, const RenderConfig& config) {
  config.validate();
  ImageGrid out(config.height, config.width, Channel::Target);
  const auto centers = blob_centers(keypoints, config);
  for (int row = 0; row < config.height; ++row) blob_row(row, centers, config.blob_sigma, out);
  return out;
}

ImageGrid render_keypoint_targets(const KeypointSet& keypoints, const RenderConfig& config) {
  config.validate();
  ImageGrid out(config.height, config.width, Channel::Target);
  const auto centers = blob_centers(keypoints, config);
#pragma omp parallel for schedule(static)
  for (int row = 0; row < config.height; ++row) blob_row(row, centers, config.blob_sigma, out);
  return out;
}

double weighted_mse_keypoint_loss(const ImageGrid& pred, const ImageGrid& target) {
  if (pred.height() != target.height() || pred.width() != target.width())
    throw ShapeError("prediction and target grids differ in shape");
  double fg = 0.0, bg = 0.0;
  std::size_t nfg = 0, nbg = 0;
  const auto p = pred.data();
  const auto t = target.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    if (t[i] > 0.5) {
      fg += d * d;
      ++nfg;
    } else {
      bg += d * d;
      ++nbg;
    }
  }
  const double fg_term = nfg ? fg / static_cast<double>(nfg) : 0.0;
  const double bg_term = nbg ? bg / static_cast<double>(nbg) : 0.0;
  return 0.7 * fg_term + 0.3 * bg_term;
}

}  // namespace vastree::render
