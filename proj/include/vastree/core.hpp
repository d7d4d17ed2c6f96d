#pragma once

// Domain types shared by every module: world/pixel coordinates, the Tree
// value type, keypoint sets and scalar image grids.
//
// Coordinate convention: world (x, y) spans [0,1]^2 across the image. Pixel
// (row, col) maps to world (col / (W-1), row / (H-1)); the inverse rounds
// half-up. Every module converts through world_to_pixel / pixel_to_world.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vastree/errors.hpp"

namespace vastree {

struct WorldPoint {
  double x = 0.0;
  double y = 0.0;

  bool in_domain() const { return x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0; }
  friend bool operator==(const WorldPoint&, const WorldPoint&) = default;
};

struct PixelIndex {
  int row = 0;
  int col = 0;

  friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
  friend auto operator<=>(const PixelIndex&, const PixelIndex&) = default;
};

/// Continuous pixel-unit coordinates (col, row) used by metrics and rendering.
struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

double distance(const WorldPoint& a, const WorldPoint& b);

/// Rounds half-up; throws DomainError outside [0,1]^2 or when H, W < 2.
PixelIndex world_to_pixel(const WorldPoint& p, int height, int width);
WorldPoint pixel_to_world(const PixelIndex& p, int height, int width);
PixelPoint world_to_pixel_units(const WorldPoint& p, int height, int width);

/// Dataset profile: SSA forbids trifurcations, VRM allows them.
enum class Profile { SSA, VRM };

/// Topology class == number of children.
enum class NodeTopology : int { Leaf = 0, Single = 1, Bifurcation = 2, Trifurcation = 3 };

/// K in the topology logits: 3 for SSA, 4 for VRM.
int topology_classes(Profile profile);
bool topology_allowed(int child_count, bool is_root, Profile profile);
Profile parse_profile(const std::string& name);
std::string to_string(Profile profile);

struct TreeNode {
  int id = 0;
  WorldPoint pos;
  double radius = 0.0;
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct TreeEdge {
  int parent = 0;
  int child = 0;
  friend bool operator==(const TreeEdge&, const TreeEdge&) = default;
  friend auto operator<=>(const TreeEdge&, const TreeEdge&) = default;
};

/// Directed rooted tree of spatial nodes. `paths` is either empty or holds,
/// per edge, the interior polyline points between parent and child (world
/// units); it only affects rendering.
struct Tree {
  int root_id = 0;
  std::vector<TreeNode> nodes;
  std::vector<TreeEdge> edges;
  std::vector<std::vector<WorldPoint>> paths;

  const TreeNode* find(int id) const;
  const TreeNode& node(int id) const;
  std::vector<int> children(int id) const;
  /// Full polyline of edge `e` including both endpoints.
  std::vector<WorldPoint> edge_polyline(std::size_t e) const;

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct Violation {
  std::string message;
  std::vector<int> ids;
};

/// Empty iff every structural and topology invariant holds under `profile`.
std::vector<Violation> validate_tree(const Tree& tree, Profile profile);

/// Sorts nodes by id and edges by (parent, child), permuting paths alongside.
void canonicalize(Tree& tree);

/// Breadth-first order of node ids starting at the root (reachable nodes only).
std::vector<int> bfs_order(const Tree& tree);

/// Ordered candidate points. Indices are stable; StepScore index i refers to
/// points()[i].
class KeypointSet {
 public:
  KeypointSet() = default;

  /// Sorts row-major by pixel position on an H x W grid and drops points
  /// closer than `min_separation_px` to an earlier kept point.
  static KeypointSet from_points(std::vector<WorldPoint> points, int height, int width,
                                 double min_separation_px = 2.0);
  /// Keeps the given order verbatim.
  static KeypointSet in_order(std::vector<WorldPoint> points);

  std::span<const WorldPoint> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const WorldPoint& operator[](std::size_t i) const { return points_[i]; }

  /// Index of the closest point; nullopt when empty.
  std::optional<std::size_t> nearest(const WorldPoint& p) const;

  friend bool operator==(const KeypointSet&, const KeypointSet&) = default;

 private:
  explicit KeypointSet(std::vector<WorldPoint> points) : points_(std::move(points)) {}
  std::vector<WorldPoint> points_;
};

/// All node positions of a tree as a row-major keypoint set.
KeypointSet tree_keypoints(const Tree& tree, int height, int width);

enum class Channel { Intensity, Prompt, PosX, PosY, PosXSin, PosYSin, Mask, Cost, Target };

/// H x W row-major scalar raster.
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(int height, int width, Channel tag = Channel::Intensity, double fill = 0.0);
  ImageGrid(int height, int width, std::vector<double> data, Channel tag);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  Channel tag() const { return tag_; }
  void set_tag(Channel tag) { tag_ = tag; }

  double& operator()(int row, int col) { return data_[index(row, col)]; }
  double operator()(int row, int col) const { return data_[index(row, col)]; }
  double& at(PixelIndex p) { return (*this)(p.row, p.col); }
  double at(PixelIndex p) const { return (*this)(p.row, p.col); }
  bool contains(int row, int col) const {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double max_value() const;

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }
  int height_ = 0;
  int width_ = 0;
  Channel tag_ = Channel::Intensity;
  std::vector<double> data_;
};

}  // namespace vastree
