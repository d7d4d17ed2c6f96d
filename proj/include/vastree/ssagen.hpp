#pragma once

// Synthetic vascular tree generation: space-colonization growth, Murray's
// law radii, and the slab projection used to produce crossing branches.

#include <cstdint>
#include <vector>

#include "vastree/core.hpp"

namespace vastree::ssagen {

struct GrowthConfig {
  std::uint64_t seed = 0;
  int n_attractors = 400;
  double attraction_radius = 0.15;
  double kill_radius = 0.03;
  double step_size = 0.015;
  int max_nodes = 2000;  ///< cap on raw growth nodes (before chain pruning)
  double branch_margin = 0.05;
  WorldPoint root_position{0.5, 0.05};
  double terminal_radius = 0.004;
  bool slab_mode = false;
  double slab_depth = 0.2;
  /// Minimum angle between two growth directions of one node for it to split.
  double split_angle_deg = 60.0;
  int max_iterations = 5000;

  /// Throws ParameterError on violated invariants.
  void validate() const;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Point3&, const Point3&) = default;
};

struct Node3 {
  int id = 0;
  Point3 pos;
  double radius = 0.0;
};

/// Like Tree, but node and path positions carry a depth coordinate.
struct Tree3D {
  int root_id = 0;
  std::vector<Node3> nodes;
  std::vector<TreeEdge> edges;
  std::vector<std::vector<Point3>> paths;
};

/// Grows the pruned tree in 3D (z == 0 everywhere unless slab_mode). Radii
/// are assigned by Murray's law. Throws GenerationFailed on stall.
Tree3D grow_tree_3d(const GrowthConfig& config);

/// grow_tree_3d followed by project_slab.
Tree grow_tree(const GrowthConfig& config);

/// Leaves get `terminal_radius`; each parent gets cbrt(sum of child r^3).
Tree assign_radii(Tree tree, double terminal_radius);

/// Drops depth; connectivity and ids unchanged.
Tree project_slab(const Tree3D& tree);

/// True when two edges that share no node cross in the image plane.
bool has_crossing(const Tree& tree);

/// Proper intersection test of segments ab and cd (touching counts).
bool segments_intersect(const WorldPoint& a, const WorldPoint& b, const WorldPoint& c,
                        const WorldPoint& d);

}  // namespace vastree::ssagen
