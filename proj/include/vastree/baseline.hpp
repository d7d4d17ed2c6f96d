#pragma once

// Minimal-cost-path baseline: vessel mask -> interior distance transform ->
// cost map -> Dijkstra from the root -> merged paths -> connectivity tree.

#include <optional>
#include <vector>

#include "vastree/core.hpp"
#include "vastree/render.hpp"

namespace vastree::baseline {

/// 1 where the noiseless render is positive, else 0.
ImageGrid make_mask(const Tree& tree, const render::RenderConfig& config);

/// Exact Euclidean distance from each foreground pixel to the nearest
/// background pixel. The grid is treated as surrounded by one ring of
/// background, so an all-foreground 5x5 has 3.0 at its centre.
ImageGrid distance_transform(const ImageGrid& mask);
ImageGrid distance_transform_serial(const ImageGrid& mask);

inline constexpr double kCostFloor = 1e-6;

struct CostMap {
  ImageGrid grid;
  double m = 0.0;  ///< maximum interior distance
};

/// Interior: max(m - D, 1e-6); exterior: m + 1. Throws DegenerateMask when
/// the distance map is all zero.
CostMap build_cost_map(const ImageGrid& dt);

struct ShortestPaths {
  int height = 0;
  int width = 0;
  std::vector<double> dist;  ///< row-major; +inf when unreachable
  std::vector<int> pred;     ///< flat index of predecessor, -1 at source/unreachable

  /// Source-to-target pixel path, or nullopt when unreachable.
  std::optional<std::vector<PixelIndex>> path_to(PixelIndex target) const;
};

/// Single-source Dijkstra on the 8-connected grid; the edge weight between
/// neighbours a, b is (c(a) + c(b)) / 2 times the step length (1 or sqrt 2).
ShortestPaths dijkstra(const ImageGrid& cost, PixelIndex source);

/// Same weighting as dijkstra(); accumulated cost of a pixel path.
double path_cost(const ImageGrid& cost, const std::vector<PixelIndex>& path);

struct TraceResult {
  /// One root-to-leaf pixel path per leaf (nullopt when unreachable).
  std::vector<std::optional<std::vector<PixelIndex>>> paths;
  std::vector<std::size_t> unreachable;
};

TraceResult trace_paths(const CostMap& cost, const WorldPoint& root,
                        const std::vector<WorldPoint>& leaves);

/// Merges root-first pixel paths into a tree. Junctions are the pixels where
/// a path leaves the union of earlier paths; the root, path ends and
/// junctions are snapped to the nearest unused keypoint within `snap_radius_px`.
/// A node with more than two children is split into a chain of coincident
/// binary junctions, and an endpoint lying on another path is dropped, so
/// the result always satisfies the SSA profile.
Tree extract_connectivity(const std::vector<std::vector<PixelIndex>>& paths,
                          const KeypointSet& keypoints, int height, int width,
                          double snap_radius_px = 5.0);

struct BaselineResult {
  Tree tree;
  std::vector<std::size_t> unreachable_leaves;
};

/// Full pipeline on a reference tree: its mask, its root and its leaves,
/// snapping to all of its node positions.
BaselineResult run_baseline(const Tree& ground_truth, const render::RenderConfig& config);

}  // namespace vastree::baseline
