#pragma once

// Point-set distances between tree structures, in pixel units.
//
// Every distance has a brute-force O(|A||B|) reference (`*_serial`) and an
// accelerated version (uniform-grid nearest neighbour, OpenMP over query
// points). Both compute per-point minima with the same squared-distance
// expression and reduce them serially in input order, so they agree exactly.

#include <filesystem>
#include <string>
#include <vector>

#include "vastree/core.hpp"

namespace vastree::metrics {

using PointSet = std::vector<PixelPoint>;

/// n points per edge, linearly spaced from parent to child inclusive.
/// Throws DomainError for a tree without edges or n < 2.
PointSet sample_edges(const Tree& tree, int n, int height, int width);

/// Squared distance from each point of `a` to its nearest neighbour in `b`.
std::vector<double> nearest_sq_serial(const PointSet& a, const PointSet& b);
std::vector<double> nearest_sq(const PointSet& a, const PointSet& b);

/// Symmetric sum of mean squared nearest-neighbour distances (pixels^2).
double chamfer(const PointSet& a, const PointSet& b);
double chamfer_serial(const PointSet& a, const PointSet& b);

/// Symmetric Hausdorff distance (pixels).
double hausdorff(const PointSet& a, const PointSet& b);
double hausdorff_serial(const PointSet& a, const PointSet& b);

struct TreeDistance {
  double hd_px = 0.0;
  double cd_px2 = 0.0;
};

/// Both metrics on sample_edges(.., 100, H, W) of each tree.
TreeDistance compare_trees(const Tree& pred, const Tree& gt, int height, int width,
                           int samples_per_edge = 100);

struct CaseResult {
  std::string case_id;
  double hd_px = 0.0;
  double cd_px2 = 0.0;
};

struct CaseFailure {
  std::string case_id;
  std::string reason;
};

struct DatasetReport {
  std::vector<CaseResult> cases;
  std::vector<CaseFailure> failures;
  double mean_hd = 0.0;
  double mean_cd = 0.0;

  std::string csv() const;   ///< case_id,hd_px,cd_px2
  std::string json() const;  ///< {"mean_hd","mean_cd","n","failures"}
};

/// Pairs every `tree_*.json` in gt_dir with the same file name in pred_dir.
/// Missing or unreadable predictions are reported and excluded from means.
DatasetReport evaluate_dataset(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& gt_dir, int height, int width);

}  // namespace vastree::metrics
