#include "vastree/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "vastree/tree_io.hpp"

namespace vastree::metrics {

PointSet sample_edges(const Tree& tree, int n, int height, int width) {
  if (tree.edges.empty()) throw DomainError("cannot sample a tree without edges");
  if (n < 2) throw DomainError("need at least 2 samples per edge");
  PointSet out;
  out.reserve(static_cast<std::size_t>(n) * tree.edges.size());
  for (const auto& e : tree.edges) {
    const PixelPoint a = world_to_pixel_units(tree.node(e.parent).pos, height, width);
    const PixelPoint b = world_to_pixel_units(tree.node(e.child).pos, height, width);
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / (n - 1);
      out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
  }
  return out;
}

namespace {

double sq(const PixelPoint& p, const PixelPoint& q) {
  const double dx = p.x - q.x;
  const double dy = p.y - q.y;
  return dx * dx + dy * dy;
}

void require_points(const PointSet& a, const PointSet& b) {
  if (a.empty() || b.empty()) throw DomainError("point sets must be non-empty");
}

// Bucket grid over the bounding box of a point set; queries walk square
// rings of cells outward until no unvisited cell can hold a closer point.
class GridIndex {
 public:
  explicit GridIndex(const PointSet& pts) : pts_(pts) {
    min_x_ = max_x_ = pts[0].x;
    min_y_ = max_y_ = pts[0].y;
    for (const auto& p : pts) {
      min_x_ = std::min(min_x_, p.x);
      max_x_ = std::max(max_x_, p.x);
      min_y_ = std::min(min_y_, p.y);
      max_y_ = std::max(max_y_, p.y);
    }
    const double span = std::max({max_x_ - min_x_, max_y_ - min_y_, 1e-9});
    const double per_side = std::max(1.0, std::sqrt(static_cast<double>(pts.size()) / 2.0));
    cell_ = span / per_side;
    nx_ = std::max(1, static_cast<int>((max_x_ - min_x_) / cell_) + 1);
    ny_ = std::max(1, static_cast<int>((max_y_ - min_y_) / cell_) + 1);
    start_.assign(static_cast<std::size_t>(nx_ * ny_) + 1, 0);
    std::vector<int> cell_of(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      cell_of[i] = cell_index(cell_x(pts[i].x), cell_y(pts[i].y));
      ++start_[static_cast<std::size_t>(cell_of[i]) + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    items_.resize(pts.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < pts.size(); ++i) items_[fill[static_cast<std::size_t>(cell_of[i])]++] = i;
  }

  double nearest_sq(const PixelPoint& q) const {
    // Rings grow around the nearest in-grid cell; a cell r rings out is at
    // least (r - 1) cells from q whether or not q lies inside the grid.
    const int qx = clamp_cell((q.x - min_x_) / cell_, nx_);
    const int qy = clamp_cell((q.y - min_y_) / cell_, ny_);
    const int r0 = 0;
    const int r1 = std::max({qx, nx_ - 1 - qx, qy, ny_ - 1 - qy});
    double best = std::numeric_limits<double>::infinity();
    for (int r = r0; r <= r1; ++r) {
      if (r > 0) {
        const double bound = (r - 1) * cell_;
        if (best <= bound * bound) break;
      }
      for (int y = qy - r; y <= qy + r; ++y) {
        if (y < 0 || y >= ny_) continue;
        const bool edge_row = y == qy - r || y == qy + r;
        const int step = edge_row ? 1 : std::max(1, 2 * r);
        for (int x = qx - r; x <= qx + r; x += step) {
          if (x < 0 || x >= nx_) continue;
          const auto c = static_cast<std::size_t>(cell_index(x, y));
          for (std::size_t k = start_[c]; k < start_[c + 1]; ++k)
            best = std::min(best, sq(q, pts_[items_[k]]));
        }
      }
    }
    return best;
  }

 private:
  static int clamp_cell(double f, int n) {
    return static_cast<int>(std::clamp(std::floor(f), 0.0, static_cast<double>(n - 1)));
  }
  int cell_x(double x) const { return std::clamp(static_cast<int>((x - min_x_) / cell_), 0, nx_ - 1); }
  int cell_y(double y) const { return std::clamp(static_cast<int>((y - min_y_) / cell_), 0, ny_ - 1); }
  int cell_index(int x, int y) const { return y * nx_ + x; }

  const PointSet& pts_;
  double min_x_, max_x_, min_y_, max_y_;
  double cell_ = 1.0;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<std::size_t> start_;
  std::vector<std::size_t> items_;
};

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

std::vector<double> nearest_sq_serial(const PointSet& a, const PointSet& b) {
  require_points(a, b);
  std::vector<double> out(a.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (const auto& q : b) out[i] = std::min(out[i], sq(a[i], q));
  return out;
}

std::vector<double> nearest_sq(const PointSet& a, const PointSet& b) {
  require_points(a, b);
  const GridIndex index(b);
  std::vector<double> out(a.size());
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static) if (n > 512)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = index.nearest_sq(a[static_cast<std::size_t>(i)]);
  return out;
}

double chamfer(const PointSet& a, const PointSet& b) {
  return mean(nearest_sq(a, b)) + mean(nearest_sq(b, a));
}

double chamfer_serial(const PointSet& a, const PointSet& b) {
  return mean(nearest_sq_serial(a, b)) + mean(nearest_sq_serial(b, a));
}

double hausdorff(const PointSet& a, const PointSet& b) {
  return std::sqrt(std::max(max_of(nearest_sq(a, b)), max_of(nearest_sq(b, a))));
}

double hausdorff_serial(const PointSet& a, const PointSet& b) {
  return std::sqrt(std::max(max_of(nearest_sq_serial(a, b)), max_of(nearest_sq_serial(b, a))));
}

TreeDistance compare_trees(const Tree& pred, const Tree& gt, int height, int width,
                           int samples_per_edge) {
  const PointSet a = sample_edges(pred, samples_per_edge, height, width);
  const PointSet b = sample_edges(gt, samples_per_edge, height, width);
  const auto ab = nearest_sq(a, b);
  const auto ba = nearest_sq(b, a);
  return {std::sqrt(std::max(max_of(ab), max_of(ba))), mean(ab) + mean(ba)};
}

std::string DatasetReport::csv() const {
  std::ostringstream os;
  os << "case_id,hd_px,cd_px2\n";
  for (const auto& c : cases)
    os << c.case_id << ',' << format_double(c.hd_px) << ',' << format_double(c.cd_px2) << '\n';
  return os.str();
}

std::string DatasetReport::json() const {
  nlohmann::ordered_json j;
  j["mean_hd"] = mean_hd;
  j["mean_cd"] = mean_cd;
  j["n"] = cases.size();
  j["failures"] = nlohmann::ordered_json::array();
  for (const auto& f : failures) j["failures"].push_back({{"case_id", f.case_id}, {"reason", f.reason}});
  return j.dump(2) + "\n";
}

DatasetReport evaluate_dataset(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& gt_dir, int height, int width) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(gt_dir)) throw ParseError("not a directory: " + gt_dir.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(gt_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("tree_") && name.ends_with(".json"))
      names.push_back(name);
  }
  // tree_2 before tree_10
  std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });

  const auto n = static_cast<std::ptrdiff_t>(names.size());
  std::vector<std::optional<CaseResult>> ok(names.size());
  std::vector<std::optional<CaseFailure>> bad(names.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& name = names[static_cast<std::size_t>(i)];
    const std::string id = fs::path(name).stem().string();
    try {
      const Tree gt = load_tree(gt_dir / name);
      const fs::path pred_path = pred_dir / name;
      if (!fs::exists(pred_path)) throw ParseError("missing prediction " + pred_path.string());
      const Tree pred = load_tree(pred_path);
      const TreeDistance d = compare_trees(pred, gt, height, width);
      ok[static_cast<std::size_t>(i)] = CaseResult{id, d.hd_px, d.cd_px2};
    } catch (const std::exception& e) {
      bad[static_cast<std::size_t>(i)] = CaseFailure{id, e.what()};
    }
  }

  DatasetReport report;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (ok[i]) report.cases.push_back(*ok[i]);
    if (bad[i]) report.failures.push_back(*bad[i]);
  }
  if (!report.cases.empty()) {
    for (const auto& c : report.cases) {
      report.mean_hd += c.hd_px;
      report.mean_cd += c.cd_px2;
    }
    report.mean_hd /= static_cast<double>(report.cases.size());
    report.mean_cd /= static_cast<double>(report.cases.size());
  }
  return report;
}

}  // namespace vastree::metrics
