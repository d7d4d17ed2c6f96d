#include "vastree/core.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <sstream>

namespace vastree {

double distance(const WorldPoint& a, const WorldPoint& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

PixelIndex world_to_pixel(const WorldPoint& p, int height, int width) {
  if (height < 2 || width < 2) throw DomainError("grid must be at least 2x2");
  if (!p.in_domain()) {
    std::ostringstream os;
    os << "world point (" << p.x << ", " << p.y << ") outside [0,1]^2";
    throw DomainError(os.str());
  }
  const int col = static_cast<int>(std::floor(p.x * (width - 1) + 0.5));
  const int row = static_cast<int>(std::floor(p.y * (height - 1) + 0.5));
  return {row, col};
}

WorldPoint pixel_to_world(const PixelIndex& p, int height, int width) {
  if (height < 2 || width < 2) throw DomainError("grid must be at least 2x2");
  if (p.row < 0 || p.row >= height || p.col < 0 || p.col >= width)
    throw DomainError("pixel index outside grid");
  return {static_cast<double>(p.col) / (width - 1), static_cast<double>(p.row) / (height - 1)};
}

PixelPoint world_to_pixel_units(const WorldPoint& p, int height, int width) {
  return {p.x * (width - 1), p.y * (height - 1)};
}

int topology_classes(Profile profile) { return profile == Profile::SSA ? 3 : 4; }

bool topology_allowed(int child_count, bool is_root, Profile profile) {
  const int max_children = profile == Profile::SSA ? 2 : 3;
  if (child_count < 0 || child_count > max_children) return false;
  if (is_root) return child_count >= 1;
  return child_count != 1;
}

Profile parse_profile(const std::string& name) {
  if (name == "ssa" || name == "SSA" || name == "slab") return Profile::SSA;
  if (name == "vrm" || name == "VRM") return Profile::VRM;
  throw ParameterError("unknown dataset profile '" + name + "'");
}

std::string to_string(Profile profile) { return profile == Profile::SSA ? "ssa" : "vrm"; }

const TreeNode* Tree::find(int id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const TreeNode& Tree::node(int id) const {
  const TreeNode* n = find(id);
  if (n == nullptr) throw DomainError("unknown node id " + std::to_string(id));
  return *n;
}

std::vector<int> Tree::children(int id) const {
  std::vector<int> out;
  for (const auto& e : edges)
    if (e.parent == id) out.push_back(e.child);
  return out;
}

std::vector<WorldPoint> Tree::edge_polyline(std::size_t e) const {
  std::vector<WorldPoint> line;
  line.push_back(node(edges[e].parent).pos);
  if (e < paths.size()) line.insert(line.end(), paths[e].begin(), paths[e].end());
  line.push_back(node(edges[e].child).pos);
  return line;
}

std::vector<Violation> validate_tree(const Tree& tree, Profile profile) {
  std::vector<Violation> report;
  std::set<int> ids;
  for (const auto& n : tree.nodes) {
    if (!ids.insert(n.id).second) report.push_back({"duplicate node id", {n.id}});
    if (!n.pos.in_domain()) report.push_back({"node position outside domain", {n.id}});
    if (!(n.radius >= 0.0)) report.push_back({"negative radius", {n.id}});
  }
  if (!ids.contains(tree.root_id)) {
    report.push_back({"root id does not reference a node", {tree.root_id}});
    return report;
  }
  if (!tree.paths.empty() && tree.paths.size() != tree.edges.size())
    report.push_back({"paths length differs from edge count", {}});

  std::map<int, int> parent_count;
  std::map<int, int> child_count;
  bool dangling = false;
  for (const auto& e : tree.edges) {
    if (!ids.contains(e.parent) || !ids.contains(e.child)) {
      report.push_back({"edge references unknown node id", {e.parent, e.child}});
      dangling = true;
      continue;
    }
    ++parent_count[e.child];
    ++child_count[e.parent];
  }
  if (parent_count.contains(tree.root_id))
    report.push_back({"root has a parent", {tree.root_id}});
  for (int id : ids) {
    if (id == tree.root_id) continue;
    const int pc = parent_count.contains(id) ? parent_count[id] : 0;
    if (pc != 1)
      report.push_back({"node has " + std::to_string(pc) + " parents (expected 1)", {id}});
  }
  if (!dangling) {
    const auto reach = bfs_order(tree);
    if (reach.size() != ids.size()) report.push_back({"graph is not connected from root", {}});
  }
  if (tree.edges.size() + 1 != tree.nodes.size())
    report.push_back({"edge count is not node count - 1", {}});

  for (int id : ids) {
    const bool is_root = id == tree.root_id;
    const int cc = child_count.contains(id) ? child_count[id] : 0;
    if (topology_allowed(cc, is_root, profile)) continue;
    if (is_root && cc == 0) {
      report.push_back({"root has 0 children", {id}});
    } else if (cc == 3 && profile == Profile::SSA) {
      report.push_back({"trifurcation not allowed in profile", {id}});
    } else if (cc == 1) {
      report.push_back({"non-root node has a single child", {id}});
    } else {
      report.push_back({"node has " + std::to_string(cc) + " children", {id}});
    }
  }
  return report;
}

void canonicalize(Tree& tree) {
  std::sort(tree.nodes.begin(), tree.nodes.end(),
            [](const TreeNode& a, const TreeNode& b) { return a.id < b.id; });
  std::vector<std::size_t> perm(tree.edges.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return tree.edges[a] < tree.edges[b]; });
  std::vector<TreeEdge> edges;
  std::vector<std::vector<WorldPoint>> paths;
  for (std::size_t i : perm) {
    edges.push_back(tree.edges[i]);
    if (i < tree.paths.size()) paths.push_back(std::move(tree.paths[i]));
  }
  tree.edges = std::move(edges);
  tree.paths = std::move(paths);
}

std::vector<int> bfs_order(const Tree& tree) {
  std::map<int, std::vector<int>> kids;
  for (const auto& e : tree.edges) kids[e.parent].push_back(e.child);
  std::vector<int> order;
  std::set<int> seen{tree.root_id};
  std::deque<int> queue{tree.root_id};
  while (!queue.empty()) {
    const int id = queue.front();
    queue.pop_front();
    order.push_back(id);
    for (int c : kids[id])
      if (seen.insert(c).second) queue.push_back(c);
  }
  return order;
}

KeypointSet KeypointSet::from_points(std::vector<WorldPoint> points, int height, int width,
                                     double min_separation_px) {
  struct Keyed {
    PixelIndex pix;
    WorldPoint p;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(points.size());
  for (const auto& p : points) keyed.push_back({world_to_pixel(p, height, width), p});
  std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.pix != b.pix) return a.pix < b.pix;
    if (a.p.y != b.p.y) return a.p.y < b.p.y;
    return a.p.x < b.p.x;
  });
  std::vector<WorldPoint> kept;
  for (const auto& k : keyed) {
    const PixelPoint a = world_to_pixel_units(k.p, height, width);
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](const WorldPoint& q) {
      const PixelPoint b = world_to_pixel_units(q, height, width);
      return std::hypot(a.x - b.x, a.y - b.y) < min_separation_px;
    });
    if (!clash) kept.push_back(k.p);
  }
  return KeypointSet(std::move(kept));
}

KeypointSet KeypointSet::in_order(std::vector<WorldPoint> points) {
  return KeypointSet(std::move(points));
}

std::optional<std::size_t> KeypointSet::nearest(const WorldPoint& p) const {
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const double d = distance(points_[i], p);
    if (!best || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

KeypointSet tree_keypoints(const Tree& tree, int height, int width) {
  std::vector<WorldPoint> pts;
  pts.reserve(tree.nodes.size());
  for (const auto& n : tree.nodes) pts.push_back(n.pos);
  return KeypointSet::from_points(std::move(pts), height, width);
}

ImageGrid::ImageGrid(int height, int width, Channel tag, double fill)
    : height_(height), width_(width), tag_(tag) {
  if (height < 0 || width < 0) throw ShapeError("negative grid dimensions");
  data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

ImageGrid::ImageGrid(int height, int width, std::vector<double> data, Channel tag)
    : height_(height), width_(width), tag_(tag), data_(std::move(data)) {
  if (height < 0 || width < 0) throw ShapeError("negative grid dimensions");
  if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
    throw ShapeError("grid data length does not equal H*W");
}

double ImageGrid::max_value() const {
  if (data_.empty()) return 0.0;
  return *std::max_element(data_.begin(), data_.end());
}

}  // namespace vastree
