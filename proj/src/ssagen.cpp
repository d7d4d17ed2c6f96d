#include "vastree/ssagen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "vastree/rng.hpp"

namespace vastree::ssagen {

void GrowthConfig::validate() const {
  if (!(kill_radius < attraction_radius)) throw ParameterError("kill_radius must be < attraction_radius");
  if (!(step_size > 0.0)) throw ParameterError("step_size must be > 0");
  if (max_nodes < 3) throw ParameterError("max_nodes must be >= 3");
  if (n_attractors < 1) throw ParameterError("n_attractors must be >= 1");
  if (!(branch_margin >= 0.0 && branch_margin < 0.5)) throw ParameterError("branch_margin must be in [0, 0.5)");
  if (!root_position.in_domain()) throw ParameterError("root_position outside domain");
  if (!(terminal_radius > 0.0)) throw ParameterError("terminal_radius must be > 0");
  if (slab_mode && !(slab_depth > 0.0)) throw ParameterError("slab_depth must be > 0");
}

namespace {

Point3 operator+(Point3 a, Point3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Point3 operator-(Point3 a, Point3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Point3 operator*(double s, Point3 a) { return {s * a.x, s * a.y, s * a.z}; }
double dot(Point3 a, Point3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(Point3 a) { return std::sqrt(dot(a, a)); }
double dist(Point3 a, Point3 b) { return norm(a - b); }

struct RawNode {
  Point3 pos;
  int parent = -1;
  std::vector<int> children;
};

/// Uniform bucket grid over the xy plane for nearest-node queries.
class NodeGrid {
 public:
  explicit NodeGrid(double cell) : cell_(cell), dim_(static_cast<int>(std::ceil(1.0 / cell))) {
    buckets_.resize(static_cast<std::size_t>(dim_) * dim_);
  }

  void insert(int id, Point3 p) { buckets_[bucket(cell_of(p.x), cell_of(p.y))].push_back(id); }

  /// Nearest node within `radius`, -1 if none; ties go to the lower id.
  int nearest(Point3 p, double radius, const std::vector<RawNode>& nodes) const {
    const int reach = static_cast<int>(std::ceil(radius / cell_));
    const int cx = cell_of(p.x);
    const int cy = cell_of(p.y);
    int best = -1;
    double best_d = radius;
    for (int gy = std::max(0, cy - reach); gy <= std::min(dim_ - 1, cy + reach); ++gy)
      for (int gx = std::max(0, cx - reach); gx <= std::min(dim_ - 1, cx + reach); ++gx)
        for (int id : buckets_[bucket(gx, gy)]) {
          const double d = dist(nodes[id].pos, p);
          if (d < best_d || (d == best_d && best >= 0 && id < best)) {
            best = id;
            best_d = d;
          }
        }
    return best;
  }

 private:
  int cell_of(double v) const { return std::clamp(static_cast<int>(v / cell_), 0, dim_ - 1); }
  std::size_t bucket(int gx, int gy) const { return static_cast<std::size_t>(gy) * dim_ + gx; }

  double cell_;
  int dim_;
  std::vector<std::vector<int>> buckets_;
};

Point3 unit(Point3 v) {
  const double n = norm(v);
  return n > 0.0 ? (1.0 / n) * v : Point3{};
}

/// Angle between the image-plane projections of a and b.
double angle_deg(Point3 a, Point3 b) {
  a.z = 0.0;
  b.z = 0.0;
  const double c = std::clamp(dot(unit(a), unit(b)), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

std::vector<int> growth_directions_split(const std::vector<Point3>& dirs, double split_deg,
                                         Point3& first, Point3& second) {
  // Pick the pair of pull directions with the widest angle and partition the
  // rest by whichever extreme they are closer to.
  std::size_t ia = 0, ib = 0;
  double widest = -1.0;
  for (std::size_t i = 0; i < dirs.size(); ++i)
    for (std::size_t j = i + 1; j < dirs.size(); ++j) {
      const double a = angle_deg(dirs[i], dirs[j]);
      if (a > widest) {
        widest = a;
        ia = i;
        ib = j;
      }
    }
  std::vector<int> side(dirs.size(), 0);
  if (widest <= split_deg) return {};
  Point3 sa{}, sb{};
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const bool to_b = dot(dirs[i], dirs[ib]) > dot(dirs[i], dirs[ia]);
    side[i] = to_b ? 1 : 0;
    if (to_b) sb = sb + dirs[i]; else sa = sa + dirs[i];
  }
  first = unit(sa);
  second = unit(sb);
  if (angle_deg(first, second) <= split_deg) return {};
  return side;
}

}  // namespace

Tree3D grow_tree_3d(const GrowthConfig& config) {
  config.validate();
  Rng rng = Rng::keyed({config.seed, 0x5ca1ab1eULL});
  const double lo = config.branch_margin;
  const double hi = 1.0 - config.branch_margin;
  const double depth = config.slab_mode ? config.slab_depth : 0.0;
  auto clamp_box = [&](Point3 p) {
    return Point3{std::clamp(p.x, lo, hi), std::clamp(p.y, lo, hi), std::clamp(p.z, 0.0, depth)};
  };

  std::vector<Point3> attractors;
  attractors.reserve(static_cast<std::size_t>(config.n_attractors));
  for (int i = 0; i < config.n_attractors; ++i) {
    const double x = rng.uniform(lo, hi);
    const double y = rng.uniform(lo, hi);
    const double z = config.slab_mode ? rng.uniform(0.0, depth) : 0.0;
    attractors.push_back({x, y, z});
  }

  std::vector<RawNode> nodes;
  NodeGrid grid(config.attraction_radius);
  const Point3 root = clamp_box({config.root_position.x, config.root_position.y, 0.5 * depth});
  nodes.push_back({root, -1, {}});
  grid.insert(0, root);

  // The kill zone is a vertical cylinder: no attractor survives directly
  // above or below a node, so pulls always have an in-plane component.
  auto kill_near = [&](std::size_t first_new) {
    std::erase_if(attractors, [&](const Point3& a) {
      for (std::size_t n = first_new; n < nodes.size(); ++n)
        if (std::hypot(nodes[n].pos.x - a.x, nodes[n].pos.y - a.y) < config.kill_radius) return true;
      return false;
    });
  };
  kill_near(0);

  // Steps have fixed length in the image plane; depth changes by at most one
  // step. Projected parent/child spacing therefore never collapses.
  auto add_child = [&](int parent, Point3 dir) {
    if (static_cast<int>(nodes.size()) >= config.max_nodes) return;
    const double planar = std::hypot(dir.x, dir.y);
    if (planar < 1e-6) return;
    const double dz = std::clamp(dir.z / planar, -1.0, 1.0);
    const Point3 step{dir.x / planar, dir.y / planar, dz};
    const Point3 p = clamp_box(nodes[parent].pos + config.step_size * step);
    // Growth pinned against the margin would stack nodes on their parent.
    if (std::hypot(p.x - nodes[parent].pos.x, p.y - nodes[parent].pos.y) < 0.5 * config.step_size)
      return;
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({p, parent, {}});
    nodes[parent].children.push_back(id);
    grid.insert(id, p);
  };

  for (int iter = 0; iter < config.max_iterations && !attractors.empty(); ++iter) {
    if (static_cast<int>(nodes.size()) >= config.max_nodes) break;
    std::map<int, std::vector<Point3>> pulls;
    for (const auto& a : attractors) {
      const int n = grid.nearest(a, config.attraction_radius, nodes);
      if (n >= 0) pulls[n].push_back(unit(a - nodes[n].pos));
    }
    const std::size_t before = nodes.size();
    for (auto& [id, dirs] : pulls) {
      const int max_children = 2;
      RawNode& node = nodes[id];
      if (static_cast<int>(node.children.size()) >= max_children) continue;
      Point3 sum{};
      for (const auto& d : dirs) sum = sum + d;
      Point3 mean = unit(sum);
      if (norm(sum) < 1e-9) mean = dirs.front();

      if (node.children.empty()) {
        Point3 first, second;
        const auto side = growth_directions_split(dirs, config.split_angle_deg, first, second);
        if (!side.empty()) {
          add_child(id, first);
          add_child(id, second);
        } else {
          add_child(id, mean);
        }
      } else {
        const Point3 existing = nodes[node.children.front()].pos - node.pos;
        if (angle_deg(existing, mean) > config.split_angle_deg) add_child(id, mean);
      }
    }
    if (nodes.size() == before) break;
    kill_near(before);
  }

  if (nodes.size() < 2 || nodes[0].children.empty())
    throw GenerationFailed("growth stalled: no attractor reachable from the root");

  // Keep root, leaves and branch points; collapse single-child chains into
  // edge polylines.
  std::vector<int> new_id(nodes.size(), -1);
  Tree3D out;
  auto keep = [&](int raw) {
    new_id[raw] = static_cast<int>(out.nodes.size());
    out.nodes.push_back({new_id[raw], nodes[raw].pos, 0.0});
  };
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (i == 0 || nodes[i].children.size() != 1) keep(static_cast<int>(i));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (new_id[i] < 0) continue;
    for (int c : nodes[i].children) {
      std::vector<Point3> interior;
      int cur = c;
      while (new_id[cur] < 0) {
        interior.push_back(nodes[cur].pos);
        cur = nodes[cur].children.front();
      }
      out.edges.push_back({new_id[i], new_id[cur]});
      out.paths.push_back(std::move(interior));
    }
  }
  out.root_id = 0;

  // Murray's law on the pruned structure.
  std::vector<std::vector<int>> kids(out.nodes.size());
  for (const auto& e : out.edges) kids[e.parent].push_back(e.child);
  std::vector<int> order{0};
  for (std::size_t i = 0; i < order.size(); ++i)
    for (int c : kids[order[i]]) order.push_back(c);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node3& n = out.nodes[*it];
    if (kids[*it].empty()) {
      n.radius = config.terminal_radius;
    } else {
      double cubes = 0.0;
      for (int c : kids[*it]) cubes += std::pow(out.nodes[c].radius, 3);
      n.radius = std::cbrt(cubes);
    }
  }
  return out;
}

Tree grow_tree(const GrowthConfig& config) { return project_slab(grow_tree_3d(config)); }

Tree assign_radii(Tree tree, double terminal_radius) {
  std::map<int, std::vector<int>> kids;
  for (const auto& e : tree.edges) kids[e.parent].push_back(e.child);
  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) slot[tree.nodes[i].id] = i;
  const auto order = bfs_order(tree);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TreeNode& n = tree.nodes[slot.at(*it)];
    const auto& cs = kids[*it];
    if (cs.empty()) {
      n.radius = terminal_radius;
      continue;
    }
    if (cs.size() == 1) {
      // cbrt(r^3) can be an ulp off r; a lone child keeps the law exact.
      n.radius = tree.nodes[slot.at(cs.front())].radius;
      continue;
    }
    double cubes = 0.0;
    for (int c : cs) cubes += std::pow(tree.nodes[slot.at(c)].radius, 3);
    n.radius = std::cbrt(cubes);
  }
  return tree;
}

Tree project_slab(const Tree3D& tree) {
  Tree out;
  out.root_id = tree.root_id;
  for (const auto& n : tree.nodes) out.nodes.push_back({n.id, {n.pos.x, n.pos.y}, n.radius});
  out.edges = tree.edges;
  for (const auto& path : tree.paths) {
    std::vector<WorldPoint> flat;
    flat.reserve(path.size());
    for (const auto& p : path) flat.push_back({p.x, p.y});
    out.paths.push_back(std::move(flat));
  }
  return out;
}

bool segments_intersect(const WorldPoint& a, const WorldPoint& b, const WorldPoint& c,
                        const WorldPoint& d) {
  auto cross = [](const WorldPoint& o, const WorldPoint& p, const WorldPoint& q) {
    return (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x);
  };
  auto on_segment = [](const WorldPoint& p, const WorldPoint& q, const WorldPoint& r) {
    return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) && std::min(p.y, q.y) <= r.y &&
           r.y <= std::max(p.y, q.y);
  };
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(c, d, a)) return true;
  if (d2 == 0 && on_segment(c, d, b)) return true;
  if (d3 == 0 && on_segment(a, b, c)) return true;
  if (d4 == 0 && on_segment(a, b, d)) return true;
  return false;
}

bool has_crossing(const Tree& tree) {
  std::vector<std::vector<WorldPoint>> lines;
  for (std::size_t e = 0; e < tree.edges.size(); ++e) lines.push_back(tree.edge_polyline(e));
  for (std::size_t e = 0; e < tree.edges.size(); ++e)
    for (std::size_t f = e + 1; f < tree.edges.size(); ++f) {
      const auto& a = tree.edges[e];
      const auto& b = tree.edges[f];
      if (a.parent == b.parent || a.parent == b.child || a.child == b.parent || a.child == b.child)
        continue;
      for (std::size_t i = 0; i + 1 < lines[e].size(); ++i)
        for (std::size_t j = 0; j + 1 < lines[f].size(); ++j)
          if (segments_intersect(lines[e][i], lines[e][i + 1], lines[f][j], lines[f][j + 1]))
            return true;
    }
  return false;
}

}  // namespace vastree::ssagen
