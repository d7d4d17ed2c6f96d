#include "vastree/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <unordered_map>

namespace vastree::baseline {

ImageGrid make_mask(const Tree& tree, const render::RenderConfig& config) {
  config.validate();
  ImageGrid chords = render::render_chords(tree, config.height, config.width);
  for (double& v : chords.data()) v = v > 0.0 ? 1.0 : 0.0;
  chords.set_tag(Channel::Mask);
  return chords;
}

namespace {

constexpr double kFar = 1e20;

// Felzenszwalb-Huttenlocher lower envelope of parabolas: squared distance
// transform of the sampled function f along one line, in place.
void edt_1d(double* f, int n, int stride, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    const double fq = f[q * stride] + static_cast<double>(q) * q;
    double s = 0.0;
    while (true) {
      const int p = v[static_cast<std::size_t>(k)];
      s = (fq - (f[p * stride] + static_cast<double>(p) * p)) / (2.0 * (q - p));
      if (s > z[static_cast<std::size_t>(k)]) break;
      --k;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
    const int p = v[static_cast<std::size_t>(k)];
    d[static_cast<std::size_t>(q)] = static_cast<double>(q - p) * (q - p) + f[p * stride];
  }
  for (int q = 0; q < n; ++q) f[q * stride] = d[static_cast<std::size_t>(q)];
}

struct Padded {
  int h, w;
  std::vector<double> f;
};

Padded pad(const ImageGrid& mask) {
  Padded p{mask.height() + 2, mask.width() + 2, {}};
  p.f.assign(static_cast<std::size_t>(p.h) * p.w, 0.0);
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      if (mask(r, c) > 0.0) p.f[static_cast<std::size_t>(r + 1) * p.w + c + 1] = kFar;
  return p;
}

ImageGrid unpad(const Padded& p, const ImageGrid& mask) {
  ImageGrid out(mask.height(), mask.width(), Channel::Intensity);
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      out(r, c) = std::sqrt(p.f[static_cast<std::size_t>(r + 1) * p.w + c + 1]);
  return out;
}

void column_pass(Padded& p, int c) {
  std::vector<double> d(static_cast<std::size_t>(p.h));
  std::vector<int> v(static_cast<std::size_t>(p.h));
  std::vector<double> z(static_cast<std::size_t>(p.h) + 1);
  edt_1d(p.f.data() + c, p.h, p.w, d, v, z);
}

void row_pass(Padded& p, int r) {
  std::vector<double> d(static_cast<std::size_t>(p.w));
  std::vector<int> v(static_cast<std::size_t>(p.w));
  std::vector<double> z(static_cast<std::size_t>(p.w) + 1);
  edt_1d(p.f.data() + static_cast<std::size_t>(r) * p.w, p.w, 1, d, v, z);
}

}  // namespace

ImageGrid distance_transform_serial(const ImageGrid& mask) {
  Padded p = pad(mask);
  for (int c = 0; c < p.w; ++c) column_pass(p, c);
  for (int r = 0; r < p.h; ++r) row_pass(p, r);
  return unpad(p, mask);
}

ImageGrid distance_transform(const ImageGrid& mask) {
  Padded p = pad(mask);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < p.w; ++c) column_pass(p, c);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < p.h; ++r) row_pass(p, r);
  return unpad(p, mask);
}

CostMap build_cost_map(const ImageGrid& dt) {
  const double m = dt.max_value();
  if (!(m > 0.0)) throw DegenerateMask("distance map is all zero (empty mask)");
  CostMap cm{ImageGrid(dt.height(), dt.width(), Channel::Cost), m};
  for (int r = 0; r < dt.height(); ++r)
    for (int c = 0; c < dt.width(); ++c)
      cm.grid(r, c) = dt(r, c) > 0.0 ? std::max(m - dt(r, c), kCostFloor) : m + 1.0;
  return cm;
}

namespace {

constexpr int kDr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

double step_length(int k) { return (kDr[k] != 0 && kDc[k] != 0) ? std::numbers::sqrt2 : 1.0; }

}  // namespace

std::optional<std::vector<PixelIndex>> ShortestPaths::path_to(PixelIndex target) const {
  if (target.row < 0 || target.row >= height || target.col < 0 || target.col >= width)
    throw DomainError("path target outside grid");
  int at = target.row * width + target.col;
  if (!std::isfinite(dist[static_cast<std::size_t>(at)])) return std::nullopt;
  std::vector<PixelIndex> path;
  while (at >= 0) {
    path.push_back({at / width, at % width});
    at = pred[static_cast<std::size_t>(at)];
  }
  std::reverse(path.begin(), path.end());
  return path;
}

ShortestPaths dijkstra(const ImageGrid& cost, PixelIndex source) {
  const int h = cost.height();
  const int w = cost.width();
  if (!cost.contains(source.row, source.col)) throw DomainError("dijkstra source outside grid");
  ShortestPaths sp{h, w, {}, {}};
  const std::size_t n = static_cast<std::size_t>(h) * w;
  sp.dist.assign(n, std::numeric_limits<double>::infinity());
  sp.pred.assign(n, -1);
  std::vector<bool> done(n, false);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  const int s = source.row * w + source.col;
  sp.dist[static_cast<std::size_t>(s)] = 0.0;
  heap.emplace(0.0, s);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (done[static_cast<std::size_t>(u)]) continue;
    done[static_cast<std::size_t>(u)] = true;
    const int r = u / w;
    const int c = u % w;
    for (int k = 0; k < 8; ++k) {
      const int rr = r + kDr[k];
      const int cc = c + kDc[k];
      if (!cost.contains(rr, cc)) continue;
      const int v = rr * w + cc;
      const double nd = d + 0.5 * (cost(r, c) + cost(rr, cc)) * step_length(k);
      if (nd < sp.dist[static_cast<std::size_t>(v)]) {
        sp.dist[static_cast<std::size_t>(v)] = nd;
        sp.pred[static_cast<std::size_t>(v)] = u;
        heap.emplace(nd, v);
      }
    }
  }
  return sp;
}

double path_cost(const ImageGrid& cost, const std::vector<PixelIndex>& path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const PixelIndex a = path[i - 1];
    const PixelIndex b = path[i];
    const int dr = std::abs(a.row - b.row);
    const int dc = std::abs(a.col - b.col);
    if (dr > 1 || dc > 1 || dr + dc == 0) throw DomainError("path pixels are not 8-adjacent");
    const double len = (dr == 1 && dc == 1) ? std::numbers::sqrt2 : 1.0;
    total += 0.5 * (cost.at(a) + cost.at(b)) * len;
  }
  return total;
}

TraceResult trace_paths(const CostMap& cost, const WorldPoint& root,
                        const std::vector<WorldPoint>& leaves) {
  const int h = cost.grid.height();
  const int w = cost.grid.width();
  const ShortestPaths sp = dijkstra(cost.grid, world_to_pixel(root, h, w));
  TraceResult out;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    auto path = sp.path_to(world_to_pixel(leaves[i], h, w));
    if (!path) out.unreachable.push_back(i);
    out.paths.push_back(std::move(path));
  }
  return out;
}

Tree extract_connectivity(const std::vector<std::vector<PixelIndex>>& paths,
                          const KeypointSet& keypoints, int height, int width,
                          double snap_radius_px) {
  if (paths.empty() || paths.front().empty()) throw DomainError("no paths to merge");
  const auto flat = [width](PixelIndex p) { return p.row * width + p.col; };
  const PixelIndex root_px = paths.front().front();

  // Pixel tree: every pixel of the union with its parent pixel towards the root.
  std::unordered_map<int, int> parent{{flat(root_px), -1}};
  std::unordered_map<int, std::vector<int>> kids;
  for (const auto& path : paths) {
    if (path.empty()) continue;
    if (path.front() != root_px) throw DomainError("paths must start at the common root");
    // Walk back from the end until the path first meets the union.
    std::size_t join = path.size() - 1;
    while (!parent.contains(flat(path[join]))) --join;
    for (std::size_t j = join + 1; j < path.size(); ++j) {
      parent[flat(path[j])] = flat(path[j - 1]);
      kids[flat(path[j - 1])].push_back(flat(path[j]));
    }
  }

  const auto n_kids = [&](int px) {
    const auto it = kids.find(px);
    return it == kids.end() ? std::size_t{0} : it->second.size();
  };
  const auto significant = [&](int px) { return px == flat(root_px) || n_kids(px) != 1; };

  struct Proto {
    int pixel;
    int parent;  // proto index, -1 for root
    std::vector<WorldPoint> interior;
  };
  const auto to_world = [&](int px) { return pixel_to_world({px / width, px % width}, height, width); };
  std::vector<Proto> protos{{flat(root_px), -1, {}}};
  std::deque<std::size_t> queue{0};
  while (!queue.empty()) {
    const std::size_t at = queue.front();
    queue.pop_front();
    const auto it = kids.find(protos[at].pixel);
    if (it == kids.end()) continue;
    for (int next : it->second) {
      std::vector<WorldPoint> interior;
      while (!significant(next)) {
        interior.push_back(to_world(next));
        next = kids[next].front();
      }
      protos.push_back({next, static_cast<int>(at), std::move(interior)});
      queue.push_back(protos.size() - 1);
    }
  }

  // Snap: root first, then path ends, then junctions in breadth-first order.
  std::vector<std::optional<WorldPoint>> snapped(protos.size());
  std::vector<bool> taken(keypoints.size(), false);
  const auto snap = [&](std::size_t i) {
    const PixelPoint p = world_to_pixel_units(to_world(protos[i].pixel), height, width);
    std::optional<std::size_t> best;
    double best_d = snap_radius_px;
    for (std::size_t k = 0; k < keypoints.size(); ++k) {
      if (taken[k]) continue;
      const PixelPoint q = world_to_pixel_units(keypoints[k], height, width);
      const double d = std::hypot(p.x - q.x, p.y - q.y);
      if (d <= best_d && (!best || d < best_d)) {
        best = k;
        best_d = d;
      }
    }
    if (best) {
      taken[*best] = true;
      snapped[i] = keypoints[*best];
    } else {
      snapped[i] = to_world(protos[i].pixel);
    }
  };
  snap(0);
  for (std::size_t i = 1; i < protos.size(); ++i)
    if (n_kids(protos[i].pixel) == 0) snap(i);
  for (std::size_t i = 1; i < protos.size(); ++i)
    if (!snapped[i]) snap(i);

  Tree tree;
  tree.root_id = 0;
  std::vector<std::vector<std::size_t>> children(protos.size());
  for (std::size_t i = 1; i < protos.size(); ++i)
    children[static_cast<std::size_t>(protos[i].parent)].push_back(i);
  std::vector<int> id_of(protos.size(), -1);
  for (std::size_t i = 0; i < protos.size(); ++i) {
    id_of[i] = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({id_of[i], *snapped[i], 0.0});
  }
  for (std::size_t i = 0; i < protos.size(); ++i) {
    int owner = id_of[i];
    const auto& ch = children[i];
    for (std::size_t j = 0; j < ch.size(); ++j) {
      // More than two children: chain coincident binary junctions.
      if (j >= 1 && ch.size() - j >= 2) {
        const int extra = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({extra, *snapped[i], 0.0});
        tree.edges.push_back({owner, extra});
        tree.paths.emplace_back();
        owner = extra;
      }
      tree.edges.push_back({owner, id_of[ch[j]]});
      tree.paths.push_back(protos[ch[j]].interior);
    }
  }
  if (std::all_of(tree.paths.begin(), tree.paths.end(), [](const auto& p) { return p.empty(); }))
    tree.paths.clear();
  return tree;
}

BaselineResult run_baseline(const Tree& ground_truth, const render::RenderConfig& config) {
  const ImageGrid mask = make_mask(ground_truth, config);
  const CostMap cost = build_cost_map(distance_transform(mask));
  std::vector<WorldPoint> leaves;
  for (const auto& n : ground_truth.nodes)
    if (n.id != ground_truth.root_id && ground_truth.children(n.id).empty()) leaves.push_back(n.pos);
  const WorldPoint root = ground_truth.node(ground_truth.root_id).pos;
  TraceResult traced = trace_paths(cost, root, leaves);
  std::vector<std::vector<PixelIndex>> paths;
  for (auto& p : traced.paths)
    if (p) paths.push_back(std::move(*p));
  if (paths.empty()) throw GenerationFailed("baseline traced no leaf paths");
  const KeypointSet kps = tree_keypoints(ground_truth, config.height, config.width);
  return {extract_connectivity(paths, kps, config.height, config.width), traced.unreachable};
}

}  // namespace vastree::baseline
