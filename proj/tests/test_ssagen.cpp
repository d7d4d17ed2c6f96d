#include <doctest.h>

#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "vastree/ssagen.hpp"

using namespace vastree;
using namespace vastree::ssagen;

namespace {

double murray_residual(const Tree& t) {
  std::map<int, double> r;
  for (const auto& n : t.nodes) r[n.id] = n.radius;
  std::map<int, double> sum;
  for (const auto& e : t.edges) sum[e.parent] += std::pow(r[e.child], 3);
  double worst = 0.0;
  for (const auto& [id, s] : sum) worst = std::max(worst, std::abs(std::pow(r[id], 3) - s));
  return worst;
}

}  // namespace

TEST_CASE("assign_radii: two leaves give 2^(1/3)") {
  const Tree t = fixtures::make_tree({{0, {0.5, 0.1}, 0}, {1, {0.3, 0.8}, 0}, {2, {0.7, 0.8}, 0}},
                                     {{0, 1}, {0, 2}});
  const Tree r = assign_radii(t, 1.0);
  CHECK(r.node(0).radius == doctest::Approx(1.259921).epsilon(1e-6));
  CHECK(r.node(1).radius == 1.0);
  CHECK(r.node(2).radius == 1.0);
}

TEST_CASE("assign_radii: single chain keeps the terminal radius") {
  const Tree t = fixtures::make_tree({{0, {0.5, 0.1}, 0}, {1, {0.5, 0.9}, 0}}, {{0, 1}});
  const Tree r = assign_radii(t, 0.25);
  CHECK(r.node(0).radius == 0.25);
}

TEST_CASE("assign_radii on a deeper tree obeys Murray's law") {
  const Tree r = assign_radii(fixtures::small_tree(), 0.004);
  CHECK(murray_residual(r) < 1e-12);
  CHECK(r.node(0).radius > r.node(1).radius);
  CHECK(r.node(1).radius > r.node(3).radius);
}

TEST_CASE("GrowthConfig validation") {
  GrowthConfig c;
  c.kill_radius = c.attraction_radius;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = {};
  c.max_nodes = 2;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = {};
  c.step_size = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("grow_tree with max_nodes=3 is still a valid tree") {
  GrowthConfig c;
  c.max_nodes = 3;
  const Tree t = grow_tree(c);
  CHECK(t.edges.size() + 1 == t.nodes.size());
  CHECK(t.nodes.size() >= 2);
  CHECK(validate_tree(t, Profile::SSA).empty());
}

TEST_CASE("grow_tree is deterministic per seed") {
  GrowthConfig c;
  c.seed = 1234;
  CHECK(grow_tree(c) == grow_tree(c));
  c.slab_mode = true;
  CHECK(grow_tree(c) == grow_tree(c));
  GrowthConfig d = c;
  d.seed = 1235;
  CHECK_FALSE(grow_tree(c) == grow_tree(d));
}

TEST_CASE("1000 seeds: valid SSA trees inside the margin, Murray residual < 1e-12") {
  int bifurcations = 0;
  int internal = 0;
  int violations = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    GrowthConfig c;
    c.seed = seed;
    Tree t;
    try {
      t = grow_tree(c);
    } catch (const GenerationFailed&) {
      continue;
    }
    violations += static_cast<int>(validate_tree(t, Profile::SSA).size());
    worst = std::max(worst, murray_residual(t));
    for (const auto& n : t.nodes) {
      REQUIRE(n.pos.x >= 0.05 - 1e-12);
      REQUIRE(n.pos.x <= 0.95 + 1e-12);
      REQUIRE(n.pos.y >= 0.05 - 1e-12);
      REQUIRE(n.pos.y <= 0.95 + 1e-12);
      const auto kids = t.children(n.id);
      if (!kids.empty() && n.id != t.root_id) {
        ++internal;
        bifurcations += kids.size() == 2;
      }
    }
    for (const auto& path : t.paths)
      for (const auto& p : path) REQUIRE(p.in_domain());
  }
  CHECK(violations == 0);
  CHECK(worst < 1e-12);
  // every non-root internal node is a bifurcation under SSA; the fraction of
  // bifurcations among all nodes is strictly between 0 and 1
  CHECK(internal > 0);
  CHECK(bifurcations == internal);
}

TEST_CASE("slab mode produces crossings in projection") {
  int crossing = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GrowthConfig c;
    c.seed = seed;
    c.slab_mode = true;
    try {
      const Tree3D t3 = grow_tree_3d(c);
      for (const auto& n : t3.nodes) {
        REQUIRE(n.pos.z >= 0.0);
        REQUIRE(n.pos.z <= c.slab_depth);
      }
      const Tree t = project_slab(t3);
      CHECK(t.nodes.size() == t3.nodes.size());
      CHECK(t.edges == t3.edges);
      crossing += has_crossing(t);
    } catch (const GenerationFailed&) {
    }
  }
  CHECK(crossing >= 1);
}

TEST_CASE("project_slab of a planar tree keeps x/y") {
  Tree3D t3;
  t3.root_id = 0;
  t3.nodes = {{0, {0.5, 0.1, 0.1}, 0.01}, {1, {0.2, 0.8, 0.1}, 0.005}, {2, {0.8, 0.8, 0.1}, 0.005}};
  t3.edges = {{0, 1}, {0, 2}};
  t3.paths = {{{0.4, 0.4, 0.1}}, {}};
  const Tree t = project_slab(t3);
  CHECK(t.node(1).pos == WorldPoint{0.2, 0.8});
  CHECK(t.paths[0] == std::vector<WorldPoint>{{0.4, 0.4}});
  CHECK(t.node(0).radius == 0.01);
}

TEST_CASE("crossing fixture: branches at distinct depth cross in projection") {
  Tree3D t3;
  t3.root_id = 0;
  t3.nodes = {{0, {0.5, 0.1, 0.0}, 0.01},  {1, {0.5, 0.3, 0.0}, 0.008},
              {2, {0.2, 0.9, 0.0}, 0.005}, {3, {0.8, 0.5, 0.0}, 0.005},
              {4, {0.8, 0.9, 0.2}, 0.005}, {5, {0.2, 0.5, 0.2}, 0.005},
              {6, {0.5, 0.5, 0.2}, 0.006}};
  // 6 -> 5 lies at depth 0.2 and runs left along y = 0.5, crossing 1 -> 2
  // (depth 0) at (0.4, 0.5).
  t3.edges = {{0, 1}, {0, 6}, {1, 2}, {1, 3}, {6, 4}, {6, 5}};
  const Tree t = project_slab(t3);
  CHECK(t.edges == t3.edges);
  CHECK(has_crossing(t));
  CHECK(segments_intersect({0.5, 0.3}, {0.2, 0.9}, {0.5, 0.5}, {0.2, 0.5}));
}

TEST_CASE("segments_intersect") {
  CHECK(segments_intersect({0, 0}, {1, 1}, {0, 1}, {1, 0}));
  CHECK_FALSE(segments_intersect({0, 0}, {1, 0}, {0, 1}, {1, 1}));
  CHECK(segments_intersect({0, 0}, {1, 0}, {0.5, 0}, {0.5, 1}));  // touching
  CHECK_FALSE(segments_intersect({0, 0}, {0.4, 0}, {0.5, 0}, {1, 0}));
  CHECK(has_crossing(fixtures::small_tree()) == false);
}
