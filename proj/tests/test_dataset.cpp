#include <doctest.h>

#include "vastree/dataset.hpp"

using namespace vastree;
using namespace vastree::dataset;

TEST_CASE("attempt seeds") {
  CHECK(attempt_seed(100, 0, 0) == 100);
  CHECK(attempt_seed(100, 7, 0) == 107);
  CHECK(attempt_seed(100, 7, 1) != attempt_seed(100, 7, 2));
  CHECK(attempt_seed(100, 7, 1) == attempt_seed(100, 7, 1));
}

TEST_CASE("make_case is deterministic and self-consistent") {
  CaseConfig cfg;
  cfg.growth.seed = 42;
  for (std::size_t i = 0; i < 4; ++i) {
    const Case a = make_case(cfg, i);
    const Case b = make_case(cfg, i);
    CHECK(a.tree == b.tree);
    CHECK(a.image == b.image);
    CHECK(a.seed == b.seed);
    CHECK(a.keypoints.size() == a.tree.nodes.size());
    CHECK(a.keypoints[a.root_keypoint] == a.tree.node(a.tree.root_id).pos);
    CHECK(root_keypoint_index(a.tree, a.keypoints) == a.root_keypoint);
    CHECK(a.image.height() == 250);
    for (double v : a.image.data()) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.5);
    }
    CHECK(validate_tree(a.tree, Profile::SSA).empty());
  }
}

TEST_CASE("slab cases regrow keypoint collisions") {
  CaseConfig cfg;
  cfg.growth.slab_mode = true;
  int retried = 0;
  int crossing = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    const Case c = make_case(cfg, i);
    retried += c.attempts > 1;
    crossing += c.has_crossing;
    CHECK(c.keypoints.size() == c.tree.nodes.size());
    if (c.attempts == 1) CHECK(c.seed == i);
  }
  CHECK(crossing >= 1);
  MESSAGE(retried << " of 10 slab cases needed a regrow");
}

TEST_CASE("exhausted attempts raise GenerationFailed") {
  CaseConfig cfg;
  cfg.growth.slab_mode = true;
  cfg.growth.step_size = 0.002;  // dense nodes: projections always collide
  cfg.max_attempts = 2;
  CHECK_THROWS_AS(make_case(cfg, 0), GenerationFailed);
}
