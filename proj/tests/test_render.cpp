#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "vastree/render.hpp"
#include "vastree/rng.hpp"
#include "vastree/ssagen.hpp"

using namespace vastree;
using namespace vastree::render;

namespace {

// Chord length through straight capsules, written from the formula
// 2*sqrt(r^2 - s^2) with s the distance from the pixel centre to the axis.
double chord_oracle(const Tree& t, int row, int col, int h, int w) {
  double sum = 0.0;
  for (const auto& e : t.edges) {
    const double r = t.node(e.child).radius * (w - 1);
    const double ax = t.node(e.parent).pos.x * (w - 1), ay = t.node(e.parent).pos.y * (h - 1);
    const double bx = t.node(e.child).pos.x * (w - 1), by = t.node(e.child).pos.y * (h - 1);
    const double vx = bx - ax, vy = by - ay;
    double u = ((col - ax) * vx + (row - ay) * vy) / (vx * vx + vy * vy);
    u = std::clamp(u, 0.0, 1.0);
    const double s = std::hypot(ax + u * vx - col, ay + u * vy - row);
    if (s < r) sum += 2.0 * std::sqrt(r * r - s * s);
  }
  return sum;
}

Tree segment(WorldPoint a, WorldPoint b, double r) {
  return fixtures::make_tree({{0, a, r}, {1, b, r}}, {{0, 1}});
}

}  // namespace

TEST_CASE("config validation") {
  RenderConfig c;
  c.height = 8;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = {};
  c.noise_amplitude = -0.1;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("pixel on the axis has chord 2r; pixels away from vessels are zero") {
  const Tree t = segment({0.2, 0.5}, {0.8, 0.5}, 0.02);  // r = 5 px on 251x251
  const ImageGrid raw = render_chords(t, 251, 251);
  CHECK(raw(125, 125) == doctest::Approx(10.0));
  CHECK(raw(10, 10) == 0.0);
  CHECK(raw(125 + 5, 125) == 0.0);  // s == r
  CHECK(raw(125 + 3, 125) == doctest::Approx(2.0 * std::sqrt(25.0 - 9.0)));

  RenderConfig c;
  c.height = c.width = 251;
  const ImageGrid img = render_tree(t, c);
  CHECK(img(125, 125) == doctest::Approx(1.0));
  CHECK(img.max_value() == doctest::Approx(1.0));
}

TEST_CASE("capsule caps close the segment ends") {
  const Tree t = segment({0.2, 0.5}, {0.8, 0.5}, 0.02);
  const ImageGrid raw = render_chords(t, 251, 251);
  // 3 px beyond the end of the axis along its direction: inside the cap
  CHECK(raw(125, 200 + 3) == doctest::Approx(2.0 * std::sqrt(25.0 - 9.0)));
  CHECK(raw(125, 200 + 6) == 0.0);
}

TEST_CASE("chords match the formula oracle on random trees") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const Tree t = fixtures::make_tree({{0, {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)}, 0.03},
                                        {1, {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)}, 0.02},
                                        {2, {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)}, 0.01}},
                                       {{0, 1}, {0, 2}});
    const ImageGrid raw = render_chords(t, 64, 64);
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) REQUIRE(raw(r, c) == doctest::Approx(chord_oracle(t, r, c, 64, 64)).epsilon(1e-12));
  }
}

TEST_CASE("crossing segments add up") {
  const Tree a = segment({0.1, 0.5}, {0.9, 0.5}, 0.02);
  const Tree b = segment({0.5, 0.1}, {0.5, 0.9}, 0.02);
  Tree both = fixtures::make_tree({{0, {0.1, 0.5}, 0.02}, {1, {0.9, 0.5}, 0.02},
                                   {2, {0.5, 0.1}, 0.02}, {3, {0.5, 0.9}, 0.02}},
                                  {{0, 1}, {2, 3}});
  const ImageGrid ra = render_chords(a, 101, 101);
  const ImageGrid rb = render_chords(b, 101, 101);
  const ImageGrid rab = render_chords(both, 101, 101);
  CHECK(rab(50, 50) > std::max(ra(50, 50), rb(50, 50)));
  for (int r = 0; r < 101; ++r)
    for (int c = 0; c < 101; ++c) REQUIRE(rab(r, c) == doctest::Approx(ra(r, c) + rb(r, c)));
}

TEST_CASE("translation by whole pixels shifts the raster") {
  const Tree t = fixtures::small_tree(0.01);
  Tree moved = t;
  for (auto& n : moved.nodes) n.pos.x += 10.0 / 250.0;
  const ImageGrid a = render_chords(t, 251, 251);
  const ImageGrid b = render_chords(moved, 251, 251);
  for (int r = 0; r < 251; ++r)
    for (int c = 0; c + 10 < 251; ++c) REQUIRE(b(r, c + 10) == doctest::Approx(a(r, c)).epsilon(1e-6));
}

TEST_CASE("parallel render is bit-identical to the serial reference") {
  for (std::uint64_t seed : {1u, 2u}) {
    ssagen::GrowthConfig g;
    g.seed = seed;
    g.slab_mode = seed == 2;
    const Tree t = ssagen::grow_tree(g);
    RenderConfig c;
    CHECK(render_tree(t, c) == render_tree_serial(t, c));
    c.noise_seed = seed;
    CHECK(perlin_field(c) == perlin_field_serial(c));
    const auto k = tree_keypoints(t, c.height, c.width);
    CHECK(render_keypoint_targets(k, c) == render_keypoint_targets_serial(k, c));
  }
}

TEST_CASE("Perlin noise") {
  RenderConfig c;
  const Tree t = fixtures::small_tree(0.01);
  const ImageGrid img = render_tree(t, c);

  c.noise_amplitude = 0.0;
  CHECK(add_perlin(img, c) == img);

  c = {};
  c.noise_seed = 5;
  CHECK(perlin_field(c) == perlin_field(c));
  RenderConfig d = c;
  d.noise_seed = 6;
  CHECK_FALSE(perlin_field(c) == perlin_field(d));

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    c.noise_seed = seed;
    const ImageGrid f = perlin_field(c);
    double mean = 0.0;
    for (double v : f.data()) mean += v;
    mean /= static_cast<double>(f.size());
    CHECK(std::abs(mean) < 0.02);
  }

  c.noise_amplitude = 3.0;
  const ImageGrid loud = add_perlin(img, c);
  for (double v : loud.data()) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.5);
  }
}

TEST_CASE("keypoint target blobs") {
  RenderConfig c;
  c.height = c.width = 101;
  c.blob_sigma = 2.0;
  const auto one = KeypointSet::in_order({{0.5, 0.5}});
  const ImageGrid g = render_keypoint_targets(one, c);
  CHECK(g(50, 50) == 1.0);
  CHECK(g(50, 52) == doctest::Approx(std::exp(-0.5)));
  CHECK(g.tag() == Channel::Target);

  CHECK(render_keypoint_targets(KeypointSet{}, c).max_value() == 0.0);

  // 10 sigma = 20 px apart
  const auto two = KeypointSet::in_order({{0.3, 0.5}, {0.5, 0.5}});
  const ImageGrid g2 = render_keypoint_targets(two, c);
  CHECK(g2(50, 30) == 1.0);
  CHECK(g2(50, 50) == 1.0);
  CHECK(g2(50, 40) < 1e-5);

  const auto swapped = KeypointSet::in_order({{0.5, 0.5}, {0.3, 0.5}});
  CHECK(render_keypoint_targets(swapped, c) == g2);
}

TEST_CASE("weighted keypoint loss") {
  ImageGrid t(2, 2, Channel::Target, 0.0);
  ImageGrid p(2, 2, Channel::Target, 0.1);
  CHECK(weighted_mse_keypoint_loss(t, t) == 0.0);
  CHECK(weighted_mse_keypoint_loss(p, t) == doctest::Approx(0.003));
  t(0, 0) = 1.0;
  CHECK(weighted_mse_keypoint_loss(ImageGrid(2, 2), t) == doctest::Approx(0.7));
  CHECK_THROWS_AS(weighted_mse_keypoint_loss(ImageGrid(3, 2), t), ShapeError);
}
