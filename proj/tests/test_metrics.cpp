#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vastree/metrics.hpp"
#include "vastree/rng.hpp"
#include "vastree/ssagen.hpp"
#include "vastree/tree_io.hpp"

using namespace vastree;
using namespace vastree::metrics;

namespace {

PointSet random_set(Rng& rng, std::size_t n, double span) {
  PointSet s(n);
  for (auto& p : s) p = {rng.uniform(0, span), rng.uniform(0, span)};
  return s;
}

bool close_rel(double a, double b, double tol = 1e-9) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("hand cases") {
  const PointSet a{{0, 0}};
  const PointSet b{{3, 4}};
  CHECK(chamfer(a, b) == 50.0);
  CHECK(hausdorff(a, b) == 5.0);
  CHECK(chamfer(a, a) == 0.0);
  CHECK(hausdorff(b, b) == 0.0);
  CHECK_THROWS(chamfer(PointSet{}, b));
  CHECK_THROWS(hausdorff(a, PointSet{}));
}

TEST_CASE("translated singleton: HD = |t|, CD = 2|t|^2") {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform(-10, 10), y = rng.uniform(-10, 10);
    const double ax = rng.uniform(-5, 5), ay = rng.uniform(-5, 5);
    const PointSet a{{x, y}};
    const PointSet b{{x + ax, y + ay}};
    CHECK(hausdorff(a, b) == doctest::Approx(std::hypot(ax, ay)));
    CHECK(chamfer(a, b) == doctest::Approx(2 * (ax * ax + ay * ay)));
  }
}

TEST_CASE("accelerated metrics match brute force on 1000 random pairs") {
  Rng rng(2024);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    // sizes up to 2000, including very lopsided and clustered sets
    const std::size_t na = 1 + rng.below(trial % 10 == 0 ? 2000 : 300);
    const std::size_t nb = 1 + rng.below(trial % 10 == 5 ? 2000 : 300);
    const double span = trial % 3 == 0 ? 5.0 : 250.0;
    const PointSet a = random_set(rng, na, span);
    PointSet b = random_set(rng, nb, span);
    if (trial % 7 == 0) b.insert(b.end(), a.begin(), a.begin() + static_cast<long>(std::min(na, nb)));

    const double cd = chamfer(a, b);
    const double hd = hausdorff(a, b);
    mismatches += !close_rel(cd, oracles::chamfer(a, b));
    mismatches += !close_rel(hd, oracles::hausdorff(a, b));
    mismatches += cd != chamfer_serial(a, b);
    mismatches += hd != hausdorff_serial(a, b);
    // symmetry and max >= mean
    mismatches += cd != chamfer(b, a);
    mismatches += hd != hausdorff(b, a);
    mismatches += hd * hd < cd / 2.0 - 1e-9;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("nearest_sq agrees with the serial scan exactly") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const PointSet a = random_set(rng, 3000, 250.0);
    const PointSet b = random_set(rng, 1 + rng.below(3000), trial % 2 ? 250.0 : 3.0);
    CHECK(nearest_sq(a, b) == nearest_sq_serial(a, b));
  }
}

TEST_CASE("metrics are permutation invariant and translation invariant") {
  Rng rng(5);
  PointSet a = random_set(rng, 200, 100);
  PointSet b = random_set(rng, 150, 100);
  const double cd = chamfer(a, b);
  const double hd = hausdorff(a, b);
  std::reverse(a.begin(), a.end());
  std::rotate(b.begin(), b.begin() + 40, b.end());
  CHECK(close_rel(chamfer(a, b), cd, 1e-12));
  CHECK(hausdorff(a, b) == hd);
  for (auto& p : a) p = {p.x + 17.0, p.y - 3.0};
  for (auto& p : b) p = {p.x + 17.0, p.y - 3.0};
  CHECK(close_rel(chamfer(a, b), cd, 1e-9));
  CHECK(close_rel(hausdorff(a, b), hd, 1e-9));
}

TEST_CASE("sample_edges") {
  const Tree t = fixtures::make_tree({{0, {0.0, 0.0}, 0}, {1, {0.0, 1.0}, 0}}, {{0, 1}});
  const PointSet s = sample_edges(t, 100, 250, 250);
  REQUIRE(s.size() == 100);
  CHECK(s.front().y == 0.0);
  CHECK(s.back().y == 249.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].x == 0.0);
    CHECK(s[i].y == doctest::Approx(249.0 * static_cast<double>(i) / 99.0));
  }
  const PointSet ends = sample_edges(t, 2, 250, 250);
  CHECK(ends == PointSet{{0.0, 0.0}, {0.0, 249.0}});

  ssagen::GrowthConfig g;
  g.seed = 9;
  const Tree grown = ssagen::grow_tree(g);
  CHECK(sample_edges(grown, 100, 250, 250).size() == 100 * grown.edges.size());

  const Tree lone = fixtures::make_tree({{0, {0.5, 0.5}, 0}}, {});
  CHECK_THROWS_AS(sample_edges(lone, 100, 250, 250), DomainError);
  CHECK_THROWS_AS(sample_edges(t, 1, 250, 250), DomainError);
}

TEST_CASE("compare_trees of a tree with itself is zero") {
  const Tree t = fixtures::small_tree();
  const TreeDistance d = compare_trees(t, t, 250, 250);
  CHECK(d.hd_px == 0.0);
  CHECK(d.cd_px2 == 0.0);
  Tree moved = t;
  moved.nodes[4].pos.x += 4.0 / 249.0;
  CHECK(compare_trees(moved, t, 250, 250).hd_px == doctest::Approx(4.0));
}

TEST_CASE("evaluate_dataset") {
  fixtures::TempDir gt("eval_gt");
  fixtures::TempDir pred("eval_pred");
  for (std::uint64_t i = 0; i < 12; ++i) {
    ssagen::GrowthConfig g;
    g.seed = i;
    const Tree t = ssagen::grow_tree(g);
    save_tree(gt / ("tree_" + std::to_string(i) + ".json"), t);
    save_tree(pred / ("tree_" + std::to_string(i) + ".json"), t);
  }

  SUBCASE("identical directories") {
    const DatasetReport r = evaluate_dataset(gt.path(), gt.path(), 250, 250);
    CHECK(r.cases.size() == 12);
    CHECK(r.failures.empty());
    CHECK(r.mean_hd == 0.0);
    CHECK(r.mean_cd == 0.0);
    CHECK(r.cases[2].case_id == "tree_2");
    CHECK(r.cases[10].case_id == "tree_10");
  }
  SUBCASE("corrupted and missing predictions are listed and excluded") {
    {
      std::ofstream(pred / "tree_3.json") << "{\"root\": 0, \"nodes\": [";
    }
    std::filesystem::remove(pred / "tree_7.json");
    Tree shifted = load_tree(gt / "tree_5.json");
    for (auto& n : shifted.nodes) n.pos.y = std::min(1.0, n.pos.y + 2.0 / 249.0);
    save_tree(pred / "tree_5.json", shifted);

    const DatasetReport r = evaluate_dataset(pred.path(), gt.path(), 250, 250);
    REQUIRE(r.failures.size() == 2);
    CHECK(r.failures[0].case_id == "tree_3");
    CHECK(r.failures[1].case_id == "tree_7");
    CHECK(r.cases.size() == 10);
    const double hd5 = compare_trees(shifted, load_tree(gt / "tree_5.json"), 250, 250).hd_px;
    CHECK(r.mean_hd == doctest::Approx(hd5 / 10.0));

    const std::string csv = r.csv();
    CHECK(csv.rfind("case_id,hd_px,cd_px2\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
    const auto j = nlohmann::json::parse(r.json());
    CHECK(j["n"] == 10);
    CHECK(j["failures"].size() == 2);
    CHECK(j["failures"][0]["case_id"] == "tree_3");
    CHECK(j.contains("mean_hd"));
    CHECK(j.contains("mean_cd"));
  }
}
