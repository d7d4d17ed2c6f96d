#include <doctest.h>

#include "fixtures.hpp"
#include "vastree/dataset.hpp"
#include "vastree/external_scorer.hpp"
#include "vastree/tree_io.hpp"

using namespace vastree;
using namespace vastree::decode;

namespace {

std::string fake(const std::string& args) { return std::string(FAKE_SCORER) + " " + args; }

struct Setup {
  fixtures::TempDir dir{"ext_scorer"};
  dataset::Case c = dataset::make_case(dataset::CaseConfig{}, 3);
  std::filesystem::path tree_path = dir / "tree.json";
  prompt::StackBuilder stacks{c.image};
  Setup() { save_tree(tree_path, c.tree); }
};

}  // namespace

TEST_CASE("external scorer relays the exact oracle") {
  Setup s;
  const ExternalScorer ext(fake("exact " + s.tree_path.string()), Profile::SSA, s.dir.path());
  const ExactOracle local(s.c.tree, Profile::SSA);

  std::vector<std::optional<WorldPoint>> queries{std::nullopt};
  for (std::size_t i = 0; i < s.c.keypoints.size(); i += 3) queries.push_back(s.c.keypoints[i]);
  for (const auto& q : queries) {
    const StepScore a = ext.score(s.stacks, s.c.keypoints, q);
    const StepScore b = local.score(s.stacks, s.c.keypoints, q);
    REQUIRE(a.selection == b.selection);
    REQUIRE(a.topology_logits == b.topology_logits);
  }
  CHECK(ext.requests_sent() == queries.size());

  // the scratch stack files are removed after every request
  int leftovers = 0;
  for (const auto& e : std::filesystem::directory_iterator(s.dir.path()))
    leftovers += e.path().extension() == ".f32";
  CHECK(leftovers == 0);
}

TEST_CASE("decoding through the external scorer equals decoding in process") {
  Setup s;
  const ExternalScorer ext(fake("exact " + s.tree_path.string()), Profile::SSA, s.dir.path());
  const ExactOracle local(s.c.tree, Profile::SSA);
  SamplingParams p;
  p.n_dec = 3;
  p.seed = 11;
  const DecodeRun a = stochastic_decode(ext, s.stacks, s.c.keypoints, s.c.root_keypoint, p);
  const DecodeRun b = stochastic_decode(local, s.stacks, s.c.keypoints, s.c.root_keypoint, p);
  CHECK(a.merged == b.merged);
  CHECK(a.samples == b.samples);
}

TEST_CASE("external scorer failures surface as ScorerError") {
  Setup s;
  CHECK_THROWS_AS(ExternalScorer(fake("bad-protocol"), Profile::SSA), ScorerError);
  CHECK_THROWS_AS(ExternalScorer(fake("silent"), Profile::SSA), ScorerError);
  CHECK_THROWS_AS(ExternalScorer("/nonexistent/scorer-binary", Profile::SSA), ScorerError);

  for (const char* mode : {"error", "crash", "wrong-shape", "wrong-id"}) {
    CAPTURE(mode);
    const ExternalScorer ext(fake(mode), Profile::SSA, s.dir.path());
    CHECK_THROWS_AS(ext.score(s.stacks, s.c.keypoints, std::nullopt), ScorerError);
  }

  // trifurcation classes requested but the tree file is read as SSA: the
  // fake still answers with k_classes columns, so VRM rows have 4 entries
  const ExternalScorer vrm(fake("exact " + s.tree_path.string() + " vrm"), Profile::VRM, s.dir.path());
  CHECK(vrm.score(s.stacks, s.c.keypoints, std::nullopt).classes() == 4);
}
