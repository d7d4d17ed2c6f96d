#include "vastree/dataset.hpp"

#include "vastree/rng.hpp"

namespace vastree::dataset {

std::uint64_t attempt_seed(std::uint64_t base, std::size_t index, int attempt) {
  if (attempt == 0) return base + index;
  return derive_key({base, index, static_cast<std::uint64_t>(attempt)});
}

std::size_t root_keypoint_index(const Tree& tree, const KeypointSet& keypoints) {
  const auto idx = keypoints.nearest(tree.node(tree.root_id).pos);
  if (!idx) throw DomainError("empty keypoint set");
  return *idx;
}

Case make_case(const CaseConfig& config, std::size_t index) {
  config.render.validate();
  const int h = config.render.height;
  const int w = config.render.width;
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    ssagen::GrowthConfig growth = config.growth;
    growth.seed = attempt_seed(config.growth.seed, index, attempt);
    Tree tree;
    try {
      tree = ssagen::grow_tree(growth);
    } catch (const GenerationFailed&) {
      continue;
    }
    KeypointSet kps = tree_keypoints(tree, h, w);
    if (kps.size() != tree.nodes.size()) continue;

    Case c;
    c.index = index;
    c.seed = growth.seed;
    c.attempts = attempt + 1;
    render::RenderConfig rc = config.render;
    rc.noise_seed = growth.seed;
    c.image = render::add_perlin(render::render_tree(tree, rc), rc);
    c.root_keypoint = root_keypoint_index(tree, kps);
    c.has_crossing = ssagen::has_crossing(tree);
    c.keypoints = std::move(kps);
    c.tree = std::move(tree);
    return c;
  }
  throw GenerationFailed("case " + std::to_string(index) + ": no valid tree after " +
                         std::to_string(config.max_attempts) + " attempts");
}

}  // namespace vastree::dataset
