#include "vastree/decode.hpp"

#include <algorithm>
#include <array>
#include <exception>
#include <bit>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numbers>

#include "vastree/rng.hpp"

namespace vastree::decode {

// ---------------------------------------------------------------------------
// Ground-truth correspondence

GroundTruthMatch::GroundTruthMatch(Tree tree, const KeypointSet& keypoints) : tree_(std::move(tree)) {
  const std::size_t n = tree_.nodes.size();
  for (const auto& node : tree_.nodes) ids_.push_back(node.id);
  parent_.assign(n, -1);
  child_count_.assign(n, 0);
  for (const auto& e : tree_.edges) {
    parent_[slot(e.child)] = e.parent;
    ++child_count_[slot(e.parent)];
  }
  std::vector<std::size_t> node_nearest_kp(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    const auto k = keypoints.nearest(tree_.nodes[j].pos);
    node_nearest_kp[j] = k ? *k : std::numeric_limits<std::size_t>::max();
  }
  node_of_.assign(keypoints.size(), std::nullopt);
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      const double d = distance(keypoints[i], tree_.nodes[j].pos);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (n > 0 && node_nearest_kp[best] == i) node_of_[i] = tree_.nodes[best].id;
  }
}

std::size_t GroundTruthMatch::slot(int id) const {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) throw DomainError("unknown node id " + std::to_string(id));
  return static_cast<std::size_t>(it - ids_.begin());
}

int GroundTruthMatch::query_node(std::optional<WorldPoint> query) const {
  if (!query) return tree_.root_id;
  int best = tree_.root_id;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& node : tree_.nodes) {
    const double d = distance(node.pos, *query);
    if (d < best_d) {
      best_d = d;
      best = node.id;
    }
  }
  return best;
}

int GroundTruthMatch::child_count(int node_id) const { return child_count_[slot(node_id)]; }

bool GroundTruthMatch::is_child(int parent_id, int node_id) const {
  return parent_[slot(node_id)] == parent_id;
}

StepTarget make_step_target(const GroundTruthMatch& match, std::optional<WorldPoint> query,
                            Profile profile) {
  const int k = topology_classes(profile);
  const int q = match.query_node(query);
  StepTarget t;
  t.selection.assign(match.size(), 0.0);
  t.topology.assign(match.size(), std::vector<double>(static_cast<std::size_t>(k), 0.0));
  for (std::size_t i = 0; i < match.size(); ++i) {
    const auto node = match.node_of(i);
    int cls = 0;
    if (node) {
      if (match.is_child(q, *node)) t.selection[i] = 1.0;
      cls = std::min(match.child_count(*node), k - 1);
    }
    t.topology[i][static_cast<std::size_t>(cls)] = 1.0;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Scorers

ExactOracle::ExactOracle(Tree ground_truth, Profile profile, double magnitude)
    : gt_(std::move(ground_truth)), profile_(profile), magnitude_(magnitude) {
  if (!(magnitude > 0.0)) throw ParameterError("oracle logit magnitude must be > 0");
}

StepScore ExactOracle::score(const prompt::StackBuilder&, const KeypointSet& keypoints,
                             std::optional<WorldPoint> query) const {
  const GroundTruthMatch match(gt_, keypoints);
  StepTarget t = make_step_target(match, query, profile_);
  StepScore s;
  s.selection = std::move(t.selection);
  s.topology_logits = std::move(t.topology);
  for (auto& row : s.topology_logits)
    for (double& v : row) v = v > 0.5 ? magnitude_ : -magnitude_;
  return s;
}

NoisyOracle::NoisyOracle(Tree ground_truth, Profile profile, double eta,
                         std::uint64_t noise_seed, double magnitude)
    : ExactOracle(std::move(ground_truth), profile, magnitude), eta_(eta), noise_seed_(noise_seed) {
  if (!(eta >= 0.0)) throw ParameterError("oracle noise eta must be >= 0");
}

StepScore NoisyOracle::score(const prompt::StackBuilder& stacks, const KeypointSet& keypoints,
                             std::optional<WorldPoint> query) const {
  StepScore s = ExactOracle::score(stacks, keypoints, query);
  if (eta_ == 0.0) return s;
  const std::uint64_t qx = query ? std::bit_cast<std::uint64_t>(query->x) : 0xffffffffffffffffULL;
  const std::uint64_t qy = query ? std::bit_cast<std::uint64_t>(query->y) : 0xffffffffffffffffULL;
  for (std::size_t i = 0; i < s.size(); ++i) {
    Rng rng = Rng::keyed({noise_seed_, qx, qy, i});
    for (double& v : s.topology_logits[i]) v += eta_ * rng.normal();
  }
  return s;
}

HeuristicScorer::HeuristicScorer(Profile profile) : HeuristicScorer(profile, Options{}) {}

HeuristicScorer::HeuristicScorer(Profile profile, Options options)
    : profile_(profile), options_(options) {
  if (!(options.distance_scale_px > 0.0) || !(options.ring_radius_px > 0.0))
    throw ParameterError("heuristic scorer scales must be > 0");
}

namespace {

double bilinear(const ImageGrid& g, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(g.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(g.height() - 1));
  const int c0 = std::min(static_cast<int>(x), g.width() - 2);
  const int r0 = std::min(static_cast<int>(y), g.height() - 2);
  const double fx = x - c0;
  const double fy = y - r0;
  return (1 - fy) * ((1 - fx) * g(r0, c0) + fx * g(r0, c0 + 1)) +
         fy * ((1 - fx) * g(r0 + 1, c0) + fx * g(r0 + 1, c0 + 1));
}

// Fraction of 1-px samples along a->b above the vessel threshold.
double corridor_support(const ImageGrid& g, PixelPoint a, PixelPoint b, double thr) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const int n = std::max(1, static_cast<int>(std::ceil(len)));
  int on = 0;
  for (int s = 0; s <= n; ++s) {
    const double t = static_cast<double>(s) / n;
    if (bilinear(g, a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)) > thr) ++on;
  }
  return static_cast<double>(on) / (n + 1);
}

// Number of bright arcs on a ring around p.
int ring_arms(const ImageGrid& g, PixelPoint p, double radius, double thr) {
  constexpr int kSamples = 64;
  std::array<bool, kSamples> on{};
  for (int i = 0; i < kSamples; ++i) {
    const double a = 2.0 * std::numbers::pi * i / kSamples;
    on[i] = bilinear(g, p.x + radius * std::cos(a), p.y + radius * std::sin(a)) > thr;
  }
  int arms = 0;
  for (int i = 0; i < kSamples; ++i)
    if (on[i] && !on[(i + kSamples - 1) % kSamples]) ++arms;
  if (arms == 0 && on[0]) arms = 1;  // fully bright ring
  return arms;
}

}  // namespace

StepScore HeuristicScorer::score(const prompt::StackBuilder& stacks, const KeypointSet& keypoints,
                                 std::optional<WorldPoint> query) const {
  const ImageGrid& img = stacks.image();
  const int h = img.height();
  const int w = img.width();
  const int k = topology_classes(profile_);
  const std::size_t n = keypoints.size();
  StepScore s;
  s.selection.assign(n, 0.0);
  s.topology_logits.assign(n, std::vector<double>(static_cast<std::size_t>(k), 0.0));
  if (n == 0) return s;

  std::vector<int> arms(n);
  for (std::size_t i = 0; i < n; ++i)
    arms[i] = ring_arms(img, world_to_pixel_units(keypoints[i], h, w), options_.ring_radius_px,
                        options_.vessel_threshold);

  WorldPoint q;
  if (query) {
    q = *query;
  } else {
    // Root step: the root is a vessel end, and by Murray's law the thickest
    // one, so take the brightest single-arm keypoint (any keypoint if none).
    auto brightness = [&](std::size_t i) { return img.at(world_to_pixel(keypoints[i], h, w)); };
    std::optional<std::size_t> best;
    for (int pass = 0; pass < 2 && !best; ++pass)
      for (std::size_t i = 0; i < n; ++i)
        if ((pass == 1 || arms[i] == 1) && (!best || brightness(i) > brightness(*best))) best = i;
    q = keypoints[*best];
  }
  const PixelPoint qp = world_to_pixel_units(q, h, w);
  for (std::size_t i = 0; i < n; ++i) {
    const PixelPoint cp = world_to_pixel_units(keypoints[i], h, w);
    const double d = std::hypot(cp.x - qp.x, cp.y - qp.y);
    if (d >= 0.5) {
      const double support = corridor_support(img, qp, cp, options_.vessel_threshold);
      s.selection[i] = std::pow(support, 4.0) * std::exp(-d / options_.distance_scale_px);
    }
    const int guess = std::clamp(arms[i] - 1, 0, k - 1);
    for (int c = 0; c < k; ++c)
      s.topology_logits[i][static_cast<std::size_t>(c)] = -2.0 * std::abs(c - guess);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Sampling

void SamplingParams::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ParameterError("gamma must be > 0");
  if (n_dec < 1) throw ParameterError("n_dec must be >= 1");
  if (rule == SelectionRule::Threshold && !std::isfinite(selection_threshold))
    throw ParameterError("selection threshold must be finite");
}

std::vector<double> softmax_temperature(std::span<const double> logits, double gamma) {
  if (!(gamma > 0.0)) throw ParameterError("gamma must be > 0");
  if (logits.empty()) throw ParameterError("softmax of empty logits");
  double m = -std::numeric_limits<double>::infinity();
  for (double l : logits) {
    if (!std::isfinite(l)) throw ParameterError("logits must be finite");
    m = std::max(m, l);
  }
  std::vector<double> w(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp((logits[i] - m) / gamma);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

std::vector<double> topology_weights(std::span<const double> logits, double gamma, bool is_root,
                                     Profile profile) {
  std::vector<double> valid;
  std::vector<std::size_t> idx;
  for (std::size_t c = 0; c < logits.size(); ++c)
    if (topology_allowed(static_cast<int>(c), is_root, profile)) {
      valid.push_back(logits[c]);
      idx.push_back(c);
    }
  if (valid.empty()) throw ParameterError("no valid topology class for this profile");
  const auto sub = softmax_temperature(valid, gamma);
  std::vector<double> w(logits.size(), 0.0);
  for (std::size_t j = 0; j < idx.size(); ++j) w[idx[j]] = sub[j];
  return w;
}

int sample_class(std::span<const double> weights, double u) {
  double acc = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  if (last < 0) throw ParameterError("all class weights are zero");
  return last;  // rounding left u just above the final cumulative sum
}

// ---------------------------------------------------------------------------
// Cache

ScoreCache::ScoreCache(const StepScorer& scorer, const prompt::StackBuilder& stacks,
                       const KeypointSet& keypoints, Profile profile)
    : scorer_(scorer),
      stacks_(stacks),
      keypoints_(keypoints),
      profile_(profile),
      once_(std::make_unique<std::once_flag[]>(keypoints.size() + 1)),
      slots_(keypoints.size() + 1) {}

const StepScore& ScoreCache::get(std::optional<std::size_t> query) {
  const std::size_t n = keypoints_.size();
  if (query && *query >= n) throw DomainError("query index out of range");
  const std::size_t slot = query ? *query : n;
  std::call_once(once_[slot], [&] {
    std::optional<WorldPoint> q;
    if (query) q = keypoints_[*query];
    StepScore s = scorer_.score(stacks_, keypoints_, q);
    ++calls_;
    const auto k = static_cast<std::size_t>(topology_classes(profile_));
    if (s.selection.size() != n || s.topology_logits.size() != n)
      throw ScorerError("scorer returned " + std::to_string(s.selection.size()) +
                        " selection values for " + std::to_string(n) + " keypoints");
    for (std::size_t i = 0; i < n; ++i) {
      if (s.topology_logits[i].size() != k)
        throw ScorerError("scorer topology row " + std::to_string(i) + " has " +
                          std::to_string(s.topology_logits[i].size()) + " classes, expected " +
                          std::to_string(k));
      if (!std::isfinite(s.selection[i]))
        throw ScorerError("scorer selection " + std::to_string(i) + " is not finite");
      for (double v : s.topology_logits[i])
        if (!std::isfinite(v))
          throw ScorerError("scorer topology row " + std::to_string(i) + " is not finite");
    }
    slots_[slot] = std::move(s);
  });
  return slots_[slot];
}

std::size_t ScoreCache::scorer_calls() const { return calls_.load(); }

// ---------------------------------------------------------------------------
// Decoding

namespace {

constexpr std::uint64_t kRootStream = 0x524f4f54ULL;

}  // namespace

StepResult decode_step(ScoreCache& cache, std::optional<std::size_t> query, std::size_t root,
                       int query_class, DecodeState& state, const SamplingParams& params,
                       std::uint64_t sample_index) {
  const std::size_t n = cache.keypoints().size();
  StepResult out;
  const StepScore* score = nullptr;
  if (!query) {
    if (root >= n) throw DomainError("root index out of range");
    score = &cache.get(std::nullopt);
    out.scorer_called = true;
    state.used[root] = true;
    const auto w = topology_weights(score->topology_logits[root], params.gamma, true, params.profile);
    Rng rng = Rng::keyed({params.seed, sample_index, kRootStream, root});
    out.query_class = sample_class(w, rng.uniform());
  } else {
    out.query_class = query_class;
    if (query_class == 0) return out;
    score = &cache.get(*query);
    out.scorer_called = true;
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i)
    if (!state.used[i]) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score->selection[a] > score->selection[b];
  });
  if (params.rule == SelectionRule::TopK) {
    const auto k = static_cast<std::size_t>(out.query_class);
    if (order.size() < k) out.truncated = true;
    order.resize(std::min(order.size(), k));
  } else {
    std::erase_if(order, [&](std::size_t i) {
      return !(score->selection[i] > params.selection_threshold);
    });
  }

  for (std::size_t c : order) {
    state.used[c] = true;
    const auto w = topology_weights(score->topology_logits[c], params.gamma, false, params.profile);
    Rng rng = Rng::keyed({params.seed, sample_index, c});
    out.children.push_back(c);
    out.child_classes.push_back(sample_class(w, rng.uniform()));
  }
  return out;
}

DecodeResult decode_tree(ScoreCache& cache, std::size_t root, const SamplingParams& params,
                         std::uint64_t sample_index) {
  params.validate();
  const KeypointSet& kps = cache.keypoints();
  if (root >= kps.size()) throw DomainError("root index out of range");
  DecodeState state(kps.size());
  DecodeResult res;
  res.tree.root_id = static_cast<int>(root);
  res.tree.nodes.push_back({static_cast<int>(root), kps[root], 0.0});

  std::deque<std::pair<std::optional<std::size_t>, int>> frontier{{std::nullopt, 0}};
  while (!frontier.empty()) {
    const auto [query, cls] = frontier.front();
    frontier.pop_front();
    const StepResult step = decode_step(cache, query, root, cls, state, params, sample_index);
    const std::size_t parent = query ? *query : root;
    if (step.truncated) {
      res.truncated = true;
      res.truncated_nodes.push_back(parent);
    }
    for (std::size_t j = 0; j < step.children.size(); ++j) {
      const std::size_t c = step.children[j];
      res.tree.nodes.push_back({static_cast<int>(c), kps[c], 0.0});
      res.tree.edges.push_back({static_cast<int>(parent), static_cast<int>(c)});
      frontier.emplace_back(c, step.child_classes[j]);
    }
  }
  canonicalize(res.tree);
  return res;
}

DecodeRun stochastic_decode(ScoreCache& cache, std::size_t root, const SamplingParams& params) {
  params.validate();
  DecodeRun run;
  run.candidates = cache.keypoints().size();
  const int n = params.n_dec;
  std::vector<DecodeResult> results(static_cast<std::size_t>(n));
  std::exception_ptr failure;
  const bool parallel = cache.concurrent_safe() && n > 1;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int s = 0; s < n; ++s) {
    try {
      results[static_cast<std::size_t>(s)] =
          decode_tree(cache, root, params, static_cast<std::uint64_t>(s));
    } catch (...) {
#pragma omp critical(vastree_decode_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  for (auto& r : results) {
    run.any_truncated = run.any_truncated || r.truncated;
    run.samples.push_back(std::move(r.tree));
  }
  count_edges(run);
  run.merged = merge_trees(run, root, cache.keypoints());
  return run;
}

DecodeRun stochastic_decode(const StepScorer& scorer, const prompt::StackBuilder& stacks,
                            const KeypointSet& keypoints, std::size_t root,
                            const SamplingParams& params) {
  ScoreCache cache(scorer, stacks, keypoints, params.profile);
  return stochastic_decode(cache, root, params);
}

void count_edges(DecodeRun& run) {
  const std::size_t p = run.candidates;
  run.count_matrix.assign(p * p, 0);
  for (const auto& t : run.samples)
    for (const auto& e : t.edges) {
      if (e.parent < 0 || e.child < 0 || static_cast<std::size_t>(e.parent) >= p ||
          static_cast<std::size_t>(e.child) >= p)
        throw DomainError("sample edge references a non-candidate");
      ++run.count_matrix[static_cast<std::size_t>(e.parent) * p + static_cast<std::size_t>(e.child)];
    }
}

Tree merge_trees(const DecodeRun& run, std::size_t root, const KeypointSet& keypoints) {
  const std::size_t p = run.candidates;
  if (root >= p || keypoints.size() != p) throw DomainError("merge: inconsistent candidate set");
  if (run.count_matrix.size() != p * p) throw ShapeError("merge: count matrix not filled");

  // Per-sample child counts; -1 marks "node absent from this sample".
  std::vector<std::vector<int>> kids(run.samples.size(), std::vector<int>(p, -1));
  for (std::size_t s = 0; s < run.samples.size(); ++s) {
    for (const auto& nd : run.samples[s].nodes) kids[s][static_cast<std::size_t>(nd.id)] = 0;
    for (const auto& e : run.samples[s].edges) ++kids[s][static_cast<std::size_t>(e.parent)];
  }
  auto modal_k = [&](std::size_t node) {
    std::map<int, int> freq;
    for (const auto& k : kids)
      if (k[node] >= 0) ++freq[k[node]];
    int best = 0;
    int best_f = 0;
    for (const auto& [k, f] : freq)
      if (f >= best_f) {  // ascending keys: ties go to the larger k
        best = k;
        best_f = f;
      }
    return best;
  };

  Tree out;
  out.root_id = static_cast<int>(root);
  out.nodes.push_back({static_cast<int>(root), keypoints[root], 0.0});
  std::vector<bool> used(p, false);
  used[root] = true;
  std::deque<std::size_t> frontier{root};
  while (!frontier.empty()) {
    const std::size_t parent = frontier.front();
    frontier.pop_front();
    const auto k = static_cast<std::size_t>(modal_k(parent));
    if (k == 0) continue;
    std::vector<std::size_t> cand;
    for (std::size_t c = 0; c < p; ++c)
      if (!used[c] && run.count(parent, c) > 0) cand.push_back(c);
    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
      return run.count(parent, a) > run.count(parent, b);
    });
    cand.resize(std::min(cand.size(), k));
    for (std::size_t c : cand) {
      used[c] = true;
      out.nodes.push_back({static_cast<int>(c), keypoints[c], 0.0});
      out.edges.push_back({static_cast<int>(parent), static_cast<int>(c)});
      frontier.push_back(c);
    }
  }
  canonicalize(out);
  return out;
}

double step_loss(const StepScore& score, const StepTarget& target, double lambda_t,
                 double lambda_s) {
  const std::size_t n = score.size();
  if (target.selection.size() != n || target.topology.size() != n ||
      score.topology_logits.size() != n)
    throw ShapeError("step_loss: P differs between score and target");
  if (n == 0) throw ShapeError("step_loss: empty step");
  double xe = 0.0;
  double mse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = score.topology_logits[i];
    const auto& t = target.topology[i];
    if (l.size() != t.size() || l.empty()) throw ShapeError("step_loss: K differs");
    const double m = *std::max_element(l.begin(), l.end());
    double sum = 0.0;
    for (double v : l) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    for (std::size_t c = 0; c < l.size(); ++c) xe -= t[c] * (l[c] - lse);
    const double d = score.selection[i] - target.selection[i];
    mse += d * d;
  }
  return lambda_t * xe / static_cast<double>(n) + lambda_s * mse / static_cast<double>(n);
}

}  // namespace vastree::decode
