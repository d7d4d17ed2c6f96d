#pragma once

// Recursive tree decoding.
//
// A StepScorer answers one recursive step: given the channel stack for a
// query (parent) node and the candidate keypoints, it returns a selection
// score per candidate and topology logits per candidate. The decoder picks
// the query's children as the top-k unused candidates, where k is the query's
// own topology class, and samples each child's class from a temperature
// softmax over its logits. Repeating this n_dec times and merging the
// parent->child counts yields the final tree.

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vastree/core.hpp"
#include "vastree/prompt.hpp"

namespace vastree::decode {

/// Per-candidate outputs of one step: selection (P) and topology logits (P x K).
struct StepScore {
  std::vector<double> selection;
  std::vector<std::vector<double>> topology_logits;

  std::size_t size() const { return selection.size(); }
  int classes() const {
    return topology_logits.empty() ? 0 : static_cast<int>(topology_logits.front().size());
  }
};

/// Supervision for one step: 1 for children of the query, one-hot topology rows.
struct StepTarget {
  std::vector<double> selection;
  std::vector<std::vector<double>> topology;
};

class StepScorer {
 public:
  virtual ~StepScorer() = default;

  /// Must be deterministic for identical inputs. `query` is absent for the
  /// root step, whose prompt channel is empty.
  virtual StepScore score(const prompt::StackBuilder& stacks, const KeypointSet& keypoints,
                          std::optional<WorldPoint> query) const = 0;

  /// False when calls must not overlap (e.g. a subprocess).
  virtual bool concurrent_safe() const { return true; }
};

/// Mutual-nearest-neighbour correspondence between candidate keypoints and
/// the nodes of a reference tree.
class GroundTruthMatch {
 public:
  GroundTruthMatch(Tree tree, const KeypointSet& keypoints);

  const Tree& tree() const { return tree_; }
  std::size_t size() const { return node_of_.size(); }
  /// Tree node id matched to keypoint i, if any.
  std::optional<int> node_of(std::size_t keypoint) const { return node_of_[keypoint]; }
  /// Node the query refers to: the root when absent, else the nearest node.
  int query_node(std::optional<WorldPoint> query) const;
  int child_count(int node_id) const;
  bool is_child(int parent_id, int node_id) const;

 private:
  Tree tree_;
  std::vector<std::optional<int>> node_of_;
  std::vector<int> ids_;
  std::vector<int> parent_;
  std::vector<int> child_count_;
  std::size_t slot(int id) const;
};

/// Supervision targets for the step expanding `query` (absent: root step).
StepTarget make_step_target(const GroundTruthMatch& match, std::optional<WorldPoint> query,
                            Profile profile);

/// Reads a hidden ground-truth tree: selection 1/0, topology logits +-M.
class ExactOracle : public StepScorer {
 public:
  ExactOracle(Tree ground_truth, Profile profile, double magnitude = 10.0);
  StepScore score(const prompt::StackBuilder& stacks, const KeypointSet& keypoints,
                  std::optional<WorldPoint> query) const override;

 protected:
  Tree gt_;
  Profile profile_;
  double magnitude_;
};

/// ExactOracle topology logits plus seeded Gaussian noise of std eta. The
/// noise is keyed by the query position and candidate index, so repeated
/// calls with the same inputs return the same scores.
class NoisyOracle : public ExactOracle {
 public:
  NoisyOracle(Tree ground_truth, Profile profile, double eta = 2.0, std::uint64_t noise_seed = 0,
              double magnitude = 10.0);
  StepScore score(const prompt::StackBuilder& stacks, const KeypointSet& keypoints,
                  std::optional<WorldPoint> query) const override;

 private:
  double eta_;
  std::uint64_t noise_seed_;
};

/// Image-only geometric scorer. Selection favours nearby candidates joined to
/// the query by a bright straight corridor; topology counts vessel arms
/// crossing a small ring around each candidate.
class HeuristicScorer : public StepScorer {
 public:
  struct Options {
    double vessel_threshold = 0.12;  ///< intensity treated as vessel
    double distance_scale_px = 40.0;
    double ring_radius_px = 5.0;
  };
  explicit HeuristicScorer(Profile profile);
  HeuristicScorer(Profile profile, Options options);
  StepScore score(const prompt::StackBuilder& stacks, const KeypointSet& keypoints,
                  std::optional<WorldPoint> query) const override;

 private:
  Profile profile_;
  Options options_;
};

enum class SelectionRule { TopK, Threshold };

struct SamplingParams {
  double gamma = 1.0;  ///< topology temperature, > 0
  int n_dec = 1;
  std::uint64_t seed = 0;
  Profile profile = Profile::SSA;
  SelectionRule rule = SelectionRule::TopK;
  double selection_threshold = 0.5;  ///< used by SelectionRule::Threshold

  void validate() const;
};

/// w_i = exp(l_i / gamma) / sum_j exp(l_j / gamma), with max subtraction.
/// Throws ParameterError when gamma <= 0.
std::vector<double> softmax_temperature(std::span<const double> logits, double gamma);

/// Softmax restricted to the classes valid for a root / non-root node.
std::vector<double> topology_weights(std::span<const double> logits, double gamma, bool is_root,
                                     Profile profile);

/// Inverse-CDF draw: first index whose cumulative weight exceeds u in [0,1).
int sample_class(std::span<const double> weights, double u);

/// Memoizes StepScores per query keypoint (plus one slot for the root step)
/// for a fixed image and keypoint set. Safe for concurrent use.
class ScoreCache {
 public:
  ScoreCache(const StepScorer& scorer, const prompt::StackBuilder& stacks,
             const KeypointSet& keypoints, Profile profile);

  /// `query` is a keypoint index, or nullopt for the root step.
  const StepScore& get(std::optional<std::size_t> query);
  std::size_t scorer_calls() const;

  const KeypointSet& keypoints() const { return keypoints_; }
  bool concurrent_safe() const { return scorer_.concurrent_safe(); }

 private:
  const StepScorer& scorer_;
  const prompt::StackBuilder& stacks_;
  const KeypointSet& keypoints_;
  Profile profile_;
  std::unique_ptr<std::once_flag[]> once_;
  std::vector<StepScore> slots_;
  std::atomic<std::size_t> calls_{0};
};

/// Tracks which candidates are already in the tree being decoded.
struct DecodeState {
  std::vector<bool> used;
  explicit DecodeState(std::size_t n) : used(n, false) {}
};

struct StepResult {
  std::vector<std::size_t> children;
  std::vector<int> child_classes;
  int query_class = 0;  ///< sampled here for the root step, echoed otherwise
  bool truncated = false;
  bool scorer_called = false;
};

/// One recursive step. `query` is the keypoint index being expanded, or
/// nullopt for the root step (then `root` is expanded and its class sampled
/// from its own topology row). `query_class` is the query's child count,
/// ignored for the root step.
StepResult decode_step(ScoreCache& cache, std::optional<std::size_t> query, std::size_t root,
                       int query_class, DecodeState& state, const SamplingParams& params,
                       std::uint64_t sample_index);

struct DecodeResult {
  Tree tree;  ///< node ids are keypoint indices; radii 0
  bool truncated = false;
  std::vector<std::size_t> truncated_nodes;
};

/// Breadth-first recursion of decode_step from `root`.
DecodeResult decode_tree(ScoreCache& cache, std::size_t root, const SamplingParams& params,
                         std::uint64_t sample_index = 0);

struct DecodeRun {
  std::vector<Tree> samples;
  std::size_t candidates = 0;
  std::vector<int> count_matrix;  ///< row-major P x P; [p * P + c] = #samples with edge p->c
  Tree merged;
  bool any_truncated = false;

  int count(std::size_t parent, std::size_t child) const {
    return count_matrix[parent * candidates + child];
  }
};

/// n_dec independent decodes (sub-seeded by sample index), count matrix, merge.
DecodeRun stochastic_decode(ScoreCache& cache, std::size_t root, const SamplingParams& params);

/// Convenience overload owning its cache.
DecodeRun stochastic_decode(const StepScorer& scorer, const prompt::StackBuilder& stacks,
                            const KeypointSet& keypoints, std::size_t root,
                            const SamplingParams& params);

/// Fills count_matrix from samples.
void count_edges(DecodeRun& run);

/// From the root: k(p) = modal child count of p over samples containing p
/// (ties -> larger); children = the k(p) unused candidates with the highest
/// counts (ties -> lower index, zero counts never chosen).
Tree merge_trees(const DecodeRun& run, std::size_t root, const KeypointSet& keypoints);

/// lambda_t * mean cross-entropy(topology) + lambda_s * mean squared error(selection).
double step_loss(const StepScore& score, const StepTarget& target, double lambda_t = 0.1,
                 double lambda_s = 1.0);

}  // namespace vastree::decode
