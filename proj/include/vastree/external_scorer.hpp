#pragma once

// Client for out-of-process scorers speaking `vastree-scorer/1`:
// line-delimited JSON over the child's stdin/stdout.
//
//   scorer -> {"protocol": "vastree-scorer/1"}            (once, on startup)
//   client -> {"id": n, "stack": {"path": "..."}, "keypoints": [[x,y],...],
//              "query": [x,y] | null, "k_classes": 3|4}
//   scorer -> {"id": n, "selection": [...], "topology_logits": [[...],...]}
//          or {"id": n, "error": "..."}
//
// The stack is handed over as a temporary multi-channel .f32 file. Requests
// are strictly sequential.

#include <filesystem>
#include <mutex>
#include <string>

#include "vastree/decode.hpp"

namespace vastree::decode {

inline constexpr const char* kScorerProtocol = "vastree-scorer/1";

class ExternalScorer : public StepScorer {
 public:
  /// Runs `command` through /bin/sh and waits for the handshake. Throws
  /// ScorerError when the process cannot start, exits early or announces a
  /// different protocol.
  ExternalScorer(const std::string& command, Profile profile,
                 std::filesystem::path scratch_dir = std::filesystem::temp_directory_path());
  ~ExternalScorer() override;

  ExternalScorer(const ExternalScorer&) = delete;
  ExternalScorer& operator=(const ExternalScorer&) = delete;

  StepScore score(const prompt::StackBuilder& stacks, const KeypointSet& keypoints,
                  std::optional<WorldPoint> query) const override;
  bool concurrent_safe() const override { return false; }

  std::size_t requests_sent() const { return next_id_; }

 private:
  std::string read_line() const;
  void write_line(const std::string& line) const;
  void shutdown();

  Profile profile_;
  std::filesystem::path scratch_dir_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  mutable std::string buffer_;
  mutable std::size_t next_id_ = 0;
  mutable std::mutex mutex_;
};

}  // namespace vastree::decode
