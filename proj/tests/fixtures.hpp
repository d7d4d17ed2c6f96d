#pragma once

// Small hand-built trees and scratch directories shared by the unit tests.

#include <filesystem>
#include <string>
#include <unistd.h>

#include "vastree/core.hpp"

namespace fixtures {

inline vastree::Tree make_tree(std::vector<vastree::TreeNode> nodes,
                               std::vector<vastree::TreeEdge> edges, int root = 0) {
  vastree::Tree t;
  t.root_id = root;
  t.nodes = std::move(nodes);
  t.edges = std::move(edges);
  return t;
}

/// root(0) -> 1, 2 ; 1 -> 3, 4. Non-root bifurcation, SSA-valid.
inline vastree::Tree small_tree(double r = 0.004) {
  return make_tree({{0, {0.5, 0.1}, r}, {1, {0.5, 0.4}, r}, {2, {0.8, 0.3}, r},
                    {3, {0.3, 0.7}, r}, {4, {0.7, 0.8}, r}},
                   {{0, 1}, {0, 2}, {1, 3}, {1, 4}});
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("vastree_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
