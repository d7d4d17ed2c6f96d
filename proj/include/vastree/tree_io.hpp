#pragma once

// Canonical JSON documents for trees and keypoint files.
//
// Tree: {"root": id, "nodes": [{"id", "x", "y", "r"}...], "edges": [[p, c]...]}
// with an optional trailing "paths": [[[x, y]...] per edge]. Floats are
// written with 17 significant digits so reading back is lossless.
//
// Keypoints: {"root": index | null, "points": [[x, y]...]}.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "vastree/core.hpp"

namespace vastree {

std::string format_double(double v);

std::string write_tree_json(const Tree& tree);
/// Throws ParseError naming the offending field.
Tree read_tree_json(std::string_view text);

Tree load_tree(const std::filesystem::path& path);
void save_tree(const std::filesystem::path& path, const Tree& tree);

struct KeypointFile {
  KeypointSet keypoints;
  std::optional<std::size_t> root;
};

std::string write_keypoints_json(const KeypointSet& kps, std::optional<std::size_t> root);
KeypointFile read_keypoints_json(std::string_view text);
KeypointFile load_keypoints(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a sibling temp file and rename so readers never see partial output.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

}  // namespace vastree
