#include "vastree/tree_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace vastree {

using nlohmann::json;

std::string format_double(double v) {
  if (!std::isfinite(v)) throw ParameterError("cannot serialize non-finite value");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string write_tree_json(const Tree& tree) {
  std::ostringstream os;
  os << "{\"root\": " << tree.root_id << ", \"nodes\": [";
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    os << (i ? ",\n  " : "\n  ") << "{\"id\": " << n.id << ", \"x\": " << format_double(n.pos.x)
       << ", \"y\": " << format_double(n.pos.y) << ", \"r\": " << format_double(n.radius) << "}";
  }
  os << "\n], \"edges\": [";
  for (std::size_t i = 0; i < tree.edges.size(); ++i)
    os << (i ? ", " : "") << "[" << tree.edges[i].parent << ", " << tree.edges[i].child << "]";
  os << "]";
  const bool any_path = std::any_of(tree.paths.begin(), tree.paths.end(),
                                    [](const auto& p) { return !p.empty(); });
  if (any_path) {
    os << ", \"paths\": [";
    for (std::size_t i = 0; i < tree.paths.size(); ++i) {
      os << (i ? ",\n  " : "\n  ") << "[";
      for (std::size_t j = 0; j < tree.paths[i].size(); ++j)
        os << (j ? ", " : "") << "[" << format_double(tree.paths[i][j].x) << ", "
           << format_double(tree.paths[i][j].y) << "]";
      os << "]";
    }
    os << "\n]";
  }
  os << "}\n";
  return os.str();
}

namespace {

const json& field(const json& obj, const char* name, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected object");
  auto it = obj.find(name);
  if (it == obj.end()) throw ParseError(where + "." + name + ": missing field");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected number");
  return v.get<double>();
}

int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ParseError(where + ": expected integer");
  return v.get<int>();
}

WorldPoint pair_point(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) throw ParseError(where + ": expected [x, y]");
  return {number(v[0], where + "[0]"), number(v[1], where + "[1]")};
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

Tree read_tree_json(std::string_view text) {
  const json doc = parse_json(text);
  Tree tree;
  tree.root_id = integer(field(doc, "root", "tree"), "root");
  const json& nodes = field(doc, "nodes", "tree");
  if (!nodes.is_array()) throw ParseError("nodes: expected array");
  std::set<int> ids;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string w = "nodes[" + std::to_string(i) + "]";
    TreeNode n;
    n.id = integer(field(nodes[i], "id", w), w + ".id");
    n.pos.x = number(field(nodes[i], "x", w), w + ".x");
    n.pos.y = number(field(nodes[i], "y", w), w + ".y");
    n.radius = number(field(nodes[i], "r", w), w + ".r");
    if (!ids.insert(n.id).second) throw ParseError(w + ".id: duplicate node id " + std::to_string(n.id));
    tree.nodes.push_back(n);
  }
  if (!ids.contains(tree.root_id))
    throw ParseError("root: unknown node id " + std::to_string(tree.root_id));
  const json& edges = field(doc, "edges", "tree");
  if (!edges.is_array()) throw ParseError("edges: expected array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string w = "edges[" + std::to_string(i) + "]";
    if (!edges[i].is_array() || edges[i].size() != 2) throw ParseError(w + ": expected [parent, child]");
    TreeEdge e{integer(edges[i][0], w + "[0]"), integer(edges[i][1], w + "[1]")};
    if (!ids.contains(e.parent)) throw ParseError(w + "[0]: unknown node id " + std::to_string(e.parent));
    if (!ids.contains(e.child)) throw ParseError(w + "[1]: unknown node id " + std::to_string(e.child));
    tree.edges.push_back(e);
  }
  if (auto it = doc.find("paths"); it != doc.end()) {
    if (!it->is_array() || it->size() != tree.edges.size())
      throw ParseError("paths: expected one polyline per edge");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string w = "paths[" + std::to_string(i) + "]";
      if (!(*it)[i].is_array()) throw ParseError(w + ": expected array");
      std::vector<WorldPoint> line;
      for (std::size_t j = 0; j < (*it)[i].size(); ++j)
        line.push_back(pair_point((*it)[i][j], w + "[" + std::to_string(j) + "]"));
      tree.paths.push_back(std::move(line));
    }
  }
  return tree;
}

Tree load_tree(const std::filesystem::path& path) { return read_tree_json(read_text_file(path)); }

void save_tree(const std::filesystem::path& path, const Tree& tree) {
  write_file_atomic(path, write_tree_json(tree));
}

std::string write_keypoints_json(const KeypointSet& kps, std::optional<std::size_t> root) {
  std::ostringstream os;
  os << "{\"root\": ";
  if (root) os << *root; else os << "null";
  os << ", \"points\": [";
  for (std::size_t i = 0; i < kps.size(); ++i)
    os << (i ? ", " : "") << "[" << format_double(kps[i].x) << ", " << format_double(kps[i].y) << "]";
  os << "]}\n";
  return os.str();
}

KeypointFile read_keypoints_json(std::string_view text) {
  const json doc = parse_json(text);
  const json& pts = field(doc, "points", "keypoints");
  if (!pts.is_array()) throw ParseError("points: expected array");
  std::vector<WorldPoint> points;
  for (std::size_t i = 0; i < pts.size(); ++i)
    points.push_back(pair_point(pts[i], "points[" + std::to_string(i) + "]"));
  KeypointFile out{KeypointSet::in_order(std::move(points)), std::nullopt};
  if (auto it = doc.find("root"); it != doc.end() && !it->is_null()) {
    const int r = integer(*it, "root");
    if (r < 0 || static_cast<std::size_t>(r) >= out.keypoints.size())
      throw ParseError("root: index out of range");
    out.root = static_cast<std::size_t>(r);
  }
  return out;
}

KeypointFile load_keypoints(const std::filesystem::path& path) {
  return read_keypoints_json(read_text_file(path));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace vastree
