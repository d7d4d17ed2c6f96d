#include <doctest.h>

#include <cmath>
#include <cstring>

#include "fixtures.hpp"
#include "vastree/image_io.hpp"
#include "vastree/ssagen.hpp"
#include "vastree/tree_io.hpp"

using namespace vastree;

TEST_CASE("tree JSON round-trip of a minimal bifurcation") {
  const Tree t = fixtures::make_tree(
      {{0, {0.5, 0.1}, 0.005}, {1, {0.2, 0.9}, 0.004}, {2, {0.8, 0.9}, 0.004}}, {{0, 1}, {0, 2}});
  const std::string doc = write_tree_json(t);
  CHECK(read_tree_json(doc) == t);
  CHECK(write_tree_json(read_tree_json(doc)) == doc);
  // field order as documented
  CHECK(doc.find("\"root\"") < doc.find("\"nodes\""));
  CHECK(doc.find("\"nodes\"") < doc.find("\"edges\""));
}

TEST_CASE("tree JSON preserves full double precision and paths") {
  Tree t = fixtures::small_tree(0.1 / 3.0);
  t.nodes[3].pos = {1.0 / 3.0, std::nextafter(0.7, 1.0)};
  t.paths = {{{0.5, 0.2}, {0.5, 0.3}}, {}, {{0.4, 0.55}}, {}};
  CHECK(read_tree_json(write_tree_json(t)) == t);
}

TEST_CASE("generated trees round-trip") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ssagen::GrowthConfig cfg;
    cfg.seed = seed;
    const Tree t = ssagen::grow_tree(cfg);
    REQUIRE(read_tree_json(write_tree_json(t)) == t);
  }
}

TEST_CASE("tree JSON parse errors name the field") {
  auto message = [](const std::string& doc) {
    try {
      read_tree_json(doc);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string("<no error>");
  };
  const std::string dangling =
      R"({"root":0,"nodes":[{"id":0,"x":0.5,"y":0.5,"r":0}],"edges":[[0,7]]})";
  CHECK(message(dangling).find("unknown node id") != std::string::npos);
  CHECK(message(R"({"root":0,"nodes":[{"id":0,"y":0.5,"r":0}],"edges":[]})").find("x") !=
        std::string::npos);
  CHECK(message("{not json").find("malformed JSON") != std::string::npos);
  CHECK(message(R"({"root":3,"nodes":[{"id":0,"x":0.5,"y":0.5,"r":0}],"edges":[]})")
            .find("root") != std::string::npos);
}

TEST_CASE("keypoint JSON round-trip") {
  const auto k = KeypointSet::in_order({{0.1, 0.2}, {0.3, 1.0 / 7.0}});
  const auto back = read_keypoints_json(write_keypoints_json(k, 1));
  CHECK(back.keypoints == k);
  CHECK(back.root == std::size_t{1});
  CHECK_FALSE(read_keypoints_json(write_keypoints_json(k, std::nullopt)).root.has_value());
  CHECK_THROWS_AS(read_keypoints_json(R"({"root":5,"points":[[0.1,0.1]]})"), ParseError);
}

TEST_CASE("sha256 of a known vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("atomic file write leaves no temp files behind") {
  fixtures::TempDir dir("io");
  write_file_atomic(dir / "a.txt", "hello");
  write_file_atomic(dir / "a.txt", "world");
  CHECK(read_text_file(dir / "a.txt") == "world");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  CHECK(entries == 1);
}

TEST_CASE("f32 raster format") {
  ImageGrid g(2, 3, Channel::Intensity);
  g(0, 0) = 0.25;
  g(1, 2) = -1.5;
  const std::string bytes = io::encode_f32(g);
  REQUIRE(bytes.size() == 8 + 4 * 6);
  std::uint32_t h = 0, w = 0;
  std::memcpy(&h, bytes.data(), 4);
  std::memcpy(&w, bytes.data() + 4, 4);
  CHECK(h == 2);
  CHECK(w == 3);
  float last = 0;
  std::memcpy(&last, bytes.data() + 8 + 4 * 5, 4);
  CHECK(last == -1.5f);
  CHECK(io::decode_f32(bytes) == g);
  CHECK_THROWS_AS(io::decode_f32(bytes.substr(0, 10)), ParseError);
}

TEST_CASE("f32 stack format") {
  std::vector<ImageGrid> planes{ImageGrid(3, 2, Channel::Intensity, 1.0),
                                ImageGrid(3, 2, Channel::Prompt, 0.5)};
  const std::string bytes = io::encode_f32_stack(planes);
  REQUIRE(bytes.size() == 12 + 4 * 12);
  const auto back = io::decode_f32_stack(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back[1](2, 1) == 0.5);
  planes.push_back(ImageGrid(2, 2));
  CHECK_THROWS_AS(io::encode_f32_stack(planes), ShapeError);
}

TEST_CASE("16-bit PNG scales by 65535/1.5 and clamps") {
  ImageGrid g(4, 5, Channel::Intensity);
  g(0, 0) = 1.5;
  g(1, 1) = 0.75;
  g(2, 2) = 9.0;
  g(3, 3) = -1.0;
  const ImageGrid back = io::decode_png16(io::encode_png16(g));
  CHECK(back(0, 0) == doctest::Approx(1.5));
  CHECK(back(1, 1) == doctest::Approx(0.75).epsilon(1e-4));
  CHECK(back(2, 2) == doctest::Approx(1.5));
  CHECK(back(3, 3) == 0.0);
  CHECK(io::encode_png16(g) == io::encode_png16(g));
}

TEST_CASE("image files dispatch on extension") {
  fixtures::TempDir dir("img");
  ImageGrid g(3, 3, Channel::Intensity, 0.5);
  io::save_image(dir / "a.f32", g);
  CHECK(io::load_image(dir / "a.f32") == g);
  CHECK_THROWS_AS(io::save_image(dir / "a.bmp", g), ParameterError);
}
