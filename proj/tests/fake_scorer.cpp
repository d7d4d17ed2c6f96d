// Test double for the external scorer protocol.
//
//   fake_scorer exact TREE [ssa|vrm]  answers like ExactOracle on TREE
//   fake_scorer bad-protocol          announces another protocol version
//   fake_scorer silent                exits before the handshake
//   fake_scorer error                 answers every request with an error
//   fake_scorer crash                 exits on the first request
//   fake_scorer wrong-shape           drops the last selection score
//   fake_scorer wrong-id              echoes id + 1

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <string>

#include <json.hpp>

#include "vastree/external_scorer.hpp"
#include "vastree/image_io.hpp"
#include "vastree/prompt.hpp"
#include "vastree/tree_io.hpp"

using nlohmann::json;
using namespace vastree;

namespace {

// The stack must carry the image plus a prompt channel drawn at the query.
std::string check_stack(const std::vector<ImageGrid>& ch, const json& query) {
  if (ch.size() != 6) return "expected 6 channels, got " + std::to_string(ch.size());
  std::optional<WorldPoint> q;
  if (!query.is_null()) q = WorldPoint{query[0].get<double>(), query[1].get<double>()};
  const ImageGrid expect = prompt::prompt_channel(q, ch[1].height(), ch[1].width());
  for (std::size_t i = 0; i < expect.data().size(); ++i)
    if (std::abs(expect.data()[i] - ch[1].data()[i]) > 1e-6) return "prompt channel does not match query";
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "";
  if (mode == "silent") return 3;
  std::cout << json{{"protocol", mode == "bad-protocol" ? "vastree-scorer/0" : decode::kScorerProtocol}}.dump()
            << std::endl;

  std::optional<decode::ExactOracle> oracle;
  if (mode == "exact") {
    if (argc < 3) return 64;
    const Profile profile = argc > 3 ? parse_profile(argv[3]) : Profile::SSA;
    oracle.emplace(load_tree(argv[2]), profile);
  }

  std::string line;
  while (std::getline(std::cin, line)) {
    const json req = json::parse(line);
    const auto id = req.at("id").get<std::size_t>();
    if (mode == "crash") return 1;
    if (mode == "error") {
      std::cout << json{{"id", id}, {"error", "model not loaded"}}.dump() << std::endl;
      continue;
    }
    const auto n = req.at("keypoints").size();
    const auto k = req.at("k_classes").get<std::size_t>();
    json resp;
    resp["id"] = mode == "wrong-id" ? id + 1 : id;
    if (mode == "exact") {
      const auto channels = io::decode_f32_stack(read_text_file(req.at("stack").at("path").get<std::string>()));
      if (const std::string err = check_stack(channels, req.at("query")); !err.empty()) {
        std::cout << json{{"id", id}, {"error", err}}.dump() << std::endl;
        continue;
      }
      std::vector<WorldPoint> pts;
      for (const auto& p : req.at("keypoints")) pts.push_back({p[0].get<double>(), p[1].get<double>()});
      std::optional<WorldPoint> q;
      if (!req.at("query").is_null()) q = WorldPoint{req["query"][0].get<double>(), req["query"][1].get<double>()};
      const prompt::StackBuilder stacks(channels[0]);
      const auto s = oracle->score(stacks, KeypointSet::in_order(pts), q);
      resp["selection"] = s.selection;
      resp["topology_logits"] = s.topology_logits;
    } else {
      resp["selection"] = std::vector<double>(mode == "wrong-shape" ? n - 1 : n, 0.0);
      resp["topology_logits"] = std::vector<std::vector<double>>(n, std::vector<double>(k, 0.0));
    }
    std::cout << resp.dump() << std::endl;
  }
  return 0;
}
