// vastree command-line front end.
//
// Exit codes: 0 success, 1 validation / metric failure, 2 generation or
// extraction failure, 64 usage error.

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "options.hpp"
#include "vastree/baseline.hpp"
#include "vastree/dataset.hpp"
#include "vastree/decode.hpp"
#include "vastree/external_scorer.hpp"
#include "vastree/image_io.hpp"
#include "vastree/metrics.hpp"
#include "vastree/tree_io.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace vastree::cli {
namespace {

constexpr int kExitValidation = 1;
constexpr int kExitFailure = 2;
constexpr int kExitUsage = 64;

std::uint64_t default_seed() {
  const char* env = std::getenv("VASTREE_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("VASTREE_SEED is not an unsigned integer: ") + env);
  }
}

std::string case_file(const char* stem, std::size_t index, const char* ext) {
  return std::string(stem) + "_" + std::to_string(index) + ext;
}

void write_config(const fs::path& path, const BoundOptions& opts) {
  write_file_atomic(path, opts.resolved().dump(2) + "\n");
}

/// Config echo for single-file outputs: "<out>.config.json".
fs::path config_beside(const fs::path& out) {
  return out.parent_path() / (out.filename().string() + ".config.json");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ParseError("cannot create directory " + dir.string() + ": " + ec.message());
}

/// Case indices listed in a dataset manifest.
std::vector<std::size_t> manifest_cases(const fs::path& dir) {
  const auto text = read_text_file(dir / "manifest.json");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest.json: " + std::string(e.what()));
  }
  std::vector<std::size_t> out;
  for (const auto& c : m.at("cases")) out.push_back(c.at("index").get<std::size_t>());
  return out;
}

// ---------------------------------------------------------------------------
// Shared option groups


struct RenderOptions {
  int size = 250;
  double noise_amplitude = 0.15;
  int noise_octaves = 4;
  double noise_frequency = 8.0;

  void bind(BoundOptions& b) {
    b.add("size", size, "image height and width in pixels");
    b.add("noise-amplitude", noise_amplitude, "Perlin noise amplitude (0 disables noise)");
    b.add("noise-octaves", noise_octaves, "Perlin noise octaves");
    b.add("noise-frequency", noise_frequency, "lattice cells across the image, coarsest octave");
  }
  render::RenderConfig config(std::uint64_t noise_seed) const {
    render::RenderConfig rc;
    rc.height = rc.width = size;
    rc.noise_amplitude = noise_amplitude;
    rc.noise_octaves = noise_octaves;
    rc.noise_base_frequency = noise_frequency;
    rc.noise_seed = noise_seed;
    rc.validate();
    return rc;
  }
};

struct DecodeOptions {
  std::string scorer = "exact";
  std::string profile = "ssa";
  double gamma = 1.0;
  int n_dec = 1;
  std::uint64_t seed = 0;
  double eta = 2.0;
  std::uint64_t oracle_seed = 0;
  std::string rule = "topk";
  double threshold = 0.5;

  // The sweep supplies gamma and n_dec from its grid.
  void bind(BoundOptions& b, bool sampling = true) {
    b.add("scorer", scorer, "exact | noisy | heuristic | cmd:<shell command>");
    b.add("profile", profile, "dataset profile: ssa | vrm");
    if (sampling) {
      b.add("gamma", gamma, "topology temperature (> 0)");
      b.add("n-dec", n_dec, "number of stochastic decodings to merge");
    }
    b.add("seed", seed, "sampling seed (default: $VASTREE_SEED or 0)");
    b.add("eta", eta, "noise std of the noisy oracle");
    b.add("oracle-seed", oracle_seed, "noise seed of the noisy oracle");
    b.add("rule", rule, "child selection: topk | threshold");
    b.add("threshold", threshold, "selection threshold for --rule threshold");
  }

  decode::SamplingParams params(std::uint64_t seed_offset = 0) const {
    decode::SamplingParams p;
    p.gamma = gamma;
    p.n_dec = n_dec;
    p.seed = seed + seed_offset;
    p.profile = parse_profile(profile);
    if (rule == "topk") {
      p.rule = decode::SelectionRule::TopK;
    } else if (rule == "threshold") {
      p.rule = decode::SelectionRule::Threshold;
    } else {
      throw UsageError("--rule must be topk or threshold");
    }
    p.selection_threshold = threshold;
    p.validate();
    return p;
  }

  bool needs_tree() const { return scorer == "exact" || scorer == "noisy"; }

  void check() const {
    if (!needs_tree() && scorer != "heuristic" && !scorer.starts_with("cmd:"))
      throw UsageError("unknown --scorer '" + scorer + "'");
    if (scorer == "cmd:") throw UsageError("--scorer cmd: needs a command");
  }

  std::unique_ptr<decode::StepScorer> make(const std::optional<Tree>& gt,
                                           std::uint64_t noise_offset) const {
    const Profile prof = parse_profile(profile);
    if (scorer == "exact") return std::make_unique<decode::ExactOracle>(*gt, prof);
    if (scorer == "noisy")
      return std::make_unique<decode::NoisyOracle>(*gt, prof, eta, oracle_seed + noise_offset);
    if (scorer == "heuristic") return std::make_unique<decode::HeuristicScorer>(prof);
    return std::make_unique<decode::ExternalScorer>(scorer.substr(4), prof);
  }
};

struct Extracted {
  Tree tree;
  bool truncated = false;
  std::size_t scorer_calls = 0;
};

Extracted run_extract(const decode::StepScorer& scorer, ImageGrid image, const KeypointFile& kp,
                      const decode::SamplingParams& params) {
  if (!kp.root) throw ParameterError("keypoint file does not name a root");
  if (*kp.root >= kp.keypoints.size()) throw ParameterError("keypoint root index out of range");
  const prompt::StackBuilder stacks(std::move(image));
  decode::ScoreCache cache(scorer, stacks, kp.keypoints, params.profile);
  decode::DecodeRun run = decode::stochastic_decode(cache, *kp.root, params);
  return {std::move(run.merged), run.any_truncated, cache.scorer_calls()};
}

/// Runs `body(index)` for every case, in parallel unless `serial`; returns
/// the per-case error messages (empty when all succeeded).
template <class F>
std::vector<std::string> for_cases(const std::vector<std::size_t>& cases, bool serial, F body) {
  std::vector<std::string> errors(cases.size());
  const auto n = static_cast<std::ptrdiff_t>(cases.size());
#pragma omp parallel for schedule(dynamic) if (!serial)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(cases[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  return errors;
}

int report_case_errors(const std::vector<std::size_t>& cases, const std::vector<std::string>& errors) {
  int failed = 0;
  for (std::size_t i = 0; i < cases.size(); ++i)
    if (!errors[i].empty()) {
      std::cerr << "case " << cases[i] << ": " << errors[i] << "\n";
      ++failed;
    }
  return failed == 0 ? 0 : kExitFailure;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateCmd {
  int count = 200;
  std::uint64_t seed = 0;
  std::string out;
  bool slab = false;
  RenderOptions render;
  int attractors = 400;
  double attraction_radius = 0.15;
  double kill_radius = 0.03;
  double step_size = 0.015;
  double terminal_radius = 0.004;
  double slab_depth = 0.2;
  int max_nodes = 2000;

  void bind(BoundOptions& b) {
    b.add("count", count, "number of cases");
    b.add("seed", seed, "base seed (default: $VASTREE_SEED or 0)");
    b.add("out", out, "output directory", false)->required();
    b.flag("slab", slab, "grow in a 3D slab and project (crossing branches)");
    render.bind(b);
    b.add("attractors", attractors, "attractor points per tree");
    b.add("attraction-radius", attraction_radius, "attractor influence radius (world units)");
    b.add("kill-radius", kill_radius, "attractor removal radius (world units)");
    b.add("step-size", step_size, "growth step (world units)");
    b.add("terminal-radius", terminal_radius, "leaf vessel radius (world units)");
    b.add("slab-depth", slab_depth, "slab thickness (world units)");
    b.add("max-nodes", max_nodes, "cap on raw growth nodes");
  }

  int run(const BoundOptions& opts) const {
    if (count < 0) throw UsageError("--count must be >= 0");
    dataset::CaseConfig cfg;
    cfg.growth.seed = seed;
    cfg.growth.slab_mode = slab;
    cfg.growth.n_attractors = attractors;
    cfg.growth.attraction_radius = attraction_radius;
    cfg.growth.kill_radius = kill_radius;
    cfg.growth.step_size = step_size;
    cfg.growth.terminal_radius = terminal_radius;
    cfg.growth.slab_depth = slab_depth;
    cfg.growth.max_nodes = max_nodes;
    cfg.growth.validate();
    cfg.render = render.config(0);
    const fs::path dir(out);
    ensure_dir(dir);

    std::vector<std::size_t> indices(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    std::vector<std::optional<ordered_json>> entries(indices.size());
    const auto errors = for_cases(indices, false, [&](std::size_t i) {
      const dataset::Case c = dataset::make_case(cfg, i);
      const std::map<std::string, std::pair<std::string, std::string>> files{
          {"tree", {case_file("tree", i, ".json"), write_tree_json(c.tree)}},
          {"image_f32", {case_file("image", i, ".f32"), io::encode_f32(c.image)}},
          {"image_png", {case_file("image", i, ".png"), io::encode_png16(c.image)}},
          {"keypoints", {case_file("keypoints", i, ".json"), write_keypoints_json(c.keypoints, c.root_keypoint)}},
      };
      ordered_json e;
      e["index"] = i;
      e["seed"] = c.seed;
      e["attempts"] = c.attempts;
      e["nodes"] = c.tree.nodes.size();
      e["edges"] = c.tree.edges.size();
      e["has_crossing"] = c.has_crossing;
      for (const auto& [role, f] : files) {
        write_file_atomic(dir / f.first, f.second);
        e["files"][role] = {{"name", f.first}, {"sha256", sha256_hex(f.second)}};
      }
      entries[i] = std::move(e);
    });

    ordered_json manifest;
    manifest["format"] = "vastree-dataset/1";
    manifest["profile"] = slab ? "slab" : "ssa";
    manifest["base_seed"] = seed;
    manifest["height"] = render.size;
    manifest["width"] = render.size;
    manifest["count"] = count;
    manifest["cases"] = ordered_json::array();
    manifest["failures"] = ordered_json::array();
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (entries[i]) manifest["cases"].push_back(*entries[i]);
      if (!errors[i].empty()) manifest["failures"].push_back({{"index", i}, {"error", errors[i]}});
    }
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    write_config(dir / "config.json", opts);
    return report_case_errors(indices, errors);
  }
};

// ---------------------------------------------------------------------------
// render

struct RenderCmd {
  std::string tree;
  std::string out;
  std::uint64_t noise_seed = 0;
  RenderOptions render;

  void bind(BoundOptions& b) {
    b.add("tree", tree, "input tree JSON")->required();
    b.add("out", out, "output image (.png or .f32)", false)->required();
    b.add("noise-seed", noise_seed, "Perlin noise seed");
    render.bind(b);
  }

  int run(const BoundOptions& opts) const {
    const Tree t = load_tree(tree);
    const auto rc = render.config(noise_seed);
    io::save_image(out, render::add_perlin(render::render_tree(t, rc), rc));
    write_config(config_beside(out), opts);
    return 0;
  }
};

// ---------------------------------------------------------------------------
// extract

struct ExtractCmd {
  std::string image;
  std::string keypoints;
  std::string tree;
  std::string dataset;
  std::string out;
  std::string report;
  DecodeOptions decode;

  void bind(BoundOptions& b) {
    b.add("image", image, "input image (.f32 or .png)");
    b.add("keypoints", keypoints, "keypoint JSON with root index");
    b.add("tree", tree, "hidden ground-truth tree for exact/noisy scorers");
    b.add("dataset", dataset, "process every case of a generated dataset", false);
    b.add("out", out, "output tree JSON (directory with --dataset)", false)->required();
    b.add("report", report, "optional JSON decode report", false);
    decode.bind(b);
  }

  int run(const BoundOptions& opts) const {
    decode.check();
    if (!dataset.empty()) return run_dataset(opts);
    if (image.empty() || keypoints.empty()) throw UsageError("extract needs --image and --keypoints (or --dataset)");
    if (decode.needs_tree() && tree.empty()) throw UsageError("--scorer " + decode.scorer + " needs --tree");
    std::optional<Tree> gt;
    if (!tree.empty()) gt = load_tree(tree);
    const auto scorer = decode.make(gt, 0);
    const Extracted ex = run_extract(*scorer, io::load_image(image), load_keypoints(keypoints), decode.params());
    save_tree(out, ex.tree);
    if (!report.empty()) {
      ordered_json r;
      r["truncated"] = ex.truncated;
      r["scorer_calls"] = ex.scorer_calls;
      r["nodes"] = ex.tree.nodes.size();
      write_file_atomic(report, r.dump(2) + "\n");
    }
    write_config(config_beside(out), opts);
    return 0;
  }

  int run_dataset(const BoundOptions& opts) const {
    const fs::path in(dataset);
    const fs::path dir(out);
    ensure_dir(dir);
    const auto cases = manifest_cases(in);
    decode.params();
    const bool serial = decode.scorer.starts_with("cmd:");
    std::shared_ptr<decode::StepScorer> shared;
    if (serial) shared = decode.make(std::nullopt, 0);
    const auto errors = for_cases(cases, serial, [&](std::size_t i) {
      std::optional<Tree> gt;
      if (decode.needs_tree()) gt = load_tree(in / case_file("tree", i, ".json"));
      std::unique_ptr<decode::StepScorer> own;
      if (!shared) own = decode.make(gt, i);
      const decode::StepScorer& scorer = shared ? *shared : *own;
      const Extracted ex = run_extract(scorer, io::load_image(in / case_file("image", i, ".f32")),
                                       load_keypoints(in / case_file("keypoints", i, ".json")),
                                       decode.params(i));
      save_tree(dir / case_file("tree", i, ".json"), ex.tree);
    });
    write_config(dir / "config.json", opts);
    return report_case_errors(cases, errors);
  }
};

// ---------------------------------------------------------------------------
// baseline

struct BaselineCmd {
  std::string tree;
  std::string dataset;
  std::string out;
  int size = 250;

  void bind(BoundOptions& b) {
    b.add("tree", tree, "ground-truth tree (mask, root and leaves are derived from it)");
    b.add("dataset", dataset, "process every case of a generated dataset", false);
    b.add("out", out, "output tree JSON (directory with --dataset)", false)->required();
    b.add("size", size, "render size in pixels");
  }

  render::RenderConfig config() const {
    render::RenderConfig rc;
    rc.height = rc.width = size;
    rc.validate();
    return rc;
  }

  int run(const BoundOptions& opts) const {
    if (dataset.empty()) {
      if (tree.empty()) throw UsageError("baseline needs --tree (or --dataset)");
      save_tree(out, baseline::run_baseline(load_tree(tree), config()).tree);
      write_config(config_beside(out), opts);
      return 0;
    }
    const fs::path in(dataset);
    const fs::path dir(out);
    ensure_dir(dir);
    const auto cases = manifest_cases(in);
    const auto rc = config();
    const auto errors = for_cases(cases, false, [&](std::size_t i) {
      const auto res = baseline::run_baseline(load_tree(in / case_file("tree", i, ".json")), rc);
      save_tree(dir / case_file("tree", i, ".json"), res.tree);
    });
    write_config(dir / "config.json", opts);
    return report_case_errors(cases, errors);
  }
};

// ---------------------------------------------------------------------------
// eval

struct EvalCmd {
  std::string pred;
  std::string gt;
  std::string out;
  int size = 250;

  void bind(BoundOptions& b) {
    b.add("pred", pred, "directory of predicted tree_*.json", false)->required();
    b.add("gt", gt, "directory of ground-truth tree_*.json", false)->required();
    b.add("out", out, "report directory (report.csv, report.json)", false)->required();
    b.add("size", size, "image size in pixels");
  }

  int run(const BoundOptions& opts) const {
    const auto rep = metrics::evaluate_dataset(pred, gt, size, size);
    const fs::path dir(out);
    ensure_dir(dir);
    write_file_atomic(dir / "report.csv", rep.csv());
    write_file_atomic(dir / "report.json", rep.json());
    write_config(dir / "config.json", opts);
    std::cout << "n=" << rep.cases.size() << " mean_hd=" << format_double(rep.mean_hd)
              << " mean_cd=" << format_double(rep.mean_cd) << " failures=" << rep.failures.size()
              << "\n";
    for (const auto& f : rep.failures) std::cerr << f.case_id << ": " << f.reason << "\n";
    return rep.failures.empty() ? 0 : kExitValidation;
  }
};

// ---------------------------------------------------------------------------
// sweep

struct SweepCmd {
  std::string dataset;
  std::string out;
  std::vector<double> gammas{1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
  std::vector<int> n_decs{1, 5, 10, 20};
  int limit = 0;
  DecodeOptions decode;
  std::vector<CLI::Option*> grid_opts;

  void bind(BoundOptions& b) {
    b.add("dataset", dataset, "generated dataset directory")->required();
    b.add("out", out, "output directory (sweep.csv, checkpoint)", false)->required();
    grid_opts.push_back(b.add("gammas", gammas, "topology temperatures")->delimiter(','));
    grid_opts.push_back(b.add("n-decs", n_decs, "numbers of stochastic decodings")->delimiter(','));
    b.add("limit", limit, "use only the first N cases (0 = all)");
    decode.bind(b, false);
  }

  static std::string cell_key(double g, int n) { return format_double(g) + "/" + std::to_string(n); }

  int run(const BoundOptions& opts) const {
    decode.check();
    // `--gammas ""` arrives as a single empty token rather than no values.
    const bool blank = std::ranges::any_of(grid_opts, [](const CLI::Option* o) {
      const auto& r = o->results();
      return o->count() > 0 && std::ranges::all_of(r, [](const std::string& v) { return v.empty(); });
    });
    if (blank || gammas.empty() || n_decs.empty()) throw UsageError("sweep grid is empty");
    for (double g : gammas)
      for (int n : n_decs) {
        DecodeOptions cell = decode;
        cell.gamma = g;
        cell.n_dec = n;
        cell.params();
      }
    const fs::path in(dataset);
    const fs::path dir(out);
    ensure_dir(dir);
    auto cases = manifest_cases(in);
    if (limit > 0 && cases.size() > static_cast<std::size_t>(limit)) cases.resize(static_cast<std::size_t>(limit));

    // The checkpoint is only reused when it was produced by the same settings.
    ordered_json settings = opts.resolved();
    settings["cases"] = cases.size();
    const std::string signature = sha256_hex(settings.dump());
    const fs::path ckpt_path = dir / "sweep.checkpoint.json";
    ordered_json ckpt{{"signature", signature}, {"cells", ordered_json::object()}};
    if (fs::exists(ckpt_path)) {
      try {
        auto prev = ordered_json::parse(read_text_file(ckpt_path));
        if (prev.at("signature") == signature) ckpt = std::move(prev);
      } catch (const std::exception&) {
        std::cerr << "ignoring unreadable checkpoint " << ckpt_path << "\n";
      }
    }

    const bool serial = decode.scorer.starts_with("cmd:");
    std::shared_ptr<decode::StepScorer> shared;
    if (serial) shared = decode.make(std::nullopt, 0);
    const int size = [&] {
      const auto m = nlohmann::json::parse(read_text_file(in / "manifest.json"));
      return m.value("height", 250);
    }();

    int skipped = 0;
    for (double g : gammas)
      for (int n : n_decs) {
        const std::string key = cell_key(g, n);
        if (ckpt["cells"].contains(key)) {
          ++skipped;
          continue;
        }
        DecodeOptions cell = decode;
        cell.gamma = g;
        cell.n_dec = n;
        std::vector<metrics::TreeDistance> dist(cases.size());
        std::vector<std::size_t> slots(cases.size());
        for (std::size_t s = 0; s < slots.size(); ++s) slots[s] = s;
        const auto errors = for_cases(slots, serial, [&](std::size_t s) {
          const std::size_t i = cases[s];
          const Tree gt = load_tree(in / case_file("tree", i, ".json"));
          std::unique_ptr<decode::StepScorer> own;
          if (!shared) own = cell.make(gt, i);
          const Extracted ex = run_extract(shared ? *shared : *own,
                                           io::load_image(in / case_file("image", i, ".f32")),
                                           load_keypoints(in / case_file("keypoints", i, ".json")),
                                           cell.params(i));
          dist[s] = metrics::compare_trees(ex.tree, gt, size, size);
        });
        if (const int rc = report_case_errors(cases, errors); rc != 0) return rc;
        double hd = 0.0;
        double cd = 0.0;
        for (const auto& d : dist) {
          hd += d.hd_px;
          cd += d.cd_px2;
        }
        const double denom = std::max<double>(1.0, static_cast<double>(dist.size()));
        ckpt["cells"][key] = {{"gamma", g}, {"n_dec", n}, {"mean_hd", hd / denom},
                              {"mean_cd", cd / denom}, {"n", dist.size()}};
        write_file_atomic(ckpt_path, ckpt.dump(2) + "\n");
      }
    if (skipped > 0) std::cerr << "resumed: " << skipped << " cell(s) taken from checkpoint\n";

    std::ostringstream csv;
    csv << "gamma,n_dec,mean_hd,mean_cd,n\n";
    for (double g : gammas)
      for (int n : n_decs) {
        const auto& c = ckpt["cells"][cell_key(g, n)];
        csv << format_double(g) << ',' << n << ',' << format_double(c["mean_hd"].get<double>()) << ','
            << format_double(c["mean_cd"].get<double>()) << ',' << c["n"].get<std::size_t>() << '\n';
      }
    write_file_atomic(dir / "sweep.csv", csv.str());
    write_config(dir / "config.json", opts);
    return 0;
  }
};

// ---------------------------------------------------------------------------
// overlay

struct OverlayCmd {
  std::string image;
  std::string tree;
  std::string out;
  int marker = 2;

  void bind(BoundOptions& b) {
    b.add("image", image, "input image (.f32 or .png)")->required();
    b.add("tree", tree, "tree JSON to draw")->required();
    b.add("out", out, "output PNG", false)->required();
    b.add("marker", marker, "node marker half-width in pixels");
  }

  static void line(ImageGrid& img, PixelIndex a, PixelIndex b, double value) {
    // Bresenham
    int r = a.row;
    int c = a.col;
    const int dr = std::abs(b.row - a.row);
    const int dc = std::abs(b.col - a.col);
    const int sr = a.row < b.row ? 1 : -1;
    const int sc = a.col < b.col ? 1 : -1;
    int err = dc - dr;
    while (true) {
      if (img.contains(r, c)) img(r, c) = value;
      if (r == b.row && c == b.col) break;
      const int e2 = 2 * err;
      if (e2 > -dr) {
        err -= dr;
        c += sc;
      }
      if (e2 < dc) {
        err += dc;
        r += sr;
      }
    }
  }

  int run(const BoundOptions& opts) const {
    ImageGrid img = io::load_image(image);
    const Tree t = load_tree(tree);
    const int h = img.height();
    const int w = img.width();
    constexpr double kInk = 1.5;
    if (!t.edges.empty()) {
      for (std::size_t e = 0; e < t.edges.size(); ++e) {
        const auto poly = t.edge_polyline(e);
        for (std::size_t k = 1; k < poly.size(); ++k)
          line(img, world_to_pixel(poly[k - 1], h, w), world_to_pixel(poly[k], h, w), kInk);
      }
      for (const auto& n : t.nodes) {
        const PixelIndex p = world_to_pixel(n.pos, h, w);
        for (int dr = -marker; dr <= marker; ++dr)
          for (int dc = -marker; dc <= marker; ++dc)
            if ((std::abs(dr) == marker || std::abs(dc) == marker) && img.contains(p.row + dr, p.col + dc))
              img(p.row + dr, p.col + dc) = kInk;
      }
    }
    io::save_image(out, img);
    write_config(config_beside(out), opts);
    return 0;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"vastree: synthetic vascular trees, recursive tree decoding, baseline and metrics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vastree 0.1.0");
  std::string config_path;
  int jobs = 0;
  app.add_option("--config", config_path, "JSON config file (flags override it)");
  app.add_option("--jobs", jobs, "worker threads (0 = OpenMP default)");

  const std::uint64_t seed0 = default_seed();
  GenerateCmd gen;
  gen.seed = seed0;
  RenderCmd ren;
  ExtractCmd ext;
  ext.decode.seed = seed0;
  BaselineCmd bas;
  EvalCmd ev;
  SweepCmd sw;
  sw.decode.seed = seed0;
  sw.decode.scorer = "noisy";
  OverlayCmd ov;

  CLI::App* s_gen = app.add_subcommand("generate", "grow trees, render images, write a dataset");
  CLI::App* s_ren = app.add_subcommand("render", "render one tree to an image");
  CLI::App* s_ext = app.add_subcommand("extract", "decode a tree from image + keypoints");
  CLI::App* s_bas = app.add_subcommand("baseline", "minimal-cost-path baseline extraction");
  CLI::App* s_ev = app.add_subcommand("eval", "Chamfer / Hausdorff evaluation of predictions");
  CLI::App* s_sw = app.add_subcommand("sweep", "gamma x n_dec sensitivity grid");
  CLI::App* s_ov = app.add_subcommand("overlay", "draw a tree over an image");
  BoundOptions b_gen(s_gen), b_ren(s_ren), b_ext(s_ext), b_bas(s_bas), b_ev(s_ev), b_sw(s_sw), b_ov(s_ov);
  gen.bind(b_gen);
  ren.bind(b_ren);
  ext.bind(b_ext);
  bas.bind(b_bas);
  ev.bind(b_ev);
  sw.bind(b_sw);
  ov.bind(b_ov);
  for (CLI::App* s : {s_gen, s_ren, s_ext, s_bas, s_ev, s_sw, s_ov}) {
    s->add_option("--config", config_path, "JSON config file (flags override it)");
    s->add_option("--jobs", jobs, "worker threads (0 = OpenMP default)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  if (jobs < 0) throw UsageError("--jobs must be >= 0");
  if (jobs > 0) omp_set_num_threads(jobs);

  const std::vector<std::pair<CLI::App*, BoundOptions*>> table{
      {s_gen, &b_gen}, {s_ren, &b_ren}, {s_ext, &b_ext}, {s_bas, &b_bas},
      {s_ev, &b_ev},   {s_sw, &b_sw},   {s_ov, &b_ov}};
  for (const auto& [sub, bound] : table) {
    if (!sub->parsed()) continue;
    if (!config_path.empty()) {
      nlohmann::json cfg;
      try {
        cfg = nlohmann::json::parse(read_text_file(config_path));
      } catch (const nlohmann::json::exception& e) {
        throw UsageError("config " + config_path + ": " + e.what());
      }
      if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
      // Either a flat object or one section per subcommand.
      if (cfg.contains(sub->get_name()) && cfg[sub->get_name()].is_object())
        bound->apply(cfg[sub->get_name()]);
      else
        bound->apply(cfg);
    }
    if (sub == s_gen) return gen.run(*bound);
    if (sub == s_ren) return ren.run(*bound);
    if (sub == s_ext) return ext.run(*bound);
    if (sub == s_bas) return bas.run(*bound);
    if (sub == s_ev) return ev.run(*bound);
    if (sub == s_sw) return sw.run(*bound);
    if (sub == s_ov) return ov.run(*bound);
  }
  return kExitUsage;
}

}  // namespace
}  // namespace vastree::cli

int main(int argc, char** argv) {
  using namespace vastree;
  try {
    return cli::run(argc, argv);
  } catch (const cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const GenerationFailed& e) {
    std::cerr << "generation failed: " << e.what() << "\n";
    return cli::kExitFailure;
  } catch (const DegenerateMask& e) {
    std::cerr << "extraction failed: " << e.what() << "\n";
    return cli::kExitFailure;
  } catch (const ScorerError& e) {
    std::cerr << "scorer failed: " << e.what() << "\n";
    return cli::kExitFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitValidation;
  }
}
