#include "vastree/external_scorer.hpp"

#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "vastree/image_io.hpp"
#include "vastree/tree_io.hpp"

namespace vastree::decode {

using nlohmann::json;

namespace {

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

void ignore_sigpipe() {
  struct sigaction current {};
  if (sigaction(SIGPIPE, nullptr, &current) == 0 && current.sa_handler == SIG_DFL)
    std::signal(SIGPIPE, SIG_IGN);
}

}  // namespace

ExternalScorer::ExternalScorer(const std::string& command, Profile profile,
                               std::filesystem::path scratch_dir)
    : profile_(profile), scratch_dir_(std::move(scratch_dir)) {
  ignore_sigpipe();
  int in_pipe[2];
  int out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw ScorerError(sys_error("pipe"));
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw ScorerError(sys_error("pipe"));
  }
  pid_ = fork();
  if (pid_ < 0) throw ScorerError(sys_error("fork"));
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];

  std::string hello;
  try {
    hello = read_line();
  } catch (const ScorerError& e) {
    shutdown();
    throw ScorerError(std::string("scorer handshake failed: ") + e.what());
  }
  std::string version;
  try {
    version = json::parse(hello).at("protocol").get<std::string>();
  } catch (const std::exception&) {
    version = "<unparseable: " + hello + ">";
  }
  if (version != kScorerProtocol) {
    shutdown();
    throw ScorerError("scorer announced protocol " + version + ", expected " + kScorerProtocol);
  }
}

ExternalScorer::~ExternalScorer() { shutdown(); }

void ExternalScorer::shutdown() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string ExternalScorer::read_line() const {
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[4096];
    const ssize_t got = read(from_child_, chunk, sizeof chunk);
    if (got < 0 && errno == EINTR) continue;
    if (got < 0) throw ScorerError(sys_error("reading from scorer"));
    if (got == 0) throw ScorerError("scorer closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(got));
  }
}

void ExternalScorer::write_line(const std::string& line) const {
  const std::string data = line + "\n";
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = write(to_child_, data.data() + sent, data.size() - sent);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) throw ScorerError(sys_error("writing to scorer"));
    sent += static_cast<std::size_t>(n);
  }
}

StepScore ExternalScorer::score(const prompt::StackBuilder& stacks, const KeypointSet& keypoints,
                                std::optional<WorldPoint> query) const {
  std::lock_guard lock(mutex_);
  if (to_child_ < 0) throw ScorerError("scorer is not running");
  const std::size_t id = next_id_++;
  const auto path = scratch_dir_ / ("vastree_stack_" + std::to_string(getpid()) + "_" +
                                    std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "_" +
                                    std::to_string(id) + ".f32");
  write_file_atomic(path, io::encode_f32_stack(stacks.build(query).channels));
  struct Cleanup {
    std::filesystem::path p;
    ~Cleanup() {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
  } cleanup{path};

  json req;
  req["id"] = id;
  req["stack"] = {{"path", path.string()}};
  json pts = json::array();
  for (const auto& p : keypoints.points()) pts.push_back({p.x, p.y});
  req["keypoints"] = std::move(pts);
  req["query"] = query ? json{query->x, query->y} : json(nullptr);
  const int k = topology_classes(profile_);
  req["k_classes"] = k;
  write_line(req.dump());

  const std::string line = read_line();
  json resp;
  try {
    resp = json::parse(line);
  } catch (const json::exception& e) {
    throw ScorerError(std::string("malformed scorer response: ") + e.what());
  }
  if (!resp.is_object() || !resp.contains("id") || resp["id"] != id)
    throw ScorerError("scorer response id does not match request " + std::to_string(id));
  if (resp.contains("error"))
    throw ScorerError("scorer error: " + resp["error"].dump());
  StepScore s;
  try {
    s.selection = resp.at("selection").get<std::vector<double>>();
    s.topology_logits = resp.at("topology_logits").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw ScorerError(std::string("scorer response fields: ") + e.what());
  }
  if (s.selection.size() != keypoints.size() || s.topology_logits.size() != keypoints.size())
    throw ScorerError("scorer returned " + std::to_string(s.selection.size()) + " scores for " +
                      std::to_string(keypoints.size()) + " keypoints");
  for (const auto& row : s.topology_logits)
    if (row.size() != static_cast<std::size_t>(k))
      throw ScorerError("scorer topology row has " + std::to_string(row.size()) +
                        " classes, expected " + std::to_string(k));
  return s;
}

}  // namespace vastree::decode
