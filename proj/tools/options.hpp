#pragma once

// Ties each CLI11 option to a config-file key of the same name, so a value
// can come from (in order of precedence) the command line, the --config
// JSON file, or the built-in default, and the resolved set can be echoed.

#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace vastree::cli {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class BoundOptions {
 public:
  explicit BoundOptions(CLI::App* app) : app_(app) {}

  /// `semantic` = false keeps the option out of the resolved config (output
  /// locations, parallelism), so reruns into another directory compare equal.
  template <class T>
  CLI::Option* add(const std::string& key, T& var, const std::string& help, bool semantic = true) {
    CLI::Option* opt = app_->add_option("--" + key, var, help)->capture_default_str();
    entries_.push_back({key, opt, semantic,
                        [&var, key](const nlohmann::json& v) {
                          try {
                            var = v.get<T>();
                          } catch (const nlohmann::json::exception&) {
                            throw UsageError("config key '" + key + "' has the wrong type");
                          }
                        },
                        [&var] { return nlohmann::ordered_json(var); }});
    return opt;
  }

  CLI::Option* flag(const std::string& key, bool& var, const std::string& help) {
    CLI::Option* opt = app_->add_flag("--" + key, var, help);
    entries_.push_back({key, opt, true,
                        [&var, key](const nlohmann::json& v) {
                          if (!v.is_boolean()) throw UsageError("config key '" + key + "' must be a boolean");
                          var = v.get<bool>();
                        },
                        [&var] { return nlohmann::ordered_json(var); }});
    return opt;
  }

  /// Fills options not given on the command line from `section`; unknown
  /// keys are a usage error.
  void apply(const nlohmann::json& section) const {
    if (!section.is_object()) throw UsageError("config section must be a JSON object");
    for (const auto& [key, value] : section.items()) {
      // resolved configs name their subcommand; replaying one elsewhere is a mistake
      if (key == "command") {
        if (value != app_->get_name())
          throw UsageError("config was resolved for '" + value.dump() + "', not " + app_->get_name());
        continue;
      }
      const Entry* e = find(key);
      if (e == nullptr) throw UsageError("unknown config key '" + key + "' for " + app_->get_name());
      if (e->opt->count() == 0) e->set(value);
    }
  }

  nlohmann::ordered_json resolved() const {
    nlohmann::ordered_json j;
    j["command"] = app_->get_name();
    for (const auto& e : entries_)
      if (e.semantic) j[e.key] = e.get();
    return j;
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* opt;
    bool semantic;
    std::function<void(const nlohmann::json&)> set;
    std::function<nlohmann::ordered_json()> get;
  };

  const Entry* find(const std::string& key) const {
    for (const auto& e : entries_)
      if (e.key == key) return &e;
    return nullptr;
  }

  CLI::App* app_;
  std::vector<Entry> entries_;
};

}  // namespace vastree::cli
