#ifndef PERCO_CLI_HPP
#define PERCO_CLI_HPP

#include <json.hpp>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace perco::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kGuardRefusal = 3, kStatisticalFailure = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

const std::vector<std::string>& commands();

enum class KeyType { integer, real, text, boolean, int_list, real_list };

struct KeyInfo {
  std::string name;
  KeyType type;
  Json fallback;
  std::string help;
};

/// The documented keys, in serialization order.
const std::vector<KeyInfo>& schema();

/// Flat key/value configuration of one run. Every schema key is present once
/// resolved; unknown keys are rejected.
class RunConfig {
 public:
  /// Defaults for `command` (some keys have per-command defaults).
  static RunConfig defaults(const std::string& command);
  /// Throws ConfigError on unknown keys, wrong types or a schema mismatch.
  static RunConfig from_json(const Json& j);

  Json to_json() const { return data_; }
  /// to_json without the keys that cannot change any output (out, workers).
  Json result_config() const;

  const std::string& command() const;
  void set(const std::string& key, const Json& value);
  /// Parses a flag value according to the key's type.
  void set_text(const std::string& key, const std::string& text);

  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  std::string text(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<int> ints(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;

  /// Range checks of the documented knobs; throws ConfigError.
  void validate() const;

 private:
  Json data_ = Json::object();
};

/// Executes the resolved configuration, writing outputs and the manifest into
/// the `out` directory. Returns an ExitCode.
int execute(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Re-runs a manifest and compares output checksums.
int replay(const std::string& manifest_path, const std::string& out_dir, int workers, std::ostream& out,
           std::ostream& err);

/// Full command line front end, argv[0] included.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace perco::cli

#endif
