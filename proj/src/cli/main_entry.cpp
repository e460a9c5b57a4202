#include <map>

#include "CLI11.hpp"
#include "steer/cli/app.hpp"
#include "steer/error.hpp"

namespace steer::cli {

int main_entry(int argc, const char* const* argv, std::ostream& log, std::ostream& err) {
  CLI::App app{"Steerable CNN denoising and reconstruction experiments", "steer-recon"};
  std::string command;
  std::vector<std::string> extra;
  std::string config_path;
  app.add_option("command", command,
                 "denoise | reconstruct | mlem | assisted | generalize | phantom | basis | audit | metrics");
  app.add_option("target", extra, "phantom: brain | derenzo; basis: dump");
  app.add_option("--config", config_path, "key = value configuration file");
  std::map<std::string, std::string> values;
  const ExperimentConfig defaults;
  for (const auto& key : config_keys())
    if (key != "command") app.add_option("--" + key, values[key], "default: " + get_value(defaults, key));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, log, err);
  }

  try {
    std::vector<std::pair<std::string, std::string>> flags;
    if (!command.empty()) flags.emplace_back("command", command);
    for (const auto& key : config_keys())
      if (key != "command" && app.get_option("--" + key)->count() > 0) flags.emplace_back(key, values[key]);
    if (!extra.empty()) {
      if (command == "phantom" && extra.size() == 1) {
        flags.emplace_back("phantom", extra.front());
      } else if (!(command == "basis" && extra.size() == 1 && extra.front() == "dump")) {
        throw Error(ErrorKind::InvalidArgument, "unexpected argument '" + extra.front() + "' for " +
                                                    (command.empty() ? std::string("(no subcommand)") : command));
      }
    }
    const auto config = resolve(load_config(config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path), flags));
    run(config, log);
    return 0;
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error [internal]: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace steer::cli
