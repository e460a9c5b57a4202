#include "steer/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "steer/error.hpp"

namespace steer::cli {

namespace {

constexpr std::pair<Command, const char*> kCommands[] = {
    {Command::Denoise, "denoise"},     {Command::Reconstruct, "reconstruct"}, {Command::Mlem, "mlem"},
    {Command::Assisted, "assisted"},   {Command::Generalize, "generalize"},   {Command::Phantom, "phantom"},
    {Command::Basis, "basis"},         {Command::Audit, "audit"},             {Command::Metrics, "metrics"},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] void parse_error(const std::string& where, const std::string& key, const std::string& value,
                              const std::string& expected) {
  throw Error(ErrorKind::ConfigParse, where + ": cannot parse '" + value + "' for key '" + key + "' (expected " +
                                          expected + ")");
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value, const std::string& where, T min_value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end || value.empty()) parse_error(where, key, value, "an integer");
  if (out < min_value) parse_error(where, key, value, "an integer >= " + std::to_string(min_value));
  return out;
}

double parse_real(const std::string& key, const std::string& value, const std::string& where, bool positive) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end || value.empty() || !std::isfinite(out)) {
    parse_error(where, key, value, "a finite number");
  }
  if (positive && out <= 0.0) parse_error(where, key, value, "a positive number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value, const std::string& where) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  parse_error(where, key, value, "true or false");
}

std::string parse_choice(const std::string& key, const std::string& value, const std::string& where,
                         const std::vector<const char*>& choices) {
  std::string list;
  for (const char* c : choices) {
    if (value == c) return value;
    list += (list.empty() ? "" : " | ") + std::string(c);
  }
  parse_error(where, key, value, list);
}

std::string format_real(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field integer_field(const char* key, T ExperimentConfig::*member, T min_value) {
  return {key,
          [=](ExperimentConfig& c, const std::string& v, const std::string& w) {
            c.*member = parse_integer<T>(key, v, w, min_value);
          },
          [=](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(const char* key, double ExperimentConfig::*member, bool positive) {
  return {key, [=](ExperimentConfig& c, const std::string& v, const std::string& w) {
            c.*member = parse_real(key, v, w, positive);
          },
          [=](const ExperimentConfig& c) { return format_real(c.*member); }};
}

Field choice_field(const char* key, std::string ExperimentConfig::*member, std::initializer_list<const char*> choices) {
  std::vector<const char*> kept(choices);
  return {key,
          [=](ExperimentConfig& c, const std::string& v, const std::string& w) { c.*member = parse_choice(key, v, w, kept); },
          [=](const ExperimentConfig& c) { return c.*member; }};
}

Field rep_field(const char* key, std::string ExperimentConfig::*member) {
  return {key,
          [=](ExperimentConfig& c, const std::string& v, const std::string& w) {
            if (v == "trivial" || v == "regular") {
              c.*member = v;
              return;
            }
            if (v.rfind("irrep", 0) == 0) {
              parse_integer<int>(key, v.substr(5), w, 0);
              c.*member = v;
              return;
            }
            parse_error(w, key, v, "trivial | regular | irrep<m>");
          },
          [=](const ExperimentConfig& c) { return c.*member; }};
}

Field path_field(const char* key, std::filesystem::path ExperimentConfig::*member) {
  return {key, [=](ExperimentConfig& c, const std::string& v, const std::string&) { c.*member = v; },
          [=](const ExperimentConfig& c) { return (c.*member).string(); }};
}

Field bool_field(const char* key, bool ExperimentConfig::*member) {
  return {key, [=](ExperimentConfig& c, const std::string& v, const std::string& w) {
            c.*member = parse_bool(key, v, w);
          },
          [=](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"command",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         try {
           c.command = parse_command(v);
         } catch (const Error&) {
           parse_error(w, "command", v, "a subcommand name");
         }
       },
       [](const ExperimentConfig& c) { return c.command ? to_string(*c.command) : std::string(); }},
      integer_field("order", &ExperimentConfig::order, 1),
      integer_field("width", &ExperimentConfig::width, std::size_t{1}),
      integer_field("epochs", &ExperimentConfig::epochs, std::size_t{0}),
      integer_field("seed", &ExperimentConfig::seed, std::uint64_t{0}),
      integer_field("seeds", &ExperimentConfig::seeds, std::size_t{1}),
      integer_field("size", &ExperimentConfig::size, std::size_t{4}),
      real_field("pitch", &ExperimentConfig::pitch, true),
      real_field("counts", &ExperimentConfig::counts, true),
      integer_field("angles", &ExperimentConfig::angles, std::size_t{0}),
      integer_field("mlem_iters", &ExperimentConfig::mlem_iters, std::size_t{0}),
      choice_field("phantom", &ExperimentConfig::phantom, {"auto", "brain", "derenzo"}),
      choice_field("network", &ExperimentConfig::network, {"both", "scnn", "cnn"}),
      real_field("lr", &ExperimentConfig::lr, true),
      integer_field("checkpoint_every", &ExperimentConfig::checkpoint_every, std::size_t{1}),
      integer_field("train_images", &ExperimentConfig::train_images, std::size_t{1}),
      integer_field("test_images", &ExperimentConfig::test_images, std::size_t{1}),
      integer_field("test_rotation", &ExperimentConfig::test_rotation, 0),
      rep_field("rep_in", &ExperimentConfig::rep_in),
      rep_field("rep_out", &ExperimentConfig::rep_out),
      integer_field("kernel", &ExperimentConfig::kernel, 1),
      choice_field("grid", &ExperimentConfig::grid, {"auto", "polar", "cartesian"}),
      integer_field("anti_alias", &ExperimentConfig::anti_alias, 1),
      path_field("input", &ExperimentConfig::input),
      path_field("reference", &ExperimentConfig::reference),
      path_field("out", &ExperimentConfig::out),
      bool_field("csv", &ExperimentConfig::csv),
      bool_field("pgm", &ExperimentConfig::pgm),
  };
  return table;
}

const Field& field(const std::string& key, const std::string& where) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw Error(ErrorKind::ConfigUnknownKey, where + ": unknown key '" + key + "'");
}

}  // namespace

std::string to_string(Command command) {
  for (const auto& [c, name] : kCommands)
    if (c == command) return name;
  return "unknown";
}

Command parse_command(const std::string& text) {
  for (const auto& [c, name] : kCommands)
    if (text == name) return c;
  throw Error(ErrorKind::InvalidArgument, "unknown subcommand '" + text + "'");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_value(ExperimentConfig& config, const std::string& key, const std::string& value, const std::string& where) {
  field(key, where).set(config, value, where);
}

std::string get_value(const ExperimentConfig& config, const std::string& key) { return field(key, "get").get(config); }

void apply_text(ExperimentConfig& config, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(number);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::ConfigParse, where + ": expected 'key = value', got '" + line + "'");
    }
    set_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
  }
}

void apply_file(ExperimentConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigMissingFile, "cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  apply_text(config, text.str(), path.string());
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::pair<std::string, std::string>>& flags) {
  ExperimentConfig config;
  if (path) apply_file(config, *path);
  for (const auto& [key, value] : flags) set_value(config, key, value, "flag --" + key);
  return config;
}

ExperimentConfig resolve(ExperimentConfig config) {
  if (!config.command) throw Error(ErrorKind::InvalidArgument, "no subcommand given");
  const Command cmd = *config.command;
  if (config.angles == 0) config.angles = config.size;
  if (config.phantom == "auto") {
    config.phantom = (cmd == Command::Mlem || cmd == Command::Assisted) ? "derenzo" : "brain";
  }
  if (config.grid == "auto") config.grid = (4 % config.order == 0) ? "cartesian" : "polar";
  if (config.grid == "cartesian" && 4 % config.order != 0) {
    throw Error(ErrorKind::Geometry, "grid = cartesian needs the group order to divide 4, got " +
                                         std::to_string(config.order));
  }
  if (config.kernel % 2 == 0) throw Error(ErrorKind::Geometry, "kernel size must be odd");
  if ((cmd == Command::Reconstruct || cmd == Command::Assisted) && config.angles != config.size) {
    throw Error(ErrorKind::Geometry, to_string(cmd) + " needs angles = size so the sinogram matches the image grid (angles " +
                                         std::to_string(config.angles) + ", size " + std::to_string(config.size) + ")");
  }
  if (cmd == Command::Metrics && (config.input.empty() || config.reference.empty())) {
    throw Error(ErrorKind::InvalidArgument, "metrics needs both input and reference images");
  }
  return config;
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace steer::cli
