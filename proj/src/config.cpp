#include "pnp/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "pnp/errors.hpp"
#include "pnp/losses.hpp"

namespace pnp {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T v{};
  const std::string t = trim(text);
  const char* first = t.data();
  const char* last = first + t.size();
  const auto res = std::from_chars(first, last, v);
  if (t.empty() || res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Field {
  const char* key;
  std::function<nlohmann::ordered_json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
Field number_field(const char* key, T ExperimentConfig::*member) {
  return {key,
          [member](const ExperimentConfig& c) { return nlohmann::ordered_json(c.*member); },
          [key, member](ExperimentConfig& c, const std::string& v) {
            c.*member = parse_value<T>(key, v);
          }};
}

Field string_field(const char* key, std::string ExperimentConfig::*member) {
  return {key,
          [member](const ExperimentConfig& c) { return nlohmann::ordered_json(c.*member); },
          [member](ExperimentConfig& c, const std::string& v) { c.*member = trim(v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      string_field("loss", &ExperimentConfig::loss),
      number_field("tau", &ExperimentConfig::tau),
      number_field("k_classes", &ExperimentConfig::k_classes),
      number_field("per_class", &ExperimentConfig::per_class),
      number_field("lr", &ExperimentConfig::lr),
      number_field("beta1", &ExperimentConfig::beta1),
      number_field("beta2", &ExperimentConfig::beta2),
      number_field("adam_eps", &ExperimentConfig::adam_eps),
      number_field("weight_decay", &ExperimentConfig::weight_decay),
      number_field("iterations", &ExperimentConfig::iterations),
      number_field("steps_per_epoch", &ExperimentConfig::steps_per_epoch),
      number_field("seed", &ExperimentConfig::seed),
      number_field("hidden", &ExperimentConfig::hidden),
      number_field("n_per_class", &ExperimentConfig::n_per_class),
      number_field("n_classes", &ExperimentConfig::n_classes),
      number_field("ring_radius", &ExperimentConfig::ring_radius),
      number_field("sigma_fraction", &ExperimentConfig::sigma_fraction),
      {"eval_ks",
       [](const ExperimentConfig& c) { return nlohmann::ordered_json(c.eval_ks); },
       [](ExperimentConfig& c, const std::string& v) {
         c.eval_ks.clear();
         for (const auto& item : split_list(v)) {
           c.eval_ks.push_back(parse_value<int>("eval_ks", item));
         }
       }},
      number_field("kmeans_iters", &ExperimentConfig::kmeans_iters),
      {"robust_losses",
       [](const ExperimentConfig& c) { return nlohmann::ordered_json(c.robust_losses); },
       [](ExperimentConfig& c, const std::string& v) { c.robust_losses = split_list(v); }},
      number_field("merge_group", &ExperimentConfig::merge_group),
      string_field("out_dir", &ExperimentConfig::out_dir),
  };
  return table;
}

// JSON value -> the textual form accepted by Field::set.
std::string json_to_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) {
      if (!out.empty()) out += ',';
      out += json_to_text(item);
    }
    return out;
  }
  throw ConfigError("unsupported config value " + v.dump());
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void ExperimentConfig::validate() const {
  LossSpec::parse(loss, tau);
  for (const auto& l : robust_losses) LossSpec::parse(l, tau);
  if (per_class < 2) throw ConfigError("per_class must be >= 2");
  if (k_classes < 1) throw ConfigError("k_classes must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (steps_per_epoch < 1) throw ConfigError("steps_per_epoch must be >= 1");
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (n_per_class < 2) throw ConfigError("n_per_class must be >= 2");
  if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
  if (k_classes > n_classes) throw ConfigError("k_classes exceeds n_classes");
  if (per_class > n_per_class) throw ConfigError("per_class exceeds n_per_class");
  if (!(ring_radius > 0.0) || !(sigma_fraction > 0.0)) {
    throw ConfigError("ring_radius and sigma_fraction must be positive");
  }
  if (std::find(eval_ks.begin(), eval_ks.end(), 1) == eval_ks.end()) {
    throw ConfigError("eval_ks must include 1");
  }
  for (int k : eval_ks) {
    if (k < 1) throw ConfigError("eval_ks entries must be >= 1");
  }
  if (merge_group < 1) throw ConfigError("merge_group must be >= 1");
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const Field& f : fields()) j[f.key] = f.get(*this);
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config JSON must be an object");
  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) c.set(key, json_to_text(value));
  return c;
}

std::string ExperimentConfig::to_ini() const {
  std::string out;
  for (const Field& f : fields()) {
    out += f.key;
    out += " = ";
    out += json_to_text(nlohmann::json::parse(f.get(*this).dump()));
    out += '\n';
  }
  return out;
}

ExperimentConfig parse_ini(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    const std::string body = trim(line.substr(0, comment));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected 'key = value'", line_no);
    }
    try {
      base.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const ParseError&) {
      throw;
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             ExperimentConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
    if (j.contains("config")) j = j["config"];
    if (!j.is_object()) throw ConfigError("config JSON must be an object");
    for (const auto& [key, value] : j.items()) base.set(key, json_to_text(value));
    return base;
  }
  return parse_ini(text, base);
}

}  // namespace pnp
