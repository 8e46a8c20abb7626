#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace pnp {

// Everything a toy experiment depends on. Every result file embeds this echo,
// and from_json(to_json(c)) == c.
struct ExperimentConfig {
  std::string loss = "pnp-dq:2";
  double tau = 0.01;

  std::size_t k_classes = 4;
  std::size_t per_class = 4;

  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 4e-4;

  std::size_t iterations = 2000;
  std::size_t steps_per_epoch = 100;
  std::uint64_t seed = 0;

  std::size_t hidden = 30;

  std::size_t n_per_class = 150;
  std::size_t n_classes = 4;
  double ring_radius = 1.0;
  double sigma_fraction = 0.1;

  std::vector<int> eval_ks = {1, 2, 4, 8};
  std::size_t kmeans_iters = 300;

  // Losses compared by the robustness protocol.
  std::vector<std::string> robust_losses = {"pnp-ib:4", "pnp-dq:2", "smooth-ap"};
  std::size_t merge_group = 3;

  std::string out_dir = "out";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  // Sets one field from its textual form. Throws ConfigError on an unknown
  // key or unparsable value.
  void set(const std::string& key, const std::string& value);

  // Throws ConfigError when a value is outside its domain.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);

  // Flat "key = value" text, one key per line, same order as to_json().
  std::string to_ini() const;
};

// Applies "key = value" lines ('#' and ';' start comments) onto `base`.
ExperimentConfig parse_ini(const std::string& text, ExperimentConfig base = {});

// Reads an INI file, a bare JSON config object, or a result JSON with a
// "config" member.
ExperimentConfig load_config(const std::filesystem::path& path,
                             ExperimentConfig base = {});

}  // namespace pnp
