#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pnp/config.hpp"
#include "pnp/errors.hpp"

using namespace pnp;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("pnp_config_test_" + name);
  std::ofstream(p, std::ios::binary | std::ios::trunc) << text;
  return p;
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse_ini(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("defaults validate") {
  const ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.loss == "pnp-dq:2");
  CHECK(c.tau == 0.01);
  CHECK(c.hidden == 30);
  CHECK(c.n_per_class == 150);
  CHECK(c.weight_decay == 4e-4);
}

TEST_CASE("INI parsing with comments and overrides") {
  const std::string text =
      "# toy run\n"
      "loss = pnp-ib:4\n"
      "tau=0.05 ; inline comment\n"
      "\n"
      "  iterations =  300  \n"
      "eval_ks = 1, 2, 4\n"
      "robust_losses = pnp-o,smooth-ap\n";
  const ExperimentConfig c = parse_ini(text);
  CHECK(c.loss == "pnp-ib:4");
  CHECK(c.tau == 0.05);
  CHECK(c.iterations == 300);
  CHECK(c.eval_ks == std::vector<int>{1, 2, 4});
  CHECK(c.robust_losses == std::vector<std::string>{"pnp-o", "smooth-ap"});
  CHECK(c.seed == 0);

  ExperimentConfig o = c;
  o.set("seed", "9");
  CHECK(o.seed == 9);
  CHECK_THROWS_AS(o.set("nonsense", "1"), ConfigError);
  CHECK_THROWS_AS(o.set("lr", "fast"), ConfigError);
  CHECK_THROWS_AS(o.set("iterations", "-3"), ConfigError);
}

TEST_CASE("INI errors carry line numbers") {
  CHECK(parse_error_line("loss = pnp-o\nno equals sign\n") == 2);
  CHECK(parse_error_line("\n\nwhat = 3\n") == 3);
  CHECK(parse_error_line("tau = x\n") == 1);
  CHECK_THROWS_WITH_AS(parse_ini("a\n"), doctest::Contains("line 1"), ParseError);
}

TEST_CASE("validation rejects bad values") {
  auto invalid = [](const std::string& key, const std::string& value) {
    ExperimentConfig c;
    c.set(key, value);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  invalid("loss", "pnp-dq:0.5");
  invalid("tau", "0");
  invalid("per_class", "1");
  invalid("k_classes", "9");
  invalid("lr", "0");
  invalid("beta1", "1");
  invalid("eval_ks", "2,4");
  invalid("robust_losses", "pnp-ib:-1");
  invalid("out_dir", "");
}

TEST_CASE("JSON and INI round trips") {
  ExperimentConfig c;
  c.loss = "smooth-ap";
  c.tau = 0.1 + 0.2;
  c.seed = 123456789012345ULL;
  c.eval_ks = {1, 3};
  c.out_dir = "runs/a b";
  CHECK(ExperimentConfig::from_json(c.to_json()) == c);
  CHECK(parse_ini(c.to_ini()) == c);

  const auto j = c.to_json();
  CHECK(j.begin().key() == "loss");
  CHECK(j["eval_ks"] == nlohmann::ordered_json::array({1, 3}));
}

TEST_CASE("load_config reads INI, bare JSON and run records") {
  ExperimentConfig c;
  c.loss = "pnp-ds";
  c.iterations = 77;

  const fs::path ini = write_temp("a.ini", c.to_ini());
  CHECK(load_config(ini) == c);

  const fs::path bare = write_temp("b.json", c.to_json().dump());
  CHECK(load_config(bare) == c);

  nlohmann::ordered_json record;
  record["config"] = c.to_json();
  record["test"] = {{"nmi", 0.5}};
  const fs::path rec = write_temp("c.json", record.dump());
  CHECK(load_config(rec) == c);

  // Partial files start from the given base.
  ExperimentConfig base;
  base.seed = 4;
  const fs::path partial = write_temp("d.ini", "iterations = 5\n");
  const ExperimentConfig p = load_config(partial, base);
  CHECK(p.seed == 4);
  CHECK(p.iterations == 5);

  CHECK_THROWS_AS(load_config(write_temp("e.json", "{not json")), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/pnp.ini"), ConfigError);
  for (const char* f : {"a.ini", "b.json", "c.json", "d.ini", "e.json"}) {
    fs::remove(fs::temp_directory_path() / (std::string("pnp_config_test_") + f));
  }
}
