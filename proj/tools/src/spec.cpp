#include "pdnac_cli/spec.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "pdnac/errors.hpp"
#include "pdnac/model_io.hpp"
#include "pdnac/rng.hpp"

namespace pdnac::cli {

namespace {

int line_of(const YAML::Node& node) { return node.Mark().line + 1; }

template <class T>
T scalar(const YAML::Node& node, std::string_view field) {
  if (!node.IsScalar()) {
    throw ParseError(fmt::format("field '{}' must be a scalar", field), line_of(node));
  }
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ParseError(fmt::format("field '{}' has the wrong type: '{}'", field, node.Scalar()),
                     line_of(node));
  }
}

void parse_env(const YAML::Node& node, ExperimentSpec& spec) {
  if (node.IsScalar()) {
    if (node.Scalar() != "garnet") {
      throw ParseError(fmt::format("field 'env' must be 'garnet' or a map, got '{}'", node.Scalar()),
                       line_of(node));
    }
    return;
  }
  if (!node.IsMap()) throw ParseError("field 'env' must be 'garnet' or a map", line_of(node));
  GarnetSpec& g = spec.garnet;
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    const YAML::Node& value = kv.second;
    if (key == "file") {
      spec.env_file = scalar<std::string>(value, "env.file");
    } else if (key == "n_states") {
      g.n_states = scalar<int>(value, "env.n_states");
    } else if (key == "n_actions") {
      g.n_actions = scalar<int>(value, "env.n_actions");
    } else if (key == "branching") {
      g.branching = scalar<int>(value, "env.branching");
    } else if (key == "constraint") {
      try {
        g.constraint = parse_constraint_mode(scalar<std::string>(value, "env.constraint"));
      } catch (const InvalidArgument& e) {
        throw ParseError(fmt::format("field 'env.constraint': {}", e.what()), line_of(value));
      }
    } else if (key == "seed") {
      g.seed = scalar<std::uint64_t>(value, "env.seed");
    } else if (key == "slater_margin") {
      g.slater_margin = scalar<double>(value, "env.slater_margin");
    } else {
      throw ParseError(fmt::format("unknown key 'env.{}'", key), line_of(kv.first));
    }
  }
}

void parse_overrides(const YAML::Node& node, ExperimentSpec& spec) {
  if (!node.IsMap()) throw ParseError("field 'overrides' must be a map", line_of(node));
  PdnacConfig probe;
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    const std::string value = scalar<std::string>(kv.second, "overrides." + key);
    try {
      set_config_field(probe, key, value);
    } catch (const InvalidArgument& e) {
      throw ParseError(fmt::format("overrides: {}", e.what()), line_of(kv.first));
    }
    spec.overrides.emplace_back(key, value);
  }
}

}  // namespace

ExperimentSpec parse_spec(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ParseError(fmt::format("malformed experiment spec: {}", e.msg), e.mark.line + 1);
  }
  ExperimentSpec spec;
  if (root.IsNull()) return spec;
  if (!root.IsMap()) throw ParseError("experiment spec must be a map", line_of(root));
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    const YAML::Node& value = kv.second;
    if (key == "env") {
      parse_env(value, spec);
    } else if (key == "T") {
      spec.T.clear();
      if (value.IsSequence()) {
        for (const auto& item : value) spec.T.push_back(scalar<std::int64_t>(item, "T"));
      } else {
        spec.T.push_back(scalar<std::int64_t>(value, "T"));
      }
    } else if (key == "seeds") {
      spec.seeds = scalar<int>(value, "seeds");
    } else if (key == "seed") {
      spec.seed = scalar<std::uint64_t>(value, "seed");
    } else if (key == "out") {
      spec.out = scalar<std::string>(value, "out");
    } else if (key == "jobs") {
      spec.jobs = scalar<int>(value, "jobs");
    } else if (key == "overrides") {
      parse_overrides(value, spec);
    } else {
      throw ParseError(fmt::format("unknown key '{}'", key), line_of(kv.first));
    }
  }
  validate(spec);
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot read experiment spec '{}'", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_spec(text.str());
}

void validate(const ExperimentSpec& spec) {
  if (spec.T.empty()) throw InvariantViolation("spec: T must list at least one horizon");
  for (std::int64_t T : spec.T) {
    if (T < 4) throw InvariantViolation(fmt::format("spec: T values must be >= 4, got {}", T));
  }
  if (spec.seeds < 1) throw InvariantViolation("spec: seeds must be >= 1");
  if (spec.jobs < 1) throw InvariantViolation("spec: jobs must be >= 1");
}

CmdpModel build_env(const ExperimentSpec& spec) {
  if (spec.env_file) return load_model(*spec.env_file);
  const GarnetSpec& g = spec.garnet;
  return garnet(g.n_states, g.n_actions, g.branching, g.constraint,
                g.seed.value_or(derive_seed(spec.seed, "env")), g.slater_margin);
}

PdnacConfig make_config(const ExperimentSpec& spec, std::int64_t T, std::uint64_t run_seed) {
  PdnacConfig config = config_for_horizon(T);
  for (const auto& [key, value] : spec.overrides) set_config_field(config, key, value);
  config.seed = run_seed;
  return config;
}

}  // namespace pdnac::cli
