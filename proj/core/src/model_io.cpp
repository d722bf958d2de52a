#include "pdnac/model_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "pdnac/errors.hpp"

namespace pdnac {

namespace {

void emit_list(YAML::Emitter& out, const char* key, const double* data, std::size_t n) {
  out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (std::size_t i = 0; i < n; ++i) out << data[i];
  out << YAML::EndSeq;
}

int line_of(const YAML::Node& node) { return node.Mark().line + 1; }

template <typename T>
T read_scalar(const YAML::Node& root, const char* key) {
  const YAML::Node node = root[key];
  if (!node) throw ParseError(fmt::format("missing key '{}'", key), line_of(root));
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ParseError(fmt::format("key '{}' has the wrong type", key), line_of(node));
  }
}

std::vector<double> read_list(const YAML::Node& root, const char* key, std::size_t expected) {
  const YAML::Node node = root[key];
  if (!node) throw ParseError(fmt::format("missing key '{}'", key), line_of(root));
  if (!node.IsSequence()) {
    throw ParseError(fmt::format("key '{}' must be a list of numbers", key), line_of(node));
  }
  std::vector<double> values;
  values.reserve(node.size());
  try {
    for (const auto& item : node) values.push_back(item.as<double>());
  } catch (const YAML::Exception&) {
    throw ParseError(fmt::format("key '{}' must be a list of numbers", key), line_of(node));
  }
  if (values.size() != expected) {
    throw ParseError(
        fmt::format("key '{}' has {} entries, expected {}", key, values.size(), expected),
        line_of(node));
  }
  return values;
}

}  // namespace

std::string dump_model(const CmdpModel& model) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "n_states" << YAML::Value << model.n_states();
  out << YAML::Key << "n_actions" << YAML::Value << model.n_actions();
  const std::vector<double> p = model.flat_transition();
  emit_list(out, "transition", p.data(), p.size());
  // Eigen stores column-major; the file layout is row-major [s][a].
  const RowMatrix r = model.reward();
  const RowMatrix c = model.cost();
  emit_list(out, "reward", r.data(), static_cast<std::size_t>(r.size()));
  emit_list(out, "cost", c.data(), static_cast<std::size_t>(c.size()));
  emit_list(out, "initial_dist", model.initial_dist().data(),
            static_cast<std::size_t>(model.initial_dist().size()));
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

CmdpModel parse_model(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ParseError(fmt::format("malformed model file: {}", e.msg), e.mark.line + 1);
  }
  if (!root.IsMap()) throw ParseError("model file must be a key/value map", 1);

  static const std::set<std::string> known = {"n_states", "n_actions",    "transition",
                                              "reward",   "cost",         "initial_dist"};
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (!known.contains(key)) {
      throw ParseError(fmt::format("unknown key '{}'", key), line_of(kv.first));
    }
  }

  const int S = read_scalar<int>(root, "n_states");
  const int A = read_scalar<int>(root, "n_actions");
  if (S < 1 || A < 1) {
    throw InvariantViolation("n_states and n_actions must be positive integers");
  }
  const auto sa = static_cast<std::size_t>(S) * static_cast<std::size_t>(A);
  std::vector<double> transition = read_list(root, "transition", sa * S);
  const std::vector<double> r = read_list(root, "reward", sa);
  const std::vector<double> c = read_list(root, "cost", sa);
  const std::vector<double> rho = read_list(root, "initial_dist", static_cast<std::size_t>(S));

  Eigen::MatrixXd reward = Eigen::Map<const RowMatrix>(r.data(), S, A);
  Eigen::MatrixXd cost = Eigen::Map<const RowMatrix>(c.data(), S, A);
  Eigen::VectorXd initial = Eigen::Map<const Eigen::VectorXd>(rho.data(), S);
  return CmdpModel(S, A, std::move(transition), std::move(reward), std::move(cost),
                   std::move(initial));
}

CmdpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot read model file '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str());
}

void save_model(const CmdpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument(fmt::format("cannot write model file '{}'", path.string()));
  out << dump_model(model);
}

}  // namespace pdnac
