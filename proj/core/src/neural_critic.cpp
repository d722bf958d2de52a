#include "pdnac/neural_critic.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "pdnac/errors.hpp"
#include "pdnac/sampler.hpp"

namespace pdnac {

Activation parse_activation(std::string_view text) {
  if (text == "identity") return Activation::identity;
  if (text == "sigmoid") return Activation::sigmoid;
  if (text == "elu") return Activation::elu;
  if (text == "gelu") return Activation::gelu;
  throw InvalidArgument(
      fmt::format("unknown activation '{}' (identity | sigmoid | elu | gelu)", text));
}

std::string_view to_string(Activation act) noexcept {
  switch (act) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::elu: return "elu";
    case Activation::gelu: return "gelu";
  }
  return "identity";
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double activate(Activation act, double x) noexcept {
  switch (act) {
    case Activation::identity: return x;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::elu: return x > 0.0 ? x : std::expm1(x);
    case Activation::gelu: return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  return x;
}

double activate_derivative(Activation act, double x) noexcept {
  switch (act) {
    case Activation::identity: return 1.0;
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
    case Activation::elu: return x > 0.0 ? 1.0 : std::exp(x);
    case Activation::gelu:
      return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
  }
  return 1.0;
}

CriticNet::CriticNet(int depth, int width, int input_dim, Activation activation,
                     Eigen::VectorXd head, Eigen::VectorXd init_snapshot)
    : depth_(depth),
      width_(width),
      input_dim_(input_dim),
      activation_(activation),
      head_(std::move(head)),
      init_(std::move(init_snapshot)) {
  if (depth_ < 1 || width_ < 1 || input_dim_ < 1) {
    throw InvalidArgument("critic network needs L, m, n >= 1");
  }
  if (head_.size() != width_) {
    throw InvalidArgument(fmt::format("head has {} entries, width is {}", head_.size(), width_));
  }
  for (Eigen::Index i = 0; i < head_.size(); ++i) {
    if (head_(i) != 1.0 && head_(i) != -1.0) {
      throw InvariantViolation("critic head entries must be -1 or +1");
    }
  }
  const Eigen::Index expected =
      static_cast<Eigen::Index>(width_) * (input_dim_ + static_cast<Eigen::Index>(depth_ - 1) * width_);
  if (init_.size() != expected) {
    throw InvalidArgument(fmt::format("parameter vector has {} entries, expected m(n + (L-1)m) = {}",
                                      init_.size(), expected));
  }
}

Eigen::Index CriticNet::layer_offset(int layer) const noexcept {
  if (layer <= 1) return 0;
  const Eigen::Index m = width_;
  return m * input_dim_ + (layer - 2) * m * m;
}

CriticNet init_network(int depth, int width, int input_dim, Activation activation, Rng& rng) {
  if (depth < 1 || width < 1 || input_dim < 1) {
    throw InvalidArgument("critic network needs L, m, n >= 1");
  }
  const Eigen::Index p = static_cast<Eigen::Index>(width) *
                         (input_dim + static_cast<Eigen::Index>(depth - 1) * width);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd init(p);
  for (Eigen::Index i = 0; i < p; ++i) init(i) = normal(rng);
  Eigen::VectorXd head(width);
  for (int i = 0; i < width; ++i) head(i) = (rng() >> 63) ? 1.0 : -1.0;
  return CriticNet(depth, width, input_dim, activation, std::move(head), std::move(init));
}

namespace {

void check_inputs(const CriticNet& net, const Eigen::VectorXd& zeta, const Eigen::VectorXd& phi) {
  if (zeta.size() != net.param_count()) {
    throw InvalidArgument(fmt::format("zeta has {} entries, network has {} parameters",
                                      zeta.size(), net.param_count()));
  }
  if (phi.size() != net.input_dim()) {
    throw InvalidArgument(
        fmt::format("phi has dimension {}, network input is {}", phi.size(), net.input_dim()));
  }
}

using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;

ConstMatrixMap layer_weights(const CriticNet& net, const Eigen::VectorXd& zeta, int layer) {
  const Eigen::Index cols = layer == 1 ? net.input_dim() : net.width();
  return ConstMatrixMap(zeta.data() + net.layer_offset(layer), net.width(), cols);
}

}  // namespace

double forward(const CriticNet& net, const Eigen::VectorXd& zeta, const Eigen::VectorXd& phi) {
  check_inputs(net, zeta, phi);
  const double scale = 1.0 / std::sqrt(static_cast<double>(net.width()));
  const Activation act = net.activation();
  Eigen::VectorXd x = phi;
  for (int l = 1; l <= net.depth(); ++l) {
    Eigen::VectorXd pre = layer_weights(net, zeta, l) * x;
    x = pre.unaryExpr([act, scale](double v) { return scale * activate(act, v); });
  }
  return scale * net.head().dot(x);
}

Eigen::VectorXd grad_params(const CriticNet& net, const Eigen::VectorXd& zeta,
                            const Eigen::VectorXd& phi) {
  check_inputs(net, zeta, phi);
  const double scale = 1.0 / std::sqrt(static_cast<double>(net.width()));
  const Activation act = net.activation();
  const int L = net.depth();

  std::vector<Eigen::VectorXd> inputs(static_cast<std::size_t>(L));  // x_{l-1}
  std::vector<Eigen::VectorXd> pres(static_cast<std::size_t>(L));
  Eigen::VectorXd x = phi;
  for (int l = 1; l <= L; ++l) {
    inputs[static_cast<std::size_t>(l - 1)] = x;
    pres[static_cast<std::size_t>(l - 1)] = layer_weights(net, zeta, l) * x;
    x = pres[static_cast<std::size_t>(l - 1)].unaryExpr(
        [act, scale](double v) { return scale * activate(act, v); });
  }

  Eigen::VectorXd grad(net.param_count());
  Eigen::VectorXd upstream = scale * net.head();  // dQ / dx_L
  for (int l = L; l >= 1; --l) {
    const Eigen::VectorXd& pre = pres[static_cast<std::size_t>(l - 1)];
    const Eigen::VectorXd dpre =
        scale * pre.unaryExpr([act](double v) { return activate_derivative(act, v); })
                    .cwiseProduct(upstream);
    const Eigen::VectorXd& in = inputs[static_cast<std::size_t>(l - 1)];
    Eigen::Map<Eigen::MatrixXd>(grad.data() + net.layer_offset(l), net.width(), in.size()) =
        dpre * in.transpose();
    if (l > 1) upstream = layer_weights(net, zeta, l).transpose() * dpre;
  }
  return grad;
}

CriticParams initial_params(const CriticNet& net, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("projection radius must be positive");
  return {0.0, net.init_snapshot(), radius};
}

namespace {

void project_in_place(CriticParams& params, const Eigen::VectorXd& anchor) {
  if (params.zeta.size() != anchor.size()) {
    throw InvalidArgument("project_ball: zeta and anchor differ in dimension");
  }
  const double dist = (params.zeta - anchor).norm();
  if (dist > params.radius) {
    params.zeta = anchor + (params.radius / dist) * (params.zeta - anchor);
  }
}

}  // namespace

CriticParams project_ball(const CriticParams& params, const Eigen::VectorXd& anchor) {
  CriticParams out = params;
  project_in_place(out, anchor);
  return out;
}

FeatureMode parse_feature_mode(std::string_view text) {
  if (text == "one-hot" || text == "one_hot") return FeatureMode::one_hot;
  if (text == "random-projection" || text == "random_projection") {
    return FeatureMode::random_projection;
  }
  throw InvalidArgument(
      fmt::format("unknown feature mode '{}' (one-hot | random-projection)", text));
}

std::string_view to_string(FeatureMode mode) noexcept {
  return mode == FeatureMode::one_hot ? "one-hot" : "random-projection";
}

FeatureMap::FeatureMap(FeatureMode mode, int n_actions, Eigen::MatrixXd table)
    : mode_(mode), n_actions_(n_actions), table_(std::move(table)) {
  if (n_actions_ < 1 || table_.rows() % n_actions_ != 0) {
    throw InvalidArgument("feature table must have S*A rows");
  }
  for (Eigen::Index i = 0; i < table_.rows(); ++i) {
    if (table_.row(i).norm() > 1.0 + 1e-12) {
      throw InvariantViolation(fmt::format("feature row {} has norm > 1", i));
    }
  }
}

FeatureMap build_feature_map(const CmdpModel& model, FeatureMode mode, int n, Rng& rng) {
  const int pairs = model.n_pairs();
  if (n < 1) throw InvalidArgument("feature dimension must be >= 1");
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(pairs, n);
  if (mode == FeatureMode::one_hot) {
    if (n < pairs) {
      throw InvalidArgument(
          fmt::format("one-hot features need n >= S*A = {}, got {}", pairs, n));
    }
    for (int i = 0; i < pairs; ++i) table(i, i) = 1.0;
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < pairs; ++i) {
      for (int j = 0; j < n; ++j) table(i, j) = normal(rng);
      table.row(i).normalize();
    }
  }
  return FeatureMap(mode, model.n_actions(), std::move(table));
}

BoundCritic::BoundCritic(CriticNet net, FeatureMap features)
    : net_(std::move(net)), features_(std::move(features)) {
  if (features_.dim() != net_.input_dim()) {
    throw InvalidArgument(fmt::format("feature dimension {} != network input {}",
                                      features_.dim(), net_.input_dim()));
  }
  n_actions_ = features_.n_actions();
  const Eigen::Index pairs = features_.table().rows();
  const int L = net_.depth();
  const double scale = 1.0 / std::sqrt(static_cast<double>(net_.width()));
  const Activation act = net_.activation();
  const Eigen::VectorXd& zeta0 = net_.init_snapshot();

  // Batched forward and backward pass at zeta_0, one column per pair.
  std::vector<Eigen::MatrixXd> pres(static_cast<std::size_t>(L));
  layer_inputs_.resize(static_cast<std::size_t>(L));
  layer_deltas_.resize(static_cast<std::size_t>(L));
  Eigen::MatrixXd x = features_.table().transpose();
  for (int l = 1; l <= L; ++l) {
    const auto idx = static_cast<std::size_t>(l - 1);
    layer_inputs_[idx] = x;
    pres[idx] = layer_weights(net_, zeta0, l) * x;
    x = pres[idx].unaryExpr([act, scale](double v) { return scale * activate(act, v); });
  }
  init_values_ = scale * (x.transpose() * net_.head());

  Eigen::MatrixXd upstream = (scale * net_.head()).replicate(1, pairs);
  for (int l = L; l >= 1; --l) {
    const auto idx = static_cast<std::size_t>(l - 1);
    layer_deltas_[idx] =
        scale * pres[idx].unaryExpr([act](double v) { return activate_derivative(act, v); })
                    .cwiseProduct(upstream);
    if (l > 1) upstream = layer_weights(net_, zeta0, l).transpose() * layer_deltas_[idx];
  }

  init_grads_.resize(net_.param_count(), pairs);
  for (Eigen::Index i = 0; i < pairs; ++i) {
    for (int l = 1; l <= L; ++l) {
      const auto idx = static_cast<std::size_t>(l - 1);
      const Eigen::Index rows = net_.width();
      const Eigen::Index cols = layer_inputs_[idx].rows();
      Eigen::Map<Eigen::MatrixXd>(init_grads_.col(i).data() + net_.layer_offset(l), rows, cols) =
          layer_deltas_[idx].col(i) * layer_inputs_[idx].col(i).transpose();
    }
  }
}

void BoundCritic::add_grad_combination(Eigen::VectorXd& zeta, const Eigen::VectorXd& coeffs) const {
  if (zeta.size() != net_.param_count() || coeffs.size() != n_pairs()) {
    throw InvalidArgument("add_grad_combination: dimension mismatch");
  }
  for (int l = 1; l <= net_.depth(); ++l) {
    const auto idx = static_cast<std::size_t>(l - 1);
    const Eigen::MatrixXd& in = layer_inputs_[idx];
    Eigen::Map<Eigen::MatrixXd>(zeta.data() + net_.layer_offset(l), net_.width(), in.rows())
        .noalias() += layer_deltas_[idx] * coeffs.asDiagonal() * in.transpose();
  }
}

double BoundCritic::value(const Eigen::VectorXd& zeta, int s, int a) const {
  return forward(net_, zeta, features_.table().row(pair(s, a)).transpose());
}

Eigen::VectorXd BoundCritic::values(const Eigen::VectorXd& zeta) const {
  if (zeta.size() != net_.param_count()) {
    throw InvalidArgument(fmt::format("zeta has {} entries, network has {} parameters",
                                      zeta.size(), net_.param_count()));
  }
  // All pairs at once: one matrix product per layer.
  const double scale = 1.0 / std::sqrt(static_cast<double>(net_.width()));
  const Activation act = net_.activation();
  Eigen::MatrixXd x = features_.table().transpose();
  for (int l = 1; l <= net_.depth(); ++l) {
    Eigen::MatrixXd pre = layer_weights(net_, zeta, l) * x;
    x = pre.unaryExpr([act, scale](double v) { return scale * activate(act, v); });
  }
  return scale * (x.transpose() * net_.head());
}

Eigen::VectorXd BoundCritic::linearized_values(const Eigen::VectorXd& zeta) const {
  return init_values_ + init_grads_.transpose() * (zeta - net_.init_snapshot());
}

CriticLinearization BoundCritic::linearization() const {
  return {init_grads_.transpose(), init_values_};
}

namespace {

Eigen::VectorXd semi_gradient(const BoundCritic& critic, const CriticParams& params,
                              const Transition& z, double g_val, double q_sa, double q_next,
                              double c_gamma) {
  const Eigen::Index p = critic.net().param_count();
  Eigen::VectorXd out(p + 1);
  out(0) = c_gamma * (params.eta - g_val);
  const double delta = q_sa + params.eta - g_val - q_next;
  out.tail(p) = delta * critic.init_grads().col(critic.pair(z.s, z.a));
  return out;
}

}  // namespace

Eigen::VectorXd critic_semi_gradient(const BoundCritic& critic, const CriticParams& params,
                                     const Transition& z, Signal g, double c_gamma) {
  const int a_next = z.require_a_next();
  const double q_sa = critic.value(params.zeta, z.s, z.a);
  const double q_next = critic.value(params.zeta, z.s_next, a_next);
  return semi_gradient(critic, params, z, z.value(g), q_sa, q_next, c_gamma);
}

std::vector<CriticParams> critic_inner_loop(std::span<const CriticTask> tasks,
                                            const CmdpModel& model, const SoftmaxPolicy& policy,
                                            const CriticLoopSettings& settings,
                                            TrajectoryCursor& cursor) {
  if (settings.inner_iterations < 0) throw InvalidArgument("H must be >= 0");
  if (!(settings.step_size > 0.0)) throw InvalidArgument("gamma_xi must be positive");

  std::vector<CriticParams> params;
  params.reserve(tasks.size());
  for (const CriticTask& task : tasks) {
    if (task.critic == nullptr) throw InvalidArgument("critic task without a critic");
    params.push_back(task.start);
  }

  for (int h = 0; h < settings.inner_iterations; ++h) {
    const MlmcBatch batch = draw_batch(cursor, model, policy, settings.t_max);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const BoundCritic& critic = *tasks[i].critic;
      const Signal g = tasks[i].signal;
      const CriticParams& xi = params[i];
      // The zeta block of every semi-gradient is a multiple of one column of
      // init_grads, so the MLMC combination runs over per-pair coefficients
      // (coordinate 0 is eta) and is mapped back with a single product.
      const Eigen::VectorXd q = critic.values(xi.zeta);
      const Statistic stat = [&](const Transition& z) {
        const int a_next = z.require_a_next();
        const double g_val = z.value(g);
        const int sa = critic.pair(z.s, z.a);
        Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(critic.n_pairs() + 1);
        coeffs(0) = settings.c_gamma * (xi.eta - g_val);
        coeffs(sa + 1) = q(sa) + xi.eta - g_val - q(critic.pair(z.s_next, a_next));
        return coeffs;
      };
      const Eigen::VectorXd v = mlmc_combine(stat, batch);
      CriticParams& next = params[i];
      next.eta -= settings.step_size * v(0);
      critic.add_grad_combination(next.zeta, -settings.step_size * v.tail(critic.n_pairs()));
      project_in_place(next, critic.net().init_snapshot());
    }
  }
  return params;
}

CriticParams critic_inner_loop(const BoundCritic& critic, Signal g, const CmdpModel& model,
                               const SoftmaxPolicy& policy, const CriticLoopSettings& settings,
                               TrajectoryCursor& cursor) {
  const CriticTask task{&critic, g, initial_params(critic.net(), settings.radius)};
  return critic_inner_loop(std::span<const CriticTask>(&task, 1), model, policy, settings,
                           cursor)
      .front();
}

double weighted_critic_mse(const BoundCritic& critic, const Eigen::VectorXd& zeta,
                           const Eigen::MatrixXd& nu, const Eigen::MatrixXd& target) {
  const Eigen::VectorXd q = critic.values(zeta);
  double mse = 0.0;
  for (Eigen::Index s = 0; s < nu.rows(); ++s) {
    for (Eigen::Index a = 0; a < nu.cols(); ++a) {
      const double err = q(critic.pair(static_cast<int>(s), static_cast<int>(a))) - target(s, a);
      mse += nu(s, a) * err * err;
    }
  }
  return mse;
}

namespace {

using nlohmann::json;

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_json_vector(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw ParseError(fmt::format("checkpoint is missing array '{}'", key));
  }
  const auto values = j[key].get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string dump_checkpoint(const CriticNet& net, const Eigen::VectorXd& zeta) {
  if (zeta.size() != net.param_count()) throw InvalidArgument("zeta does not match the network");
  json j;
  j["depth"] = net.depth();
  j["width"] = net.width();
  j["input_dim"] = net.input_dim();
  j["activation"] = std::string(to_string(net.activation()));
  j["head"] = to_std(net.head());
  j["init"] = to_std(net.init_snapshot());
  j["zeta"] = to_std(zeta);
  return j.dump() + "\n";
}

std::pair<CriticNet, Eigen::VectorXd> parse_checkpoint(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
    CriticNet net(j.at("depth").get<int>(), j.at("width").get<int>(),
                  j.at("input_dim").get<int>(),
                  parse_activation(j.at("activation").get<std::string>()),
                  from_json_vector(j, "head"), from_json_vector(j, "init"));
    Eigen::VectorXd zeta = from_json_vector(j, "zeta");
    if (zeta.size() != net.param_count()) throw ParseError("checkpoint zeta has the wrong size");
    return {std::move(net), std::move(zeta)};
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("malformed checkpoint: {}", e.what()));
  }
}

void save_checkpoint(const CriticNet& net, const Eigen::VectorXd& zeta,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument(fmt::format("cannot write checkpoint '{}'", path.string()));
  out << dump_checkpoint(net, zeta);
}

std::pair<CriticNet, Eigen::VectorXd> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot read checkpoint '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_checkpoint(buffer.str());
}

}  // namespace pdnac
