#include "sparho/environments.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sparho {

Eigen::VectorXd softmax_gaussian(int n, double beta, Rng& rng) {
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.normal(0.0, beta);
  const double zmax = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - zmax).exp();
  return e / e.sum();
}

BanditInstance generate_bandit(int n_actions, double beta, Rng& rng) {
  if (n_actions < 2) throw std::invalid_argument("generate_bandit: need at least 2 actions");
  if (beta <= 0.0) throw std::invalid_argument("generate_bandit: beta must be positive");
  BanditInstance inst;
  inst.beta = beta;
  inst.mu = softmax_gaussian(n_actions, beta, rng);
  inst.pi = softmax_gaussian(n_actions, beta, rng);
  inst.q.resize(n_actions);
  for (int i = 0; i < n_actions; ++i) inst.q[i] = beta + rng.normal(0.0, beta);
  return inst;
}

EnvWithPolicies make_path_world(int width, int depth, double beta, Rng& rng) {
  if (width < 2 || depth < 1)
    throw std::invalid_argument("make_path_world: width >= 2 and depth >= 1 required");
  const int n_states = width * depth + 2;
  const int terminal_id = n_states - 1;

  EnvWithPolicies env;
  TabularMDP& mdp = env.mdp;
  mdp.n_states = n_states;
  mdp.n_actions = width;
  mdp.gamma = 1.0;
  mdp.terminal.assign(static_cast<std::size_t>(n_states), 0);
  mdp.terminal[static_cast<std::size_t>(terminal_id)] = 1;
  mdp.start = Eigen::VectorXd::Zero(n_states);
  mdp.start[0] = 1.0;
  mdp.transition.assign(static_cast<std::size_t>(n_states),
                        Eigen::MatrixXd::Zero(width, n_states));
  mdp.reward.assign(static_cast<std::size_t>(n_states), Eigen::MatrixXd::Zero(width, n_states));

  // State ids: 0 is the input node, layer l in 1..depth occupies
  // 1 + (l-1)*width .. l*width, and the last id is the output node.
  auto layer_of = [&](int s) { return s == 0 ? 0 : 1 + (s - 1) / width; };
  for (int s = 0; s < n_states; ++s) {
    if (s == terminal_id) {
      for (int a = 0; a < width; ++a) mdp.transition[static_cast<std::size_t>(s)](a, s) = 1.0;
      continue;
    }
    const int layer = layer_of(s);
    for (int a = 0; a < width; ++a) {
      const int target = layer == depth ? terminal_id : 1 + layer * width + a;
      mdp.transition[static_cast<std::size_t>(s)](a, target) = 1.0;
      mdp.reward[static_cast<std::size_t>(s)](a, target) = (1.0 + a) / width;
    }
  }

  env.mu.resize(n_states, width);
  env.pi.resize(n_states, width);
  for (int s = 0; s < n_states; ++s) {
    if (mdp.is_terminal(s)) {
      env.mu.row(s).setConstant(1.0 / width);
      env.pi.row(s).setConstant(1.0 / width);
      continue;
    }
    env.mu.row(s) = softmax_gaussian(width, beta, rng).transpose();
    env.pi.row(s) = softmax_gaussian(width, beta, rng).transpose();
  }
  mdp.validate();
  return env;
}

EnvWithPolicies make_grid_world(int side, GridDirs dirs, double eps_pi, double eps_mu,
                                const std::function<int(int)>& preferred, Rng& rng) {
  if (side < 3 || side % 2 == 0)
    throw std::invalid_argument("make_grid_world: side must be odd and >= 3");
  if (eps_pi <= 0.0 || eps_pi > 1.0 || eps_mu <= 0.0 || eps_mu > 1.0)
    throw std::invalid_argument("make_grid_world: eps must lie in (0, 1]");

  static constexpr std::array<std::pair<int, int>, 4> kFour = {
      {{-1, 0}, {0, 1}, {1, 0}, {0, -1}}};  // N, E, S, W
  static constexpr std::array<std::pair<int, int>, 8> kEight = {
      {{-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};
  const int n_actions = dirs == GridDirs::Four ? 4 : 8;
  const int n_states = side * side;

  EnvWithPolicies env;
  TabularMDP& mdp = env.mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = 1.0;
  mdp.terminal.assign(static_cast<std::size_t>(n_states), 0);
  mdp.terminal[0] = 1;
  mdp.terminal[static_cast<std::size_t>(n_states - 1)] = 1;
  mdp.start = Eigen::VectorXd::Zero(n_states);
  mdp.start[(side / 2) * side + side / 2] = 1.0;
  mdp.transition.assign(static_cast<std::size_t>(n_states),
                        Eigen::MatrixXd::Zero(n_actions, n_states));
  mdp.reward.assign(static_cast<std::size_t>(n_states),
                    Eigen::MatrixXd::Zero(n_actions, n_states));

  for (int rrow = 0; rrow < side; ++rrow) {
    for (int col = 0; col < side; ++col) {
      const int s = rrow * side + col;
      if (mdp.is_terminal(s)) {
        for (int a = 0; a < n_actions; ++a) mdp.transition[static_cast<std::size_t>(s)](a, s) = 1.0;
        continue;
      }
      for (int a = 0; a < n_actions; ++a) {
        const auto [dr, dc] = dirs == GridDirs::Four ? kFour[static_cast<std::size_t>(a)]
                                                     : kEight[static_cast<std::size_t>(a)];
        int nr = rrow + dr;
        int nc = col + dc;
        if (nr < 0 || nr >= side || nc < 0 || nc >= side) {
          nr = rrow;
          nc = col;
        }
        const int target = nr * side + nc;
        mdp.transition[static_cast<std::size_t>(s)](a, target) = 1.0;
        mdp.reward[static_cast<std::size_t>(s)](a, target) = -1.0;
      }
    }
  }

  std::function<int(int)> select = preferred;
  if (!select) {
    const int fixed = rng.uniform_int(n_actions);
    select = [fixed](int) { return fixed; };
  }

  env.mu.resize(n_states, n_actions);
  env.pi.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    const int p = select(s);
    if (p < 0 || p >= n_actions)
      throw std::invalid_argument("make_grid_world: preferred action out of range");
    env.mu.row(s).setConstant(eps_mu / n_actions);
    env.mu(s, p) += 1.0 - eps_mu;
    env.pi.row(s).setConstant(eps_pi / n_actions);
    env.pi(s, p) += 1.0 - eps_pi;
  }
  mdp.validate();
  return env;
}

FeatureMap make_random_features(int n_states, Rng& rng) {
  if (n_states < 1) throw std::invalid_argument("make_random_features: n_states must be >= 1");
  FeatureMap features = FeatureMap::Zero(n_states, kFeatureDim);
  std::array<int, kFeatureDim> idx{};
  for (int s = 0; s < n_states; ++s) {
    for (int i = 0; i < kFeatureDim; ++i) idx[static_cast<std::size_t>(i)] = i;
    // Partial Fisher-Yates: the first kFeatureOnes entries form a uniform
    // 16-choose-8 subset.
    for (int i = 0; i < kFeatureOnes; ++i) {
      const int j = i + rng.uniform_int(kFeatureDim - i);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      features(s, idx[static_cast<std::size_t>(i)]) = 1.0;
    }
  }
  return features;
}

namespace {

using nlohmann::json;

Eigen::MatrixXd parse_policy(const json& rows, int n_states, int n_actions, const char* name) {
  Eigen::MatrixXd table(n_states, n_actions);
  if (static_cast<int>(rows.size()) != n_states)
    throw std::invalid_argument(std::string("mdp spec: ") + name + " row count mismatch");
  for (int s = 0; s < n_states; ++s) {
    const auto& row = rows.at(static_cast<std::size_t>(s));
    if (static_cast<int>(row.size()) != n_actions)
      throw std::invalid_argument(std::string("mdp spec: ") + name + " column count mismatch");
    for (int a = 0; a < n_actions; ++a) table(s, a) = row.at(static_cast<std::size_t>(a)).get<double>();
  }
  return table;
}

}  // namespace

TabularMDP make_custom_mdp(const std::string& json_text) {
  json spec;
  try {
    spec = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("mdp spec: invalid JSON: ") + e.what());
  }

  TabularMDP mdp;
  mdp.n_states = spec.at("n_states").get<int>();
  mdp.n_actions = spec.at("n_actions").get<int>();
  mdp.gamma = spec.at("gamma").get<double>();
  if (mdp.n_states <= 0 || mdp.n_actions <= 0)
    throw std::invalid_argument("mdp spec: n_states and n_actions must be positive");

  mdp.terminal.assign(static_cast<std::size_t>(mdp.n_states), 0);
  for (const auto& t : spec.at("terminal")) {
    const int id = t.get<int>();
    if (id < 0 || id >= mdp.n_states)
      throw std::invalid_argument("mdp spec: terminal id out of range");
    mdp.terminal[static_cast<std::size_t>(id)] = 1;
  }

  auto parse_tensor = [&](const char* key) {
    const auto& outer = spec.at(key);
    if (static_cast<int>(outer.size()) != mdp.n_states)
      throw std::invalid_argument(std::string("mdp spec: ") + key + " state count mismatch");
    std::vector<Eigen::MatrixXd> tensor(static_cast<std::size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s) {
      const auto& mid = outer.at(static_cast<std::size_t>(s));
      if (static_cast<int>(mid.size()) != mdp.n_actions)
        throw std::invalid_argument(std::string("mdp spec: ") + key + " action count mismatch");
      Eigen::MatrixXd m(mdp.n_actions, mdp.n_states);
      for (int a = 0; a < mdp.n_actions; ++a) {
        const auto& inner = mid.at(static_cast<std::size_t>(a));
        if (static_cast<int>(inner.size()) != mdp.n_states)
          throw std::invalid_argument(std::string("mdp spec: ") + key +
                                      " successor count mismatch");
        for (int s2 = 0; s2 < mdp.n_states; ++s2)
          m(a, s2) = inner.at(static_cast<std::size_t>(s2)).get<double>();
      }
      tensor[static_cast<std::size_t>(s)] = m;
    }
    return tensor;
  };
  mdp.transition = parse_tensor("transition");
  mdp.reward = parse_tensor("reward");

  if (spec.contains("start")) {
    const auto& st = spec.at("start");
    if (static_cast<int>(st.size()) != mdp.n_states)
      throw std::invalid_argument("mdp spec: start size mismatch");
    mdp.start.resize(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) mdp.start[s] = st.at(static_cast<std::size_t>(s)).get<double>();
  } else {
    mdp.start = Eigen::VectorXd::Zero(mdp.n_states);
    int non_terminal = 0;
    for (int s = 0; s < mdp.n_states; ++s) non_terminal += mdp.is_terminal(s) ? 0 : 1;
    if (non_terminal == 0) throw std::invalid_argument("mdp spec: no non-terminal state");
    for (int s = 0; s < mdp.n_states; ++s)
      if (!mdp.is_terminal(s)) mdp.start[s] = 1.0 / non_terminal;
  }

  mdp.validate();
  return mdp;
}

TabularMDP load_mdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mdp spec file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return make_custom_mdp(buffer.str());
}

CustomMdpPolicies load_mdp_policies(const std::string& path, const TabularMDP& mdp) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mdp spec file: " + path);
  json spec = json::parse(in);
  CustomMdpPolicies out;
  if (spec.contains("mu")) {
    out.has_mu = true;
    out.mu = parse_policy(spec.at("mu"), mdp.n_states, mdp.n_actions, "mu");
    validate_policy(mdp, out.mu, /*require_soft=*/true);
  }
  if (spec.contains("pi")) {
    out.has_pi = true;
    out.pi = parse_policy(spec.at("pi"), mdp.n_states, mdp.n_actions, "pi");
    validate_policy(mdp, out.pi, /*require_soft=*/false);
  }
  return out;
}

}  // namespace sparho
