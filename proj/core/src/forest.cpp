#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "salm/baselines.hpp"
#include "salm/errors.hpp"
#include "salm/rng.hpp"

namespace salm::baselines {

namespace {

double value_at(const FeatureVector& fv, uint32_t feature) {
  auto it = std::lower_bound(fv.entries.begin(), fv.entries.end(), feature,
                             [](const auto& e, uint32_t f) { return e.first < f; });
  return (it != fv.entries.end() && it->first == feature) ? it->second : 0.0;
}

struct TreeBuilder {
  const std::vector<std::vector<double>>& columns;  // feature-major values
  const std::vector<int>& labels;                   // 0-based
  int num_classes;
  const ForestConfig& config;
  size_t features_per_split;
  Rng& rng;
  std::vector<TreeNode> nodes;

  std::vector<double> distribution(const std::vector<size_t>& samples) const {
    std::vector<double> dist(static_cast<size_t>(num_classes), 0.0);
    for (size_t s : samples) dist[static_cast<size_t>(labels[s])] += 1.0;
    for (double& d : dist) d /= static_cast<double>(samples.size());
    return dist;
  }

  static double gini_from_counts(const std::vector<size_t>& counts, size_t total) {
    double sumsq = 0.0;
    for (size_t c : counts) sumsq += static_cast<double>(c) * static_cast<double>(c);
    const double n = static_cast<double>(total);
    return 1.0 - sumsq / (n * n);
  }

  int build(std::vector<size_t> samples, int depth) {
    const int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[node_id].distribution = distribution(samples);

    const bool pure = std::any_of(nodes[node_id].distribution.begin(),
                                  nodes[node_id].distribution.end(),
                                  [](double d) { return d == 1.0; });
    if (pure || depth >= config.max_depth || samples.size() < config.min_samples_split) {
      return node_id;
    }

    // seeded distinct candidate features, examined in ascending order
    std::set<uint32_t> candidates;
    const size_t dim = columns.size();
    const size_t want = std::min(features_per_split, dim);
    while (candidates.size() < want) {
      candidates.insert(static_cast<uint32_t>(rng.index(dim)));
    }

    std::vector<size_t> class_counts(static_cast<size_t>(num_classes), 0);
    for (size_t s : samples) class_counts[static_cast<size_t>(labels[s])]++;
    const double parent_gini = gini_from_counts(class_counts, samples.size());

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_impurity = parent_gini;

    std::vector<std::pair<double, int>> sorted;  // (value, label)
    for (uint32_t f : candidates) {
      sorted.clear();
      for (size_t s : samples) sorted.emplace_back(columns[f][s], labels[s]);
      std::sort(sorted.begin(), sorted.end());
      if (sorted.front().first == sorted.back().first) continue;

      std::vector<size_t> left(static_cast<size_t>(num_classes), 0);
      std::vector<size_t> right = class_counts;
      double left_sumsq = 0.0;
      double right_sumsq = 0.0;
      for (size_t c : right) {
        right_sumsq += static_cast<double>(c) * static_cast<double>(c);
      }

      const double n = static_cast<double>(samples.size());
      for (size_t i = 0; i + 1 < sorted.size(); ++i) {
        const auto k = static_cast<size_t>(sorted[i].second);
        left_sumsq += 2.0 * static_cast<double>(left[k]) + 1.0;
        right_sumsq -= 2.0 * static_cast<double>(right[k]) - 1.0;
        left[k]++;
        right[k]--;
        if (sorted[i].first == sorted[i + 1].first) continue;

        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        const double impurity =
            (nl * (1.0 - left_sumsq / (nl * nl)) + nr * (1.0 - right_sumsq / (nr * nr))) / n;
        if (impurity < best_impurity - 1e-12) {
          best_impurity = impurity;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
        }
      }
    }

    if (best_feature < 0) return node_id;  // no impurity-reducing split found

    std::vector<size_t> left_samples, right_samples;
    for (size_t s : samples) {
      if (columns[static_cast<size_t>(best_feature)][s] <= best_threshold) {
        left_samples.push_back(s);
      } else {
        right_samples.push_back(s);
      }
    }
    if (left_samples.empty() || right_samples.empty()) return node_id;

    samples.clear();
    samples.shrink_to_fit();
    nodes[node_id].feature = best_feature;
    nodes[node_id].threshold = best_threshold;
    const int left_id = build(std::move(left_samples), depth + 1);
    nodes[node_id].left = left_id;
    const int right_id = build(std::move(right_samples), depth + 1);
    nodes[node_id].right = right_id;
    return node_id;
  }
};

}  // namespace

ForestModel forest_train(const std::vector<FeatureVector>& features,
                         const std::vector<int>& labels, int num_classes,
                         const ForestConfig& config) {
  if (features.empty()) throw ValidationError("forest_train: no samples");
  if (features.size() != labels.size()) {
    throw ValidationError("forest_train: feature/label count mismatch");
  }
  if (config.n_trees < 1) throw ConfigError("forest_train: n_trees must be >= 1");

  ForestModel model;
  model.config = config;
  model.num_classes = num_classes;
  model.feature_dim = features.front().dim;

  std::vector<int> zero_based(labels.size());
  std::set<int> distinct;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > num_classes) {
      throw ValidationError("forest_train: label outside 1.." + std::to_string(num_classes));
    }
    zero_based[i] = labels[i] - 1;
    distinct.insert(labels[i]);
  }

  if (distinct.size() < 2) {
    model.warnings.push_back("training set has a single class; the forest is constant");
  }

  // feature-major dense copy for split search
  const size_t dim = model.feature_dim;
  std::vector<std::vector<double>> columns(dim, std::vector<double>(features.size(), 0.0));
  for (size_t s = 0; s < features.size(); ++s) {
    if (features[s].dim != model.feature_dim) {
      throw ValidationError("forest_train: inconsistent feature dims");
    }
    for (const auto& [idx, w] : features[s].entries) columns[idx][s] = w;
  }

  size_t per_split = config.features_per_split;
  if (per_split == 0) {
    per_split = std::max<size_t>(1, static_cast<size_t>(std::sqrt(static_cast<double>(dim))));
  }

  for (int t = 0; t < config.n_trees; ++t) {
    Rng rng(Rng::derive(config.seed, static_cast<uint64_t>(t)));
    std::vector<size_t> root_samples(features.size());
    if (config.bootstrap) {
      for (auto& s : root_samples) s = rng.index(features.size());
      std::sort(root_samples.begin(), root_samples.end());
    } else {
      std::iota(root_samples.begin(), root_samples.end(), size_t{0});
    }
    TreeBuilder builder{columns, zero_based, num_classes, config, per_split, rng, {}};
    builder.build(std::move(root_samples), 0);
    model.trees.push_back(std::move(builder.nodes));
  }
  return model;
}

std::vector<double> forest_predict_proba(const ForestModel& model,
                                         const FeatureVector& features) {
  if (model.trees.empty()) throw ValidationError("forest_predict: empty model");
  std::vector<double> proba(static_cast<size_t>(model.num_classes), 0.0);
  for (const auto& tree : model.trees) {
    int node = 0;
    while (tree[static_cast<size_t>(node)].feature >= 0) {
      const auto& n = tree[static_cast<size_t>(node)];
      node = value_at(features, static_cast<uint32_t>(n.feature)) <= n.threshold ? n.left
                                                                                 : n.right;
    }
    const auto& dist = tree[static_cast<size_t>(node)].distribution;
    for (size_t c = 0; c < proba.size(); ++c) proba[c] += dist[c];
  }
  for (double& p : proba) p /= static_cast<double>(model.trees.size());
  return proba;
}

int forest_predict(const ForestModel& model, const FeatureVector& features) {
  const auto proba = forest_predict_proba(model, features);
  size_t best = 0;
  for (size_t c = 1; c < proba.size(); ++c) {
    if (proba[c] > proba[best]) best = c;  // strict: ties keep the lowest id
  }
  return static_cast<int>(best) + 1;
}

nlohmann::json ForestModel::to_json() const {
  nlohmann::json trees_json = nlohmann::json::array();
  for (const auto& tree : trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree) {
      nodes.push_back({{"f", n.feature},
                       {"t", n.threshold},
                       {"l", n.left},
                       {"r", n.right},
                       {"d", n.distribution}});
    }
    trees_json.push_back(std::move(nodes));
  }
  return nlohmann::json{{"format_version", 1},
                        {"model", "random_forest"},
                        {"num_classes", num_classes},
                        {"feature_dim", feature_dim},
                        {"n_trees", config.n_trees},
                        {"max_depth", config.max_depth},
                        {"bootstrap", config.bootstrap},
                        {"seed", config.seed},
                        {"warnings", warnings},
                        {"trees", trees_json}};
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
  if (j.value("format_version", 0) != 1 || j.value("model", "") != "random_forest") {
    throw ParseError("not a version-1 random-forest model file");
  }
  ForestModel m;
  m.num_classes = j.at("num_classes").get<int>();
  m.feature_dim = j.at("feature_dim").get<uint32_t>();
  m.config.n_trees = j.at("n_trees").get<int>();
  m.config.max_depth = j.at("max_depth").get<int>();
  m.config.bootstrap = j.at("bootstrap").get<bool>();
  m.config.seed = j.at("seed").get<uint64_t>();
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
  for (const auto& tree_json : j.at("trees")) {
    std::vector<TreeNode> tree;
    for (const auto& n : tree_json) {
      tree.push_back({n.at("f").get<int>(), n.at("t").get<double>(), n.at("l").get<int>(),
                      n.at("r").get<int>(), n.at("d").get<std::vector<double>>()});
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

void save_forest(const ForestModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << model.to_json().dump() << "\n";
}

ForestModel load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return ForestModel::from_json(j);
}

}  // namespace salm::baselines
