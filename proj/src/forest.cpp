#include "ards/forest.hpp"

#include "ards/error.hpp"
#include "ards/parallel.hpp"
#include "ards/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace ards {
namespace {

double gini_of_counts(double n0, double n1) {
    const double n = n0 + n1;
    if (n == 0.0) return 0.0;
    const double p0 = n0 / n, p1 = n1 / n;
    return 1.0 - p0 * p0 - p1 * p1;
}

class TreeBuilder {
  public:
    TreeBuilder(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                const ForestConfig& cfg, std::size_t n_features, Rng& rng)
        : rows_(rows), labels_(labels), cfg_(cfg), n_features_(n_features), rng_(rng),
          mtry_(cfg.resolved_mtry(n_features)) {}

    DecisionTree build(const std::vector<std::size_t>& sample_indices) {
        DecisionTree tree;
        grow(tree, sample_indices, 0);
        return tree;
    }

  private:
    std::size_t grow(DecisionTree& tree, const std::vector<std::size_t>& indices,
                     std::size_t depth) {
        const std::size_t node_index = tree.nodes.size();
        tree.nodes.emplace_back();

        std::size_t n1 = 0;
        for (std::size_t s : indices) n1 += static_cast<std::size_t>(labels_[s] == 1);
        tree.nodes[node_index].leaf_value =
            static_cast<double>(n1) / static_cast<double>(indices.size());

        const bool pure = (n1 == 0 || n1 == indices.size());
        const bool too_small = indices.size() < cfg_.min_samples_split;
        const bool too_deep = (cfg_.max_depth > 0 && depth >= cfg_.max_depth);
        if (pure || too_small || too_deep) return node_index;

        const auto candidates = draw_feature_subset();
        const BestSplit best = find_best_split(rows_, labels_, indices, candidates);
        if (!best.found) return node_index;

        std::vector<std::size_t> left, right;
        for (std::size_t s : indices) {
            (rows_[s][best.feature] <= best.threshold ? left : right).push_back(s);
        }
        if (left.empty() || right.empty()) return node_index;

        tree.nodes[node_index].feature = static_cast<int>(best.feature);
        tree.nodes[node_index].threshold = best.threshold;
        const std::size_t l = grow(tree, left, depth + 1);
        tree.nodes[node_index].left = l;
        const std::size_t r = grow(tree, right, depth + 1);
        tree.nodes[node_index].right = r;
        return node_index;
    }

    std::vector<std::size_t> draw_feature_subset() {
        std::vector<std::size_t> pool(n_features_);
        std::iota(pool.begin(), pool.end(), 0);
        for (std::size_t i = 0; i < mtry_; ++i) {
            const std::size_t j = i + rng_.bounded(n_features_ - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(mtry_);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    const std::vector<std::vector<double>>& rows_;
    const std::vector<int>& labels_;
    const ForestConfig& cfg_;
    std::size_t n_features_;
    Rng& rng_;
    std::size_t mtry_;
};

}  // namespace

std::size_t ForestConfig::resolved_mtry(std::size_t n_features) const {
    if (features_per_split > 0) return std::min(features_per_split, n_features);
    return static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(n_features))));
}

BestSplit find_best_split(const std::vector<std::vector<double>>& rows,
                          const std::vector<int>& labels,
                          const std::vector<std::size_t>& sample_indices,
                          const std::vector<std::size_t>& candidate_features) {
    BestSplit best;
    const double n = static_cast<double>(sample_indices.size());
    std::vector<double> vals;
    for (std::size_t f : candidate_features) {
        vals.clear();
        for (std::size_t s : sample_indices) vals.push_back(rows[s][f]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            const double thr = vals[i] + 0.5 * (vals[i + 1] - vals[i]);
            double l0 = 0, l1 = 0, r0 = 0, r1 = 0;
            for (std::size_t s : sample_indices) {
                const bool left = rows[s][f] <= thr;
                if (labels[s] == 1) (left ? l1 : r1) += 1.0;
                else (left ? l0 : r0) += 1.0;
            }
            const double wg = ((l0 + l1) / n) * gini_of_counts(l0, l1) +
                              ((r0 + r1) / n) * gini_of_counts(r0, r1);
            const bool better =
                !best.found || wg < best.weighted_gini ||
                (wg == best.weighted_gini &&
                 (f < best.feature || (f == best.feature && thr < best.threshold)));
            if (better) best = BestSplit{true, f, thr, wg};
        }
    }
    return best;
}

RandomForest train_random_forest(const std::vector<std::vector<double>>& rows,
                                 const std::vector<int>& labels,
                                 const ForestConfig& config,
                                 std::size_t n_threads) {
    if (rows.empty()) throw DimensionMismatch("forest training requires at least one row");
    if (rows.size() != labels.size()) {
        throw DimensionMismatch("row count " + std::to_string(rows.size()) +
                                " does not match label count " + std::to_string(labels.size()));
    }
    const std::size_t d = rows.front().size();
    if (d == 0) throw DimensionMismatch("forest training requires at least one feature");
    for (const auto& r : rows) {
        if (r.size() != d) throw DimensionMismatch("ragged feature rows");
    }
    const bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
    const bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
    if (!has0 || !has1) {
        throw SingleClassTraining("forest training requires both classes present");
    }
    if (config.n_trees == 0) throw ConfigInvalid("n_trees must be >= 1");

    RandomForest forest;
    forest.config = config;
    forest.n_features = d;
    forest.trees.resize(config.n_trees);
    if (config.bootstrap) forest.in_bag_counts.resize(config.n_trees);

    const std::size_t n = rows.size();
    parallel_for(config.n_trees, n_threads, [&](std::size_t t) {
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> indices;
        indices.reserve(n);
        if (config.bootstrap) {
            std::vector<std::uint32_t> counts(n, 0);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t pick = rng.bounded(n);
                indices.push_back(pick);
                ++counts[pick];
            }
            forest.in_bag_counts[t] = std::move(counts);
        } else {
            indices.resize(n);
            std::iota(indices.begin(), indices.end(), 0);
        }
        TreeBuilder builder(rows, labels, config, d, rng);
        forest.trees[t] = builder.build(indices);
    });
    return forest;
}

double DecisionTree::predict(const std::vector<double>& row) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        i = (row[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold)
                ? nodes[i].left
                : nodes[i].right;
    }
    return nodes[i].leaf_value;
}

double rf_predict_proba(const RandomForest& forest, const std::vector<double>& row) {
    if (row.size() != forest.n_features) {
        throw DimensionMismatch("predict row has " + std::to_string(row.size()) +
                                " features, forest expects " +
                                std::to_string(forest.n_features));
    }
    double sum = 0.0;
    for (const auto& tree : forest.trees) sum += tree.predict(row);
    return sum / static_cast<double>(forest.trees.size());
}

double oob_accuracy(const RandomForest& forest,
                    const std::vector<std::vector<double>>& rows,
                    const std::vector<int>& labels) {
    if (forest.in_bag_counts.empty()) {
        throw ConfigInvalid("out-of-bag accuracy requires a bootstrap-trained forest");
    }
    if (rows.size() != labels.size() ||
        rows.size() != forest.in_bag_counts.front().size()) {
        throw DimensionMismatch("out-of-bag evaluation rows must match the training set");
    }
    std::size_t scored = 0, correct = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double sum = 0.0;
        std::size_t n_trees = 0;
        for (std::size_t t = 0; t < forest.trees.size(); ++t) {
            if (forest.in_bag_counts[t][i] == 0) {
                sum += forest.trees[t].predict(rows[i]);
                ++n_trees;
            }
        }
        if (n_trees == 0) continue;
        ++scored;
        const int pred = (sum / static_cast<double>(n_trees)) > 0.5 ? 1 : 0;
        correct += static_cast<std::size_t>(pred == labels[i]);
    }
    if (scored == 0) {
        throw InsufficientSamples("no training row was out-of-bag for any tree");
    }
    return static_cast<double>(correct) / static_cast<double>(scored);
}

void save_forest(const RandomForest& forest, const std::filesystem::path& path) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : forest.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : tree.nodes) {
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.leaf_value});
        }
        trees.push_back(std::move(nodes));
    }
    nlohmann::json doc = {
        {"model", "random_forest"},
        {"config",
         {{"n_trees", forest.config.n_trees},
          {"max_depth", forest.config.max_depth},
          {"min_samples_split", forest.config.min_samples_split},
          {"features_per_split", forest.config.features_per_split},
          {"bootstrap", forest.config.bootstrap},
          {"seed", forest.config.seed}}},
        {"n_features", forest.n_features},
        {"trees", std::move(trees)},
        {"in_bag_counts", forest.in_bag_counts},
    };
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

RandomForest load_forest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    RandomForest forest;
    try {
        if (doc.at("model").get<std::string>() != "random_forest") {
            throw ParseError(path.string() + ": not a random forest document");
        }
        const auto& cfg = doc.at("config");
        forest.config.n_trees = cfg.at("n_trees").get<std::size_t>();
        forest.config.max_depth = cfg.at("max_depth").get<std::size_t>();
        forest.config.min_samples_split = cfg.at("min_samples_split").get<std::size_t>();
        forest.config.features_per_split = cfg.at("features_per_split").get<std::size_t>();
        forest.config.bootstrap = cfg.at("bootstrap").get<bool>();
        forest.config.seed = cfg.at("seed").get<std::uint64_t>();
        forest.n_features = doc.at("n_features").get<std::size_t>();
        for (const auto& tree_doc : doc.at("trees")) {
            DecisionTree tree;
            for (const auto& n : tree_doc) {
                TreeNode node;
                node.feature = n.at(0).get<int>();
                node.threshold = n.at(1).get<double>();
                node.left = n.at(2).get<std::size_t>();
                node.right = n.at(3).get<std::size_t>();
                node.leaf_value = n.at(4).get<double>();
                if (node.feature >= 0 && static_cast<std::size_t>(node.feature) >= forest.n_features) {
                    throw ParseError(path.string() + ": node feature out of range");
                }
                tree.nodes.push_back(node);
            }
            if (tree.nodes.empty()) throw ParseError(path.string() + ": empty tree");
            for (const auto& node : tree.nodes) {
                if (!node.is_leaf() &&
                    (node.left >= tree.nodes.size() || node.right >= tree.nodes.size())) {
                    throw ParseError(path.string() + ": node child out of range");
                }
            }
            forest.trees.push_back(std::move(tree));
        }
        forest.in_bag_counts =
            doc.at("in_bag_counts").get<std::vector<std::vector<std::uint32_t>>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (forest.trees.empty()) throw ParseError(path.string() + ": no trees");
    return forest;
}

}  // namespace ards
