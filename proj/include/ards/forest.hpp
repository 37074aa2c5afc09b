#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace ards {

struct ForestConfig {
    std::size_t n_trees = 100;
    std::size_t max_depth = 0;          // 0 = unlimited
    std::size_t min_samples_split = 2;
    std::size_t features_per_split = 0; // 0 = ceil(sqrt(n_features))
    bool bootstrap = true;
    std::uint64_t seed = 0;

    std::size_t resolved_mtry(std::size_t n_features) const;
};

// Binary tree in preorder storage.  Interior nodes route row[feature] <= threshold
// to left; leaves carry the class-1 fraction of their training rows.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    double leaf_value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    double predict(const std::vector<double>& row) const;
};

struct RandomForest {
    ForestConfig config;
    std::size_t n_features = 0;
    std::vector<DecisionTree> trees;
    // Per tree, how often each training row entered the bootstrap sample;
    // rows with count 0 are that tree's out-of-bag set.  Empty when
    // bootstrap was disabled.
    std::vector<std::vector<std::uint32_t>> in_bag_counts;
};

// Deterministic given config.seed: tree t draws from a stream derived from
// (seed, t), so results are independent of build order and thread count.
// Throws SingleClassTraining when labels contain one class, DimensionMismatch
// on ragged rows or mismatched label counts.
RandomForest train_random_forest(const std::vector<std::vector<double>>& rows,
                                 const std::vector<int>& labels,
                                 const ForestConfig& config,
                                 std::size_t n_threads = 1);

// Mean of per-tree leaf class-1 fractions.
double rf_predict_proba(const RandomForest& forest, const std::vector<double>& row);

// Accuracy over rows that are out-of-bag for at least one tree, scoring each
// with only those trees.  Requires a forest trained with bootstrap.
double oob_accuracy(const RandomForest& forest,
                    const std::vector<std::vector<double>>& rows,
                    const std::vector<int>& labels);

void save_forest(const RandomForest& forest, const std::filesystem::path& path);
RandomForest load_forest(const std::filesystem::path& path);

// Best Gini split over the given candidate features, exposed so tests can
// compare the trainer's root decision against independent enumeration.
// Candidate thresholds are midpoints between consecutive distinct sorted
// values; ties prefer the lowest feature index, then the lowest threshold.
struct BestSplit {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double weighted_gini = 0.0;
};
BestSplit find_best_split(const std::vector<std::vector<double>>& rows,
                          const std::vector<int>& labels,
                          const std::vector<std::size_t>& sample_indices,
                          const std::vector<std::size_t>& candidate_features);

}  // namespace ards
