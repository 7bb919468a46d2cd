#pragma once

#include "flowae/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace flowae {

enum class MaxFeatures { Sqrt, All, Fixed };

struct TreeParams {
    /// 0 = grow until pure.
    int max_depth = 0;
    std::size_t min_samples_split = 2;
    MaxFeatures max_features = MaxFeatures::Sqrt;
    std::size_t fixed_features = 1;

    std::size_t features_per_split(std::size_t n_features) const;
};

/// Flattened in preorder; node 0 is the root.
struct TreeNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<std::uint32_t> counts;  // leaves only, one per class
    bool is_leaf() const { return feature < 0; }
};

class DecisionTree {
public:
    DecisionTree() = default;
    DecisionTree(std::vector<TreeNode> nodes, std::size_t n_classes, std::size_t n_features);

    /// Majority class of the reached leaf; ties go to the lowest class id.
    int predict(std::span<const double> row) const;
    const TreeNode& leaf_for(std::span<const double> row) const;

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t n_classes() const { return n_classes_; }
    std::size_t n_features() const { return n_features_; }
    int depth() const;

private:
    std::vector<TreeNode> nodes_;
    std::size_t n_classes_ = 0;
    std::size_t n_features_ = 0;
};

/// CART with Gini impurity. Candidate thresholds are midpoints between
/// consecutive distinct values; a row goes left when x <= threshold.
/// `sample` lists the training rows (repeats allowed); empty means all rows.
DecisionTree fit_tree(const Matrix& x, std::span<const int> y, std::size_t n_classes, const TreeParams& params,
                      std::uint64_t seed, std::span<const std::size_t> sample = {});

struct ForestParams {
    std::size_t n_trees = 100;
    TreeParams tree;
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    std::vector<std::uint64_t> tree_seeds;
    std::vector<std::string> class_names;
    std::size_t n_features = 0;
    ForestParams params;
};

/// Seed of tree `index`; each tree's bootstrap sample and feature draws depend only on it.
std::uint64_t forest_tree_seed(std::uint64_t master_seed, std::size_t index);

/// Bagged trees, trained in parallel; identical output for any thread count.
ForestModel fit_forest(const Matrix& x, std::span<const int> y, std::vector<std::string> class_names,
                       const ForestParams& params, std::uint64_t seed);

/// Majority vote of per-tree leaf classes; ties go to the lowest class id.
int predict_row(const ForestModel& model, std::span<const double> row);
std::vector<int> predict(const ForestModel& model, const Matrix& x);

namespace reference {
std::vector<int> predict(const ForestModel& model, const Matrix& x);
}

std::string forest_to_json(const ForestModel& model);
ForestModel forest_from_json(const std::string& text);
void save_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path);

}  // namespace flowae
