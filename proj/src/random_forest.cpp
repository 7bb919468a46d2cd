#include "flowae/random_forest.hpp"

#include "flowae/error.hpp"
#include "flowae/io_util.hpp"
#include "flowae/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace flowae {
namespace {

constexpr int kForestVersion = 1;

int argmax_lowest(std::span<const std::uint32_t> counts) {
    int best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    }
    return best;
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = -1.0;  // sum_c l_c^2 / n_l + sum_c r_c^2 / n_r; higher is purer
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, std::span<const int> y, std::size_t n_classes, const TreeParams& params,
                std::uint64_t seed)
        : x_(x), y_(y), n_classes_(n_classes), params_(params), rng_(seed),
          k_features_(params.features_per_split(x.cols())) {
        feature_order_.resize(x.cols());
        std::iota(feature_order_.begin(), feature_order_.end(), 0);
    }

    std::vector<TreeNode> build(std::vector<std::size_t> rows) {
        grow(std::move(rows), 0);
        return std::move(nodes_);
    }

private:
    int grow(std::vector<std::size_t> rows, int depth) {
        const int index = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        std::vector<std::uint32_t> counts(n_classes_, 0);
        for (auto r : rows) ++counts[static_cast<std::size_t>(y_[r])];
        const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
        const bool depth_capped = params_.max_depth > 0 && depth >= params_.max_depth;
        if (pure || depth_capped || rows.size() < params_.min_samples_split) {
            nodes_[static_cast<std::size_t>(index)].counts = std::move(counts);
            return index;
        }
        const Split split = best_split(rows, counts);
        if (split.feature < 0) {
            nodes_[static_cast<std::size_t>(index)].counts = std::move(counts);
            return index;
        }
        std::vector<std::size_t> left, right;
        for (auto r : rows) {
            (x_(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(std::move(left), depth + 1);
        const int rgt = grow(std::move(right), depth + 1);
        auto& node = nodes_[static_cast<std::size_t>(index)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = rgt;
        return index;
    }

    Split best_split(const std::vector<std::size_t>& rows, const std::vector<std::uint32_t>& totals) {
        rng_.shuffle(feature_order_);
        Split best;
        std::size_t evaluated = 0;
        std::vector<std::pair<double, int>> column(rows.size());
        std::vector<double> left(n_classes_);
        for (std::size_t f : feature_order_) {
            if (evaluated == k_features_) break;
            for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {x_(rows[i], f), y_[rows[i]]};
            std::sort(column.begin(), column.end());
            // Constant features do not count toward the per-split budget.
            if (column.front().first == column.back().first) continue;
            ++evaluated;

            std::fill(left.begin(), left.end(), 0.0);
            double left_sq = 0.0;
            double right_sq = 0.0;
            for (auto t : totals) right_sq += static_cast<double>(t) * static_cast<double>(t);
            const double n = static_cast<double>(rows.size());
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                const auto c = static_cast<std::size_t>(column[i].second);
                const double lc = left[c];
                const double rc = static_cast<double>(totals[c]) - lc;
                left_sq += 2.0 * lc + 1.0;
                right_sq -= 2.0 * rc - 1.0;
                left[c] = lc + 1.0;
                if (column[i].first == column[i + 1].first) continue;
                const double nl = static_cast<double>(i + 1);
                const double score = left_sq / nl + right_sq / (n - nl);
                const int fi = static_cast<int>(f);
                if (score > best.score || (score == best.score && fi < best.feature)) {
                    double thr = 0.5 * (column[i].first + column[i + 1].first);
                    if (thr >= column[i + 1].first) thr = column[i].first;
                    best = {fi, thr, score};
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    std::span<const int> y_;
    std::size_t n_classes_;
    TreeParams params_;
    Rng rng_;
    std::size_t k_features_;
    std::vector<std::size_t> feature_order_;
    std::vector<TreeNode> nodes_;
};

}  // namespace

std::size_t TreeParams::features_per_split(std::size_t n_features) const {
    switch (max_features) {
        case MaxFeatures::All:
            return n_features;
        case MaxFeatures::Fixed:
            return std::clamp<std::size_t>(fixed_features, 1, n_features);
        case MaxFeatures::Sqrt:
        default:
            return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features)))));
    }
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, std::size_t n_classes, std::size_t n_features)
    : nodes_(std::move(nodes)), n_classes_(n_classes), n_features_(n_features) {
    if (nodes_.empty()) throw FormatError("tree has no nodes");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.is_leaf()) {
            if (n.counts.size() != n_classes_) throw FormatError("leaf count vector has wrong length");
            if (std::accumulate(n.counts.begin(), n.counts.end(), std::uint64_t{0}) == 0) throw FormatError("empty leaf");
        } else {
            const auto sz = static_cast<int>(nodes_.size());
            if (static_cast<std::size_t>(n.feature) >= n_features_ || n.left <= static_cast<int>(i) ||
                n.right <= static_cast<int>(i) || n.left >= sz || n.right >= sz || !std::isfinite(n.threshold)) {
                throw FormatError("malformed internal node " + std::to_string(i));
            }
        }
    }
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& n = nodes_[i];
        i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes_[i];
}

int DecisionTree::predict(std::span<const double> row) const { return argmax_lowest(leaf_for(row).counts); }

int DecisionTree::depth() const {
    std::vector<int> d(nodes_.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (!nodes_[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return deepest;
}

DecisionTree fit_tree(const Matrix& x, std::span<const int> y, std::size_t n_classes, const TreeParams& params,
                      std::uint64_t seed, std::span<const std::size_t> sample) {
    if (x.rows() == 0 || x.cols() == 0) throw DataError("cannot fit a tree on empty input");
    if (y.size() != x.rows()) throw DataError("label count does not match row count");
    if (n_classes == 0) throw DataError("tree needs at least one class");
    for (int label : y) {
        if (label < 0 || static_cast<std::size_t>(label) >= n_classes) throw DataError("label out of range");
    }
    std::vector<std::size_t> rows;
    if (sample.empty()) {
        rows.resize(x.rows());
        std::iota(rows.begin(), rows.end(), 0);
    } else {
        rows.assign(sample.begin(), sample.end());
    }
    TreeBuilder builder(x, y, n_classes, params, seed);
    return DecisionTree(builder.build(std::move(rows)), n_classes, x.cols());
}

std::uint64_t forest_tree_seed(std::uint64_t master_seed, std::size_t index) { return mix_seed(master_seed, index); }

ForestModel fit_forest(const Matrix& x, std::span<const int> y, std::vector<std::string> class_names,
                       const ForestParams& params, std::uint64_t seed) {
    if (params.n_trees < 1) throw UsageError("forest needs at least one tree");
    if (x.rows() == 0) throw DataError("cannot fit a forest on empty input");
    if (y.size() != x.rows()) throw DataError("label count does not match row count");
    std::vector<bool> present(class_names.size(), false);
    for (int label : y) {
        if (label < 0 || static_cast<std::size_t>(label) >= class_names.size()) throw DataError("label out of range");
        present[static_cast<std::size_t>(label)] = true;
    }
    if (std::count(present.begin(), present.end(), true) < 2) throw DataError("forest needs at least 2 classes in the training data");

    ForestModel model;
    model.class_names = std::move(class_names);
    model.n_features = x.cols();
    model.params = params;
    model.trees.resize(params.n_trees);
    model.tree_seeds.resize(params.n_trees);
    const std::size_t n = x.rows();
    const std::size_t n_classes = model.class_names.size();

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t ti = 0; ti < static_cast<std::int64_t>(params.n_trees); ++ti) {
        const auto t = static_cast<std::size_t>(ti);
        const std::uint64_t tree_seed = forest_tree_seed(seed, t);
        Rng bootstrap(tree_seed);
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = static_cast<std::size_t>(bootstrap.below(n));
        model.tree_seeds[t] = tree_seed;
        model.trees[t] = fit_tree(x, y, n_classes, params.tree, mix_seed(tree_seed, 1), sample);
    }
    return model;
}

int predict_row(const ForestModel& model, std::span<const double> row) {
    std::vector<std::uint32_t> votes(model.class_names.size(), 0);
    for (const auto& tree : model.trees) ++votes[static_cast<std::size_t>(tree.predict(row))];
    return argmax_lowest(votes);
}

std::vector<int> predict(const ForestModel& model, const Matrix& x) {
    if (x.cols() != model.n_features) {
        throw DataError("forest expects " + std::to_string(model.n_features) + " features, got " + std::to_string(x.cols()));
    }
    std::vector<int> out(x.rows());
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(x.rows()); ++r) {
        out[static_cast<std::size_t>(r)] = predict_row(model, x.row(static_cast<std::size_t>(r)));
    }
    return out;
}

namespace reference {

std::vector<int> predict(const ForestModel& model, const Matrix& x) {
    if (x.cols() != model.n_features) throw DataError("forest feature width mismatch");
    std::vector<int> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(model, x.row(r));
    return out;
}

}  // namespace reference

std::string forest_to_json(const ForestModel& model) {
    nlohmann::json j;
    j["format"] = "flowae-forest";
    j["version"] = kForestVersion;
    j["n_features"] = model.n_features;
    j["class_names"] = model.class_names;
    j["params"] = {{"n_trees", model.params.n_trees},
                   {"max_depth", model.params.tree.max_depth},
                   {"min_samples_split", model.params.tree.min_samples_split},
                   {"max_features", static_cast<int>(model.params.tree.max_features)},
                   {"fixed_features", model.params.tree.fixed_features}};
    auto trees = nlohmann::json::array();
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        auto nodes = nlohmann::json::array();
        for (const auto& n : model.trees[t].nodes()) {
            if (n.is_leaf()) nodes.push_back({{"c", n.counts}});
            else nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
        }
        trees.push_back({{"seed", model.tree_seeds[t]}, {"nodes", nodes}});
    }
    j["trees"] = trees;
    return j.dump() + "\n";
}

ForestModel forest_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "flowae-forest") throw FormatError("not a forest file");
        if (j.at("version").get<int>() != kForestVersion) throw FormatError("unsupported forest version");
        ForestModel m;
        m.n_features = j.at("n_features").get<std::size_t>();
        m.class_names = j.at("class_names").get<std::vector<std::string>>();
        const auto& p = j.at("params");
        m.params.n_trees = p.at("n_trees").get<std::size_t>();
        m.params.tree.max_depth = p.at("max_depth").get<int>();
        m.params.tree.min_samples_split = p.at("min_samples_split").get<std::size_t>();
        m.params.tree.max_features = static_cast<MaxFeatures>(p.at("max_features").get<int>());
        m.params.tree.fixed_features = p.at("fixed_features").get<std::size_t>();
        for (const auto& t : j.at("trees")) {
            std::vector<TreeNode> nodes;
            for (const auto& n : t.at("nodes")) {
                TreeNode node;
                if (n.contains("c")) {
                    node.counts = n.at("c").get<std::vector<std::uint32_t>>();
                } else {
                    node.feature = n.at("f").get<int>();
                    node.threshold = n.at("t").get<double>();
                    node.left = n.at("l").get<int>();
                    node.right = n.at("r").get<int>();
                }
                nodes.push_back(std::move(node));
            }
            m.trees.emplace_back(std::move(nodes), m.class_names.size(), m.n_features);
            m.tree_seeds.push_back(t.at("seed").get<std::uint64_t>());
        }
        if (m.trees.empty()) throw FormatError("forest has no trees");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid forest file: ") + e.what());
    }
}

void save_forest(const ForestModel& model, const std::filesystem::path& path) {
    io::write_file_atomic(path, forest_to_json(model));
}

ForestModel load_forest(const std::filesystem::path& path) { return forest_from_json(io::read_file(path)); }

}  // namespace flowae
