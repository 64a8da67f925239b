#include "trafficbench/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tb {

namespace {

double entropy_from_counts(std::span<const std::size_t> counts, std::size_t total) {
    if (total == 0) return 0.0;
    double h = 0.0;
    for (std::size_t c : counts)
        if (c > 0) {
            const double p = static_cast<double>(c) / static_cast<double>(total);
            h -= p * std::log(p);
        }
    return h;
}

struct BestSplit {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain_ratio = -1.0;
};

struct Builder {
    const Dataset& data;
    std::size_t min_leaf;
    std::size_t n_classes;
    std::vector<TreeModel::Node> nodes;

    int build(std::vector<std::size_t>& rows) {
        std::vector<std::size_t> counts(n_classes, 0);
        for (std::size_t r : rows) ++counts[static_cast<std::size_t>(data.labels[r])];
        const bool pure =
            std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;

        BestSplit best;
        if (!pure && rows.size() >= 2 * min_leaf) best = find_split(rows, counts);
        if (!best.found) return make_leaf(counts, rows.size());

        std::vector<std::size_t> left, right;
        for (std::size_t r : rows)
            (data.features(r, best.feature) <= best.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        const int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[static_cast<std::size_t>(id)].feature = static_cast<int>(best.feature);
        nodes[static_cast<std::size_t>(id)].threshold = best.threshold;
        const int l = build(left);
        const int r = build(right);
        nodes[static_cast<std::size_t>(id)].left = l;
        nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    int make_leaf(const std::vector<std::size_t>& counts, std::size_t n) {
        TreeModel::Node leaf;
        leaf.proba.resize(n_classes);
        // Laplace smoothing: (n_c + 1) / (n + C)
        const double denom = static_cast<double>(n) + static_cast<double>(n_classes);
        for (std::size_t c = 0; c < n_classes; ++c)
            leaf.proba[c] = (static_cast<double>(counts[c]) + 1.0) / denom;
        nodes.push_back(std::move(leaf));
        return static_cast<int>(nodes.size() - 1);
    }

    BestSplit find_split(const std::vector<std::size_t>& rows,
                         const std::vector<std::size_t>& parent_counts) {
        BestSplit best;
        const std::size_t n = rows.size();
        const double parent_h = entropy_from_counts(parent_counts, n);
        std::vector<std::size_t> order(rows);
        std::vector<std::size_t> left_counts(n_classes);

        for (std::size_t j = 0; j < data.n_features(); ++j) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double va = data.features(a, j), vb = data.features(b, j);
                if (va != vb) return va < vb;
                return a < b;
            });
            std::fill(left_counts.begin(), left_counts.end(), 0);
            for (std::size_t p = 0; p + 1 < n; ++p) {
                ++left_counts[static_cast<std::size_t>(data.labels[order[p]])];
                const double v = data.features(order[p], j);
                const double v_next = data.features(order[p + 1], j);
                if (v == v_next) continue;  // only between distinct values
                const std::size_t n_left = p + 1, n_right = n - n_left;
                if (n_left < min_leaf || n_right < min_leaf) continue;

                double h_left = entropy_from_counts(left_counts, n_left);
                double h_right = 0.0;
                {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < n_classes; ++c) {
                        const std::size_t rc = parent_counts[c] - left_counts[c];
                        if (rc > 0) {
                            const double p_rc =
                                static_cast<double>(rc) / static_cast<double>(n_right);
                            acc -= p_rc * std::log(p_rc);
                        }
                    }
                    h_right = acc;
                }
                const double pl = static_cast<double>(n_left) / static_cast<double>(n);
                const double pr = 1.0 - pl;
                const double gain = parent_h - (pl * h_left + pr * h_right);
                if (gain <= 1e-12) continue;
                const double split_info = -(pl * std::log(pl) + pr * std::log(pr));
                if (split_info <= 0.0) continue;
                const double ratio = gain / split_info;
                if (ratio > best.gain_ratio + 1e-15) {
                    best.found = true;
                    best.feature = j;
                    best.threshold = 0.5 * (v + v_next);
                    best.gain_ratio = ratio;
                }
            }
        }
        return best;
    }
};

}  // namespace

std::vector<double> TreeModel::predict_proba(std::span<const double> x) const {
    if (x.size() != n_features_) throw tb_error("tree: feature dimension mismatch");
    int id = 0;
    while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
        const auto& nd = nodes[static_cast<std::size_t>(id)];
        id = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(id)].proba;
}

std::size_t TreeModel::depth() const {
    // iterative depth over the explicit node array
    struct Item {
        int id;
        std::size_t d;
    };
    std::size_t best = 0;
    std::vector<Item> stack{{0, 0}};
    while (!stack.empty()) {
        auto [id, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        const auto& nd = nodes[static_cast<std::size_t>(id)];
        if (nd.feature >= 0) {
            stack.push_back({nd.left, d + 1});
            stack.push_back({nd.right, d + 1});
        }
    }
    return best;
}

std::size_t TreeModel::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
}

TreeModel train_tree(const Dataset& train, std::size_t min_leaf) {
    if (train.n_rows() == 0) throw tb_error("train_tree: empty dataset");
    if (min_leaf < 1) throw tb_error("train_tree: min_leaf must be >= 1");
    Builder b{train, min_leaf, train.n_classes(), {}};
    std::vector<std::size_t> rows(train.n_rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    b.build(rows);

    TreeModel model;
    model.nodes = std::move(b.nodes);
    model.min_leaf = min_leaf;
    model.n_features_ = train.n_features();
    model.n_classes_ = train.n_classes();
    return model;
}

}  // namespace tb
