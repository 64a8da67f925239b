#include "trafficbench/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace tb {

ScalerParams fit_scaler(const Dataset& train) {
    if (train.n_rows() == 0) throw tb_error("fit_scaler: empty dataset");
    const std::size_t n = train.n_rows(), d = train.n_features();
    ScalerParams p;
    p.mean.assign(d, 0.0);
    p.std.assign(d, 0.0);
    p.constant_mask.assign(d, 0);
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += train.features(i, j);
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dev = train.features(i, j) - mean;
            ss += dev * dev;
        }
        const double var = ss / static_cast<double>(n);
        p.mean[j] = mean;
        p.std[j] = std::sqrt(var);
        if (p.std[j] <= 0.0) {
            p.constant_mask[j] = 1;
            p.std[j] = 0.0;
        }
    }
    return p;
}

Dataset apply_scaler(const Dataset& ds, const ScalerParams& params) {
    if (ds.n_features() != params.mean.size())
        throw tb_error("apply_scaler: dimension mismatch");
    Dataset out = ds;
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
        if (params.constant_mask[j]) {
            for (std::size_t i = 0; i < ds.n_rows(); ++i) out.features(i, j) = 0.0;
        } else {
            const double mean = params.mean[j], sd = params.std[j];
            for (std::size_t i = 0; i < ds.n_rows(); ++i)
                out.features(i, j) = (ds.features(i, j) - mean) / sd;
        }
    }
    return out;
}

std::vector<int> equal_frequency_bins(std::span<const double> column, std::size_t bins) {
    const std::size_t n = column.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return column[a] < column[b]; });
    std::vector<int> out(n, 0);
    int prev_bin = 0;
    for (std::size_t p = 0; p < n; ++p) {
        int b = static_cast<int>(p * bins / n);
        // runs of equal values stay in one bin
        if (p > 0 && column[order[p]] == column[order[p - 1]]) b = prev_bin;
        out[order[p]] = b;
        prev_bin = b;
    }
    return out;
}

double mutual_information(std::span<const double> column, std::span<const int> labels,
                          std::size_t bins) {
    const std::size_t n = column.size();
    if (bins < 2) throw tb_error("mutual_information: bins must be >= 2");
    if (n < bins) throw tb_error("mutual_information: need at least `bins` samples");
    if (labels.size() != n) throw tb_error("mutual_information: label length mismatch");

    const auto binned = equal_frequency_bins(column, bins);
    int n_classes = 0;
    for (int y : labels) n_classes = std::max(n_classes, y + 1);

    std::vector<double> joint(bins * static_cast<std::size_t>(n_classes), 0.0);
    std::vector<double> pb(bins, 0.0), pc(static_cast<std::size_t>(n_classes), 0.0);
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = static_cast<std::size_t>(binned[i]);
        const auto c = static_cast<std::size_t>(labels[i]);
        joint[b * static_cast<std::size_t>(n_classes) + c] += w;
        pb[b] += w;
        pc[c] += w;
    }
    double mi = 0.0;
    for (std::size_t b = 0; b < bins; ++b)
        for (std::size_t c = 0; c < static_cast<std::size_t>(n_classes); ++c) {
            const double pbc = joint[b * static_cast<std::size_t>(n_classes) + c];
            if (pbc > 0.0) mi += pbc * std::log(pbc / (pb[b] * pc[c]));
        }
    return std::max(mi, 0.0);
}

namespace {

FeatureRanking rank_features_impl(const Dataset& train, std::size_t bins, bool parallel) {
    if (train.n_rows() == 0) throw tb_error("rank_features: empty dataset");
    const std::size_t d = train.n_features();
    std::vector<double> scores(d, 0.0);
    parallel_for(d, parallel, [&](std::size_t j) {
        std::vector<double> col(train.n_rows());
        for (std::size_t i = 0; i < train.n_rows(); ++i) col[i] = train.features(i, j);
        scores[j] = mutual_information(col, train.labels, bins);
    });
    FeatureRanking ranking;
    ranking.entries.resize(d);
    for (std::size_t j = 0; j < d; ++j) ranking.entries[j] = {j, scores[j]};
    std::sort(ranking.entries.begin(), ranking.entries.end(),
              [](const FeatureRanking::Entry& a, const FeatureRanking::Entry& b) {
                  if (a.mi_nats != b.mi_nats) return a.mi_nats > b.mi_nats;
                  return a.feature_index < b.feature_index;
              });
    return ranking;
}

}  // namespace

FeatureRanking rank_features(const Dataset& train, std::size_t bins) {
    return rank_features_impl(train, bins, true);
}

FeatureRanking rank_features_serial(const Dataset& train, std::size_t bins) {
    return rank_features_impl(train, bins, false);
}

Dataset select_top_k(const Dataset& ds, const FeatureRanking& ranking, std::size_t k) {
    if (k < 1 || k > ds.n_features()) throw tb_error("select_top_k: k out of range");
    if (ranking.entries.size() != ds.n_features())
        throw tb_error("select_top_k: ranking does not match dataset");
    Dataset out;
    out.schema.class_names = ds.schema.class_names;
    out.features = Matrix(ds.n_rows(), k);
    out.labels = ds.labels;
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t j = ranking.entries[r].feature_index;
        out.schema.feature_names.push_back(ds.schema.feature_names[j]);
        out.schema.feature_kinds.push_back(ds.schema.feature_kinds[j]);
        for (std::size_t i = 0; i < ds.n_rows(); ++i) out.features(i, r) = ds.features(i, j);
    }
    out.validate();
    return out;
}

void write_ranking_csv(const FeatureRanking& ranking, const FeatureSchema& schema,
                       std::ostream& out) {
    out << "feature_index,feature_name,mi_nats\n";
    char buf[64];
    for (const auto& e : ranking.entries) {
        std::snprintf(buf, sizeof buf, "%.17g", e.mi_nats);
        out << e.feature_index << ',' << schema.feature_names[e.feature_index] << ',' << buf
            << '\n';
    }
}

}  // namespace tb
