#ifndef TRAFFICBENCH_PREPROCESS_HPP
#define TRAFFICBENCH_PREPROCESS_HPP

#include <iosfwd>
#include <span>
#include <vector>

#include "trafficbench/dataset.hpp"

namespace tb {

/// Per-column z-score parameters, fitted on training rows only.
/// std is the population standard deviation (divide by N).
struct ScalerParams {
    std::vector<double> mean;
    std::vector<double> std;
    std::vector<std::uint8_t> constant_mask;  // true where the column had zero spread
};

ScalerParams fit_scaler(const Dataset& train);

/// (x - mean) / std per column; constant columns map to 0.
Dataset apply_scaler(const Dataset& ds, const ScalerParams& params);

/// Per-feature mutual information against the labels, sorted descending,
/// ties broken by ascending feature index. Scores are in nats.
struct FeatureRanking {
    struct Entry {
        std::size_t feature_index;
        double mi_nats;
    };
    std::vector<Entry> entries;
};

/// Rank-based discretization into (up to) `bins` equal-frequency bins.
/// Equal values always share a bin, so the result is deterministic and
/// invariant under strictly monotone transforms of the column.
std::vector<int> equal_frequency_bins(std::span<const double> column, std::size_t bins);

/// Plug-in MI of the equal-frequency-binned column against the labels:
/// sum p(b,c) ln(p(b,c) / (p(b) p(c))), 0 ln 0 = 0, clamped to >= 0.
double mutual_information(std::span<const double> column, std::span<const int> labels,
                          std::size_t bins);

FeatureRanking rank_features(const Dataset& train, std::size_t bins = 10);
FeatureRanking rank_features_serial(const Dataset& train, std::size_t bins = 10);

/// Dataset restricted to the k top-ranked features, columns in ranking order.
Dataset select_top_k(const Dataset& ds, const FeatureRanking& ranking, std::size_t k);

/// CSV: feature_index,feature_name,mi_nats in ranked order.
void write_ranking_csv(const FeatureRanking& ranking, const FeatureSchema& schema,
                       std::ostream& out);

}  // namespace tb

#endif
