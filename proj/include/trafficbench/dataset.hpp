#ifndef TRAFFICBENCH_DATASET_HPP
#define TRAFFICBENCH_DATASET_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trafficbench/core.hpp"

namespace tb {

enum class FeatureKind { time_micros, count, rate };

struct FeatureSchema {
    std::vector<std::string> feature_names;
    std::vector<FeatureKind> feature_kinds;  // same length as feature_names
    std::vector<std::string> class_names;

    std::size_t n_features() const { return feature_names.size(); }
    std::size_t n_classes() const { return class_names.size(); }

    void validate() const;  // unique names, non-empty classes, kind arity
    std::uint64_t fingerprint() const;

    bool operator==(const FeatureSchema&) const = default;
};

/// Feature matrix + integer labels + schema. The currency between modules.
/// After ingestion every entry is finite and every label is in [0, C).
struct Dataset {
    Matrix features;          // N x D
    std::vector<int> labels;  // length N
    FeatureSchema schema;

    std::size_t n_rows() const { return features.rows; }
    std::size_t n_features() const { return features.cols; }
    std::size_t n_classes() const { return schema.class_names.size(); }

    void validate() const;
    std::uint64_t fingerprint() const;
};

struct SplitSpec {
    double train_fraction = 0.8;  // open interval (0, 1)
    std::uint64_t seed = 0;
    bool stratified = true;
};

/// Desk-scale synthetic corpus: class-conditional Gaussians on the
/// informative features, label-independent noise on the rest.
struct SyntheticSpec {
    std::size_t n_per_class = 100;
    std::size_t n_classes = 2;
    std::size_t n_informative = 1;
    std::size_t n_noise = 0;
    double class_separation = 1.0;
    std::uint64_t seed = 0;
};

struct ParseStats {
    std::size_t rows_dropped = 0;  // rows containing '?' in any attribute
};

/// ARFF subset: @relation, @attribute <name> numeric | {v1,...}, @data,
/// '%' comments, case-insensitive keywords. The last attribute must be the
/// nominal class attribute. Class indices follow declaration order.
Dataset parse_arff(std::istream& in, const std::optional<FeatureSchema>& schema_hint = {},
                   ParseStats* stats = nullptr);

/// RFC-4180-style CSV with a header row. Class indices follow first
/// appearance order in the body.
Dataset parse_csv(std::istream& in, const std::string& label_column, ParseStats* stats = nullptr);

/// Canonical on-disk serialization: CSV, doubles printed round-trip exact.
void write_csv(const Dataset& ds, std::ostream& out);

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

Dataset generate_synthetic(const SyntheticSpec& spec);

/// Row subset in the given order; schema unchanged.
Dataset select_rows(const Dataset& ds, std::span<const std::size_t> indices);

/// Keeps only rows whose class name does (or does not) start with prefix;
/// classes are re-indexed to the surviving names, declaration order kept.
/// Comparison is case-insensitive. Used for the VPN / Non-VPN selectors.
Dataset filter_classes_by_prefix(const Dataset& ds, const std::string& prefix, bool keep_matching);

// Schemas used throughout the tests and docs: 23 time-based flow features for
// ISCX (14 application classes), 22 flow features for NIMS (6 SSH classes).
FeatureSchema iscx_schema();
FeatureSchema nims_schema();

}  // namespace tb

#endif
