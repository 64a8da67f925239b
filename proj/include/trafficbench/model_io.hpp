#ifndef TRAFFICBENCH_MODEL_IO_HPP
#define TRAFFICBENCH_MODEL_IO_HPP

#include <filesystem>
#include <memory>

#include "trafficbench/knn.hpp"
#include "trafficbench/neural.hpp"
#include "trafficbench/tree.hpp"

namespace tb {

/// Self-describing binary model container (see docs/model-format.md):
/// magic, kind tag, schema fingerprint, hyperparameters, then parameter
/// tensors as little-endian 64-bit doubles in row-major order. Round-trips
/// are bit-exact.
struct LoadedModel {
    std::unique_ptr<Classifier> model;
    ModelKind kind;
    std::uint64_t schema_fingerprint = 0;
};

void save_model(const TreeModel& m, std::uint64_t schema_fp, const std::filesystem::path& path);
void save_model(const KnnModel& m, std::uint64_t schema_fp, const std::filesystem::path& path);
void save_model(const NeuralModel& m, std::uint64_t schema_fp, const std::filesystem::path& path);

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace tb

#endif
