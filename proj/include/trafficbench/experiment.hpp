#ifndef TRAFFICBENCH_EXPERIMENT_HPP
#define TRAFFICBENCH_EXPERIMENT_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trafficbench/attacks.hpp"
#include "trafficbench/metrics.hpp"
#include "trafficbench/preprocess.hpp"

namespace tb {

enum class AttackKind { none, zoo, pgd, deepfool };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& name);

enum class ClassSelector { combined, vpn, nonvpn };

/// Where the experiment's rows come from: an ARFF/CSV file on disk or the
/// built-in synthetic generator.
struct DataSource {
    enum class Kind { synthetic, file } kind = Kind::synthetic;
    SyntheticSpec synth;
    std::filesystem::path path;
    std::string label_column = "class";
    ClassSelector selector = ClassSelector::combined;
};

/// One experiment = ingest, split 80/20, fit scaler on train, rank features
/// on train, select top-k, train every requested model, evaluate clean, then
/// re-evaluate under every requested attack. Everything is derived from one
/// seed. The clean baseline is always evaluated.
struct ExperimentPlan {
    std::string name = "experiment";
    DataSource data;
    std::size_t k_features = 5;
    std::size_t bins = 10;
    std::vector<ModelKind> models = {ModelKind::c45, ModelKind::knn, ModelKind::mlp,
                                     ModelKind::cnn1d, ModelKind::rnn};
    std::vector<AttackKind> attacks;  // 'none' implied, listed or not
    SplitSpec split_spec{0.8, 0, true};
    TrainConfig train;
    std::size_t knn_k = 5;
    std::size_t min_leaf = 2;
    PgdConfig pgd;
    DeepFoolConfig deepfool;
    ZooConfig zoo;
    std::uint64_t seed = 0;

    void validate() const;
};

ExperimentPlan plan_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const ExperimentPlan& plan);  // fully resolved, stable key order

struct AttackSummary {
    double success_rate = 0.0;
    double mean_linf = 0.0;
    double max_linf = 0.0;
    double mean_l2 = 0.0;
    double mean_queries = 0.0;
    bool via_surrogate = false;
    double surrogate_agreement = 0.0;
    bool macro_f1_not_lowered = false;  // flagged when the attack failed to hurt the model
};

struct ExperimentCell {
    ModelKind model;
    AttackKind attack;
    EvalReport report;
    std::optional<AttackSummary> attack_summary;  // empty for the clean baseline
};

struct ExperimentResult {
    ExperimentPlan plan;
    std::vector<ExperimentCell> cells;
    nlohmann::ordered_json manifest;
    FeatureRanking ranking;
    FeatureSchema selected_schema;
};

/// Runs the full pipeline. Cells completed before a failure are left in
/// `result` so callers can persist partial output; the error names the stage.
/// When out_dir is given, adversarial matrices are dumped under
/// out_dir/adv/<model>_<attack>/.
void run_experiment(const ExperimentPlan& plan, ExperimentResult& result,
                    const std::filesystem::path* out_dir = nullptr,
                    std::ostream* progress = nullptr);

enum class ReportFormat { csv, json };

/// metrics.csv rows: dataset,model,attack,class,precision,recall,f1 with a
/// class="__macro__" row per (model, attack); values at 6 decimal places.
/// report.json mirrors the full structure including confusion matrices and
/// attack norm summaries.
void emit_report(const ExperimentResult& result, const std::filesystem::path& out_dir,
                 ReportFormat format);

std::string metrics_csv(const ExperimentResult& result);
nlohmann::ordered_json report_json(const ExperimentResult& result);

}  // namespace tb

#endif
