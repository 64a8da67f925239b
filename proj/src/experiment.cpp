#include "trafficbench/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "trafficbench/knn.hpp"
#include "trafficbench/tree.hpp"

namespace tb {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::none: return "none";
        case AttackKind::zoo: return "zoo";
        case AttackKind::pgd: return "pgd";
        case AttackKind::deepfool: return "deepfool";
    }
    return "?";
}

AttackKind attack_kind_from_string(const std::string& name) {
    if (name == "none") return AttackKind::none;
    if (name == "zoo") return AttackKind::zoo;
    if (name == "pgd") return AttackKind::pgd;
    if (name == "deepfool") return AttackKind::deepfool;
    throw tb_error("unknown attack kind '" + name + "'");
}

namespace {

std::string to_string(ClassSelector s) {
    switch (s) {
        case ClassSelector::combined: return "combined";
        case ClassSelector::vpn: return "vpn";
        case ClassSelector::nonvpn: return "nonvpn";
    }
    return "?";
}

ClassSelector selector_from_string(const std::string& name) {
    if (name == "combined") return ClassSelector::combined;
    if (name == "vpn") return ClassSelector::vpn;
    if (name == "nonvpn") return ClassSelector::nonvpn;
    throw tb_error("unknown class selector '" + name + "'");
}

// per-stage sub-seed salts
constexpr std::uint64_t kSplitSalt = 1;
constexpr std::uint64_t kTrainSalt = 2;
constexpr std::uint64_t kAttackSalt = 3;
constexpr std::uint64_t kSurrogateSalt = 4;

std::string fmt6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

void ExperimentPlan::validate() const {
    if (models.empty()) throw tb_error("plan: at least one model is required");
    if (k_features < 1) throw tb_error("plan: k_features must be >= 1");
    if (bins < 2) throw tb_error("plan: bins must be >= 2");
    if (!(split_spec.train_fraction > 0 && split_spec.train_fraction < 1))
        throw tb_error("plan: train_fraction must be in (0, 1)");
}

ExperimentPlan plan_from_json(const json& j) {
    ExperimentPlan p;
    p.name = j.value("name", p.name);
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        const std::string kind = d.value("kind", "synthetic");
        if (kind == "synthetic") {
            p.data.kind = DataSource::Kind::synthetic;
            if (d.contains("spec")) {
                const auto& s = d.at("spec");
                p.data.synth.n_per_class = s.value("n_per_class", p.data.synth.n_per_class);
                p.data.synth.n_classes = s.value("n_classes", p.data.synth.n_classes);
                p.data.synth.n_informative = s.value("n_informative", p.data.synth.n_informative);
                p.data.synth.n_noise = s.value("n_noise", p.data.synth.n_noise);
                p.data.synth.class_separation =
                    s.value("class_separation", p.data.synth.class_separation);
                p.data.synth.seed = s.value("seed", p.data.synth.seed);
            }
        } else if (kind == "file") {
            p.data.kind = DataSource::Kind::file;
            p.data.path = d.at("path").get<std::string>();
            p.data.label_column = d.value("label_column", p.data.label_column);
            p.data.selector = selector_from_string(d.value("selector", "combined"));
        } else {
            throw tb_error("plan: unknown dataset kind '" + kind + "'");
        }
    }
    p.k_features = j.value("k_features", p.k_features);
    p.bins = j.value("bins", p.bins);
    if (j.contains("models")) {
        p.models.clear();
        for (const auto& m : j.at("models")) p.models.push_back(model_kind_from_string(m));
    }
    if (j.contains("attacks")) {
        p.attacks.clear();
        for (const auto& a : j.at("attacks")) {
            const AttackKind kind = attack_kind_from_string(a);
            if (kind != AttackKind::none) p.attacks.push_back(kind);
        }
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        p.split_spec.train_fraction = s.value("train_fraction", p.split_spec.train_fraction);
        p.split_spec.stratified = s.value("stratified", p.split_spec.stratified);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        p.train.batch_size = t.value("batch_size", p.train.batch_size);
        p.train.learning_rate = t.value("learning_rate", p.train.learning_rate);
        p.train.epochs = t.value("epochs", p.train.epochs);
    }
    p.knn_k = j.value("knn_k", p.knn_k);
    p.min_leaf = j.value("min_leaf", p.min_leaf);
    if (j.contains("pgd")) {
        const auto& a = j.at("pgd");
        p.pgd.epsilon = a.value("epsilon", p.pgd.epsilon);
        p.pgd.alpha = a.value("alpha", p.pgd.alpha);
        p.pgd.iterations = a.value("iterations", p.pgd.iterations);
        p.pgd.random_start = a.value("random_start", p.pgd.random_start);
    }
    if (j.contains("deepfool")) {
        const auto& a = j.at("deepfool");
        p.deepfool.max_iterations = a.value("max_iterations", p.deepfool.max_iterations);
        p.deepfool.overshoot = a.value("overshoot", p.deepfool.overshoot);
    }
    if (j.contains("zoo")) {
        const auto& a = j.at("zoo");
        p.zoo.h = a.value("h", p.zoo.h);
        p.zoo.step_size = a.value("step_size", p.zoo.step_size);
        p.zoo.iterations = a.value("iterations", p.zoo.iterations);
        p.zoo.coords_per_iter = a.value("coords_per_iter", p.zoo.coords_per_iter);
        p.zoo.confidence_kappa = a.value("confidence_kappa", p.zoo.confidence_kappa);
    }
    p.seed = j.value("seed", p.seed);
    p.validate();
    return p;
}

json plan_to_json(const ExperimentPlan& p) {
    ordered_json j;
    j["name"] = p.name;
    ordered_json d;
    if (p.data.kind == DataSource::Kind::synthetic) {
        d["kind"] = "synthetic";
        d["spec"] = {{"n_per_class", p.data.synth.n_per_class},
                     {"n_classes", p.data.synth.n_classes},
                     {"n_informative", p.data.synth.n_informative},
                     {"n_noise", p.data.synth.n_noise},
                     {"class_separation", p.data.synth.class_separation},
                     {"seed", p.data.synth.seed}};
    } else {
        d["kind"] = "file";
        d["path"] = p.data.path.string();
        d["label_column"] = p.data.label_column;
        d["selector"] = to_string(p.data.selector);
    }
    j["dataset"] = d;
    j["k_features"] = p.k_features;
    j["bins"] = p.bins;
    std::vector<std::string> models, attacks;
    for (auto m : p.models) models.push_back(to_string(m));
    for (auto a : p.attacks) attacks.push_back(to_string(a));
    j["models"] = models;
    j["attacks"] = attacks;
    j["split"] = {{"train_fraction", p.split_spec.train_fraction},
                  {"stratified", p.split_spec.stratified}};
    j["train"] = {{"batch_size", p.train.batch_size},
                  {"learning_rate", p.train.learning_rate},
                  {"epochs", p.train.epochs}};
    j["knn_k"] = p.knn_k;
    j["min_leaf"] = p.min_leaf;
    j["pgd"] = {{"epsilon", p.pgd.epsilon},
                {"alpha", p.pgd.alpha},
                {"iterations", p.pgd.iterations},
                {"random_start", p.pgd.random_start}};
    j["deepfool"] = {{"max_iterations", p.deepfool.max_iterations},
                     {"overshoot", p.deepfool.overshoot}};
    j["zoo"] = {{"h", p.zoo.h},
                {"step_size", p.zoo.step_size},
                {"iterations", p.zoo.iterations},
                {"coords_per_iter", p.zoo.coords_per_iter},
                {"confidence_kappa", p.zoo.confidence_kappa}};
    j["seed"] = p.seed;
    return j;
}

namespace {

Dataset load_source(const DataSource& src) {
    if (src.kind == DataSource::Kind::synthetic) return generate_synthetic(src.synth);
    std::ifstream in(src.path);
    if (!in) throw tb_error("cannot open dataset: " + src.path.string());
    Dataset ds;
    const std::string ext = src.path.extension().string();
    if (ext == ".arff") {
        ds = parse_arff(in);
    } else {
        ds = parse_csv(in, src.label_column);
    }
    if (src.selector == ClassSelector::vpn) ds = filter_classes_by_prefix(ds, "vpn", true);
    if (src.selector == ClassSelector::nonvpn) ds = filter_classes_by_prefix(ds, "vpn", false);
    return ds;
}

struct TrainedEntry {
    std::unique_ptr<Classifier> model;
    std::unique_ptr<SurrogateModel> surrogate;  // built lazily for gradient attacks
};

std::unique_ptr<Classifier> train_model(ModelKind kind, const Dataset& train,
                                        const ExperimentPlan& plan) {
    TrainConfig cfg = plan.train;
    cfg.seed = mix_seed(plan.seed, kTrainSalt + static_cast<std::uint64_t>(kind) * 16);
    switch (kind) {
        case ModelKind::c45: return std::make_unique<TreeModel>(train_tree(train, plan.min_leaf));
        case ModelKind::knn: return std::make_unique<KnnModel>(train_knn(train, plan.knn_k));
        case ModelKind::mlp:
            return std::make_unique<NeuralModel>(train_neural(train, NeuralKind::mlp, cfg));
        case ModelKind::cnn1d:
            return std::make_unique<NeuralModel>(train_neural(train, NeuralKind::cnn1d, cfg));
        case ModelKind::rnn:
            return std::make_unique<NeuralModel>(train_neural(train, NeuralKind::rnn, cfg));
    }
    throw tb_error("unreachable model kind");
}

}  // namespace

void run_experiment(const ExperimentPlan& plan, ExperimentResult& result,
                    const std::filesystem::path* out_dir, std::ostream* progress) {
    plan.validate();
    result.plan = plan;
    result.cells.clear();

    auto note = [&](const std::string& line) {
        if (progress) *progress << line << '\n';
    };
    auto guarded = [&](const std::string& stage, auto&& fn) {
        try {
            return fn();
        } catch (const stage_error&) {
            throw;
        } catch (const std::exception& e) {
            throw stage_error(stage, e.what());
        }
    };

    const Dataset full = guarded("ingest", [&] { return load_source(plan.data); });
    note("ingest: " + std::to_string(full.n_rows()) + " rows, " +
         std::to_string(full.n_features()) + " features, " + std::to_string(full.n_classes()) +
         " classes");

    SplitSpec split_spec = plan.split_spec;
    split_spec.seed = mix_seed(plan.seed, kSplitSalt);
    const auto [train_raw, test_raw] =
        guarded("split", [&] { return split(full, split_spec); });
    note("split: " + std::to_string(train_raw.n_rows()) + " train / " +
         std::to_string(test_raw.n_rows()) + " test");

    result.ranking = guarded("rank-features",
                             [&] { return rank_features(train_raw, plan.bins); });
    const std::size_t k = std::min(plan.k_features, train_raw.n_features());
    const Dataset train_k =
        guarded("select-features", [&] { return select_top_k(train_raw, result.ranking, k); });
    const Dataset test_k =
        guarded("select-features", [&] { return select_top_k(test_raw, result.ranking, k); });
    result.selected_schema = train_k.schema;

    const ScalerParams scaler = guarded("fit-scaler", [&] { return fit_scaler(train_k); });
    const Dataset train_s = guarded("scale", [&] { return apply_scaler(train_k, scaler); });
    const Dataset test_s = guarded("scale", [&] { return apply_scaler(test_k, scaler); });

    // manifest first so partial failures still carry full provenance
    ordered_json manifest;
    manifest["tool"] = "trafficbench";
    manifest["version"] = kVersion;
    manifest["plan"] = plan_to_json(plan);
    manifest["dataset"] = {{"rows", full.n_rows()},
                           {"features", full.n_features()},
                           {"classes", full.schema.class_names},
                           {"fingerprint", full.fingerprint()},
                           {"train_rows", train_raw.n_rows()},
                           {"test_rows", test_raw.n_rows()}};
    ordered_json sel = ordered_json::array();
    for (const auto& e : result.ranking.entries) {
        sel.push_back({{"feature_index", e.feature_index},
                       {"feature_name", train_raw.schema.feature_names[e.feature_index]},
                       {"mi_nats", e.mi_nats}});
    }
    manifest["ranking"] = sel;
    manifest["selected_features"] = result.selected_schema.feature_names;
    manifest["seeds"] = {{"root", plan.seed},
                         {"split", split_spec.seed},
                         {"scaled_train_fingerprint", train_s.fingerprint()},
                         {"scaled_test_fingerprint", test_s.fingerprint()}};
    result.manifest = manifest;

    for (const ModelKind kind : plan.models) {
        const std::string model_name = to_string(kind);
        TrainedEntry entry;
        entry.model = guarded("train " + model_name, [&] { return train_model(kind, train_s, plan); });

        ExperimentCell clean_cell;
        clean_cell.model = kind;
        clean_cell.attack = AttackKind::none;
        clean_cell.report = guarded("evaluate " + model_name,
                                    [&] { return metrics(confusion(*entry.model, test_s)); });
        note(model_name + " clean: macro_f1=" + fmt6(clean_cell.report.macro_f1) +
             " accuracy=" + fmt6(clean_cell.report.accuracy));
        result.cells.push_back(std::move(clean_cell));
        const double clean_macro_f1 = result.cells.back().report.macro_f1;

        for (const AttackKind attack : plan.attacks) {
            if (attack == AttackKind::none) continue;
            const std::string stage = "attack " + to_string(attack) + " vs " + model_name;
            ExperimentCell cell;
            cell.model = kind;
            cell.attack = attack;
            AttackSummary summary;

            AttackResult attack_result = guarded(stage, [&] {
                const std::uint64_t attack_seed =
                    mix_seed(plan.seed, kAttackSalt + static_cast<std::uint64_t>(attack) * 64 +
                                            static_cast<std::uint64_t>(kind));
                if (attack == AttackKind::zoo) {
                    ZooConfig cfg = plan.zoo;
                    cfg.seed = attack_seed;
                    return attack_zoo(*entry.model, test_s, cfg);
                }
                const Classifier* gradient_model = entry.model.get();
                if (!entry.model->has_gradients()) {
                    if (!entry.surrogate) {
                        TrainConfig scfg = plan.train;
                        scfg.seed = mix_seed(plan.seed,
                                             kSurrogateSalt + static_cast<std::uint64_t>(kind));
                        entry.surrogate = std::make_unique<SurrogateModel>(
                            train_surrogate(*entry.model, train_s, scfg));
                        note(model_name + " surrogate agreement=" +
                             fmt6(entry.surrogate->agreement) +
                             (entry.surrogate->low_agreement ? " (low-agreement warning)" : ""));
                    }
                    gradient_model = &entry.surrogate->model;
                    summary.via_surrogate = true;
                    summary.surrogate_agreement = entry.surrogate->agreement;
                }
                AttackResult res;
                if (attack == AttackKind::pgd) {
                    PgdConfig cfg = plan.pgd;
                    cfg.seed = attack_seed;
                    res = attack_pgd(*gradient_model, test_s, cfg);
                } else {
                    res = attack_deepfool(*gradient_model, test_s, plan.deepfool);
                }
                if (summary.via_surrogate) rescore_success(res, *entry.model, test_s.features);
                return res;
            });

            Dataset adv = test_s;
            adv.features = attack_result.adversarial;
            cell.report = guarded("evaluate " + stage,
                                  [&] { return metrics(confusion(*entry.model, adv)); });

            const std::size_t n = attack_result.success.size();
            double mean_linf = 0, max_linf = 0, mean_l2 = 0, mean_q = 0;
            std::size_t wins = 0;
            for (std::size_t i = 0; i < n; ++i) {
                wins += attack_result.success[i];
                mean_linf += attack_result.linf_norms[i];
                max_linf = std::max(max_linf, attack_result.linf_norms[i]);
                mean_l2 += attack_result.l2_norms[i];
                mean_q += static_cast<double>(attack_result.queries[i]);
            }
            summary.success_rate = static_cast<double>(wins) / static_cast<double>(n);
            summary.mean_linf = mean_linf / static_cast<double>(n);
            summary.max_linf = max_linf;
            summary.mean_l2 = mean_l2 / static_cast<double>(n);
            summary.mean_queries = mean_q / static_cast<double>(n);
            summary.macro_f1_not_lowered = cell.report.macro_f1 >= clean_macro_f1;
            if (summary.macro_f1_not_lowered)
                note("warning: " + to_string(attack) + " did not lower " + model_name +
                     " macro F1 (" + fmt6(cell.report.macro_f1) + " vs clean " +
                     fmt6(clean_macro_f1) + ")");
            else
                note(model_name + " under " + to_string(attack) +
                     ": macro_f1=" + fmt6(cell.report.macro_f1) +
                     " success_rate=" + fmt6(summary.success_rate));
            cell.attack_summary = summary;

            if (out_dir) {
                guarded("write " + stage, [&] {
                    write_attack_result(attack_result, test_s,
                                        *out_dir / "adv" / (model_name + "_" + to_string(attack)));
                    return 0;
                });
            }
            result.cells.push_back(std::move(cell));
        }
    }
}

std::string metrics_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "dataset,model,attack,class,precision,recall,f1\n";
    for (const auto& cell : result.cells) {
        const auto& classes = result.selected_schema.class_names;
        for (std::size_t c = 0; c < cell.report.per_class.size(); ++c) {
            const auto& m = cell.report.per_class[c];
            out << result.plan.name << ',' << to_string(cell.model) << ','
                << to_string(cell.attack) << ',' << (c < classes.size() ? classes[c] : "?") << ','
                << fmt6(m.precision) << ',' << fmt6(m.recall) << ',' << fmt6(m.f1) << '\n';
        }
        out << result.plan.name << ',' << to_string(cell.model) << ',' << to_string(cell.attack)
            << ",__macro__," << fmt6(cell.report.macro_precision) << ','
            << fmt6(cell.report.macro_recall) << ',' << fmt6(cell.report.macro_f1) << '\n';
    }
    return out.str();
}

ordered_json report_json(const ExperimentResult& result) {
    ordered_json root;
    root["dataset"] = result.plan.name;
    root["classes"] = result.selected_schema.class_names;
    ordered_json cells = ordered_json::array();
    ordered_json violations = ordered_json::array();
    for (const auto& cell : result.cells) {
        ordered_json c;
        c["model"] = to_string(cell.model);
        c["attack"] = to_string(cell.attack);
        ordered_json confusion_rows = ordered_json::array();
        const auto& cm = cell.report.confusion;
        for (std::size_t t = 0; t < cm.n_classes; ++t) {
            ordered_json row = ordered_json::array();
            for (std::size_t p = 0; p < cm.n_classes; ++p) row.push_back(cm.at(t, p));
            confusion_rows.push_back(row);
        }
        c["confusion"] = confusion_rows;
        ordered_json per_class = ordered_json::array();
        for (const auto& m : cell.report.per_class)
            per_class.push_back(
                {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}});
        c["per_class"] = per_class;
        c["macro_precision"] = cell.report.macro_precision;
        c["macro_recall"] = cell.report.macro_recall;
        c["macro_f1"] = cell.report.macro_f1;
        c["accuracy"] = cell.report.accuracy;
        if (cell.attack_summary) {
            const auto& s = *cell.attack_summary;
            c["attack_summary"] = {{"success_rate", s.success_rate},
                                   {"mean_linf", s.mean_linf},
                                   {"max_linf", s.max_linf},
                                   {"mean_l2", s.mean_l2},
                                   {"mean_queries", s.mean_queries},
                                   {"via_surrogate", s.via_surrogate},
                                   {"surrogate_agreement", s.surrogate_agreement},
                                   {"macro_f1_not_lowered", s.macro_f1_not_lowered}};
            if (s.macro_f1_not_lowered)
                violations.push_back({{"model", to_string(cell.model)},
                                      {"attack", to_string(cell.attack)}});
        }
        cells.push_back(std::move(c));
    }
    root["cells"] = cells;
    root["attack_did_not_lower_f1"] = violations;
    return root;
}

void emit_report(const ExperimentResult& result, const std::filesystem::path& out_dir,
                 ReportFormat format) {
    if (result.cells.empty()) throw tb_error("emit_report: no results");
    std::filesystem::create_directories(out_dir);
    if (format == ReportFormat::csv) {
        write_file_atomic(out_dir / "metrics.csv", metrics_csv(result));
    } else {
        write_file_atomic(out_dir / "report.json", report_json(result).dump(2) + "\n");
    }
}

}  // namespace tb
