// trafficbench command-line front end: dataset ingestion, feature ranking,
// model training, evaluation, evasion attacks, and full experiment plans.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "trafficbench/attacks.hpp"
#include "trafficbench/experiment.hpp"
#include "trafficbench/knn.hpp"
#include "trafficbench/metrics.hpp"
#include "trafficbench/model_io.hpp"
#include "trafficbench/preprocess.hpp"
#include "trafficbench/tree.hpp"

namespace {

using namespace tb;

extern "C" void abort_handler(int) {
    // atomic writes leave only .partial files behind; nothing to clean up
    std::_Exit(2);
}

Dataset load_data_file(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw tb_error("cannot open dataset: " + path);
    std::filesystem::path p(path);
    if (p.extension() == ".arff") return parse_arff(in);
    return parse_csv(in, label_column);
}

Dataset load_data_file_stats(const std::string& path, const std::string& label_column,
                             ParseStats& stats) {
    std::ifstream in(path);
    if (!in) throw tb_error("cannot open dataset: " + path);
    std::filesystem::path p(path);
    if (p.extension() == ".arff") return parse_arff(in, {}, &stats);
    return parse_csv(in, label_column, &stats);
}

std::string dataset_to_csv(const Dataset& ds) {
    std::ostringstream out;
    write_csv(ds, out);
    return out.str();
}

int cmd_synth(const SyntheticSpec& spec, const std::string& out_path) {
    Dataset ds = generate_synthetic(spec);
    write_file_atomic(out_path, dataset_to_csv(ds));
    std::cerr << "synth: wrote " << ds.n_rows() << " rows x " << ds.n_features()
              << " features to " << out_path << "\n";
    return 0;
}

int cmd_ingest(const std::string& data, const std::string& label_column,
               const std::string& out_path) {
    ParseStats stats;
    Dataset ds = load_data_file_stats(data, label_column, stats);
    write_file_atomic(out_path, dataset_to_csv(ds));
    std::cerr << "ingest: rows=" << ds.n_rows() << " features=" << ds.n_features()
              << " classes=" << ds.n_classes() << " dropped=" << stats.rows_dropped << "\n";
    return 0;
}

int cmd_rank(const std::string& data, const std::string& label_column, std::size_t bins,
             const std::string& out_path) {
    Dataset ds = load_data_file(data, label_column);
    FeatureRanking ranking = rank_features(ds, bins);
    std::ostringstream csv;
    write_ranking_csv(ranking, ds.schema, csv);
    if (out_path.empty())
        std::cout << csv.str();
    else
        write_file_atomic(out_path, csv.str());
    return 0;
}

int cmd_train(const std::string& data, const std::string& label_column, const std::string& model,
              const std::string& out_path, const TrainConfig& cfg, std::size_t knn_k,
              std::size_t min_leaf) {
    Dataset ds = load_data_file(data, label_column);
    const std::uint64_t fp = ds.schema.fingerprint();
    const ModelKind kind = model_kind_from_string(model);
    switch (kind) {
        case ModelKind::c45: save_model(train_tree(ds, min_leaf), fp, out_path); break;
        case ModelKind::knn: save_model(train_knn(ds, knn_k), fp, out_path); break;
        case ModelKind::mlp: save_model(train_neural(ds, NeuralKind::mlp, cfg), fp, out_path); break;
        case ModelKind::cnn1d:
            save_model(train_neural(ds, NeuralKind::cnn1d, cfg), fp, out_path);
            break;
        case ModelKind::rnn: save_model(train_neural(ds, NeuralKind::rnn, cfg), fp, out_path); break;
    }
    std::cerr << "train: " << model << " on " << ds.n_rows() << " rows -> " << out_path << "\n";
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data,
                 const std::string& label_column, const std::string& format,
                 const std::string& out_path) {
    Dataset ds = load_data_file(data, label_column);
    LoadedModel lm = load_model(model_path);
    EvalReport report = metrics(confusion(*lm.model, ds));
    std::ostringstream out;
    if (format == "json") {
        nlohmann::ordered_json j;
        j["model"] = to_string(lm.kind);
        j["accuracy"] = report.accuracy;
        j["macro_precision"] = report.macro_precision;
        j["macro_recall"] = report.macro_recall;
        j["macro_f1"] = report.macro_f1;
        nlohmann::ordered_json per = nlohmann::ordered_json::array();
        for (std::size_t c = 0; c < report.per_class.size(); ++c)
            per.push_back({{"class", ds.schema.class_names[c]},
                           {"precision", report.per_class[c].precision},
                           {"recall", report.per_class[c].recall},
                           {"f1", report.per_class[c].f1}});
        j["per_class"] = per;
        out << j.dump(2) << "\n";
    } else {
        out << "class,precision,recall,f1\n";
        char buf[128];
        for (std::size_t c = 0; c < report.per_class.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f\n",
                          ds.schema.class_names[c].c_str(), report.per_class[c].precision,
                          report.per_class[c].recall, report.per_class[c].f1);
            out << buf;
        }
        char mbuf[128];
        std::snprintf(mbuf, sizeof mbuf, "__macro__,%.6f,%.6f,%.6f\n", report.macro_precision,
                      report.macro_recall, report.macro_f1);
        out << mbuf;
    }
    if (out_path.empty())
        std::cout << out.str();
    else
        write_file_atomic(out_path, out.str());
    return 0;
}

int cmd_attack(const std::string& model_path, const std::string& data,
               const std::string& label_column, const std::string& attack,
               const std::string& surrogate_train, const std::string& out_dir,
               const PgdConfig& pgd, const DeepFoolConfig& df, const ZooConfig& zoo,
               const TrainConfig& train_cfg) {
    Dataset ds = load_data_file(data, label_column);
    LoadedModel lm = load_model(model_path);
    const AttackKind kind = attack_kind_from_string(attack);

    std::unique_ptr<SurrogateModel> surrogate;
    const Classifier* gradient_model = lm.model.get();
    bool via_surrogate = false;
    if (kind != AttackKind::zoo && !lm.model->has_gradients()) {
        if (surrogate_train.empty())
            throw tb_error("model '" + to_string(lm.kind) +
                           "' has no gradients; pass --surrogate-train with training data to "
                           "craft via a distilled surrogate");
        Dataset tr = load_data_file(surrogate_train, label_column);
        surrogate = std::make_unique<SurrogateModel>(train_surrogate(*lm.model, tr, train_cfg));
        std::cerr << "surrogate agreement=" << surrogate->agreement
                  << (surrogate->low_agreement ? " (low-agreement warning)" : "") << "\n";
        gradient_model = &surrogate->model;
        via_surrogate = true;
    }

    AttackResult result;
    switch (kind) {
        case AttackKind::pgd: result = attack_pgd(*gradient_model, ds, pgd); break;
        case AttackKind::deepfool: result = attack_deepfool(*gradient_model, ds, df); break;
        case AttackKind::zoo: result = attack_zoo(*lm.model, ds, zoo); break;
        case AttackKind::none: throw tb_error("attack kind 'none' crafts nothing");
    }
    if (via_surrogate) rescore_success(result, *lm.model, ds.features);
    write_attack_result(result, ds, out_dir);

    Dataset adv = ds;
    adv.features = result.adversarial;
    EvalReport clean_report = metrics(confusion(*lm.model, ds));
    EvalReport adv_report = metrics(confusion(*lm.model, adv));
    std::size_t wins = 0;
    for (auto s : result.success) wins += s;
    nlohmann::ordered_json summary;
    summary["attack"] = attack;
    summary["samples"] = result.success.size();
    summary["success_rate"] =
        static_cast<double>(wins) / static_cast<double>(result.success.size());
    summary["clean_accuracy"] = clean_report.accuracy;
    summary["adversarial_accuracy"] = adv_report.accuracy;
    summary["clean_macro_f1"] = clean_report.macro_f1;
    summary["adversarial_macro_f1"] = adv_report.macro_f1;
    summary["via_surrogate"] = via_surrogate;
    write_file_atomic(std::filesystem::path(out_dir) / "summary.json",
                      summary.dump(2) + "\n");
    std::cerr << "attack: success_rate=" << summary["success_rate"]
              << " adversarial_accuracy=" << adv_report.accuracy << "\n";
    return 0;
}

int cmd_experiment(const std::string& plan_path, const std::string& out_dir,
                   std::optional<std::uint64_t> seed_override,
                   std::optional<std::size_t> k_override) {
    std::ifstream in(plan_path);
    if (!in) throw tb_error("cannot open plan: " + plan_path);
    nlohmann::json pj = nlohmann::json::parse(in);
    ExperimentPlan plan = plan_from_json(pj);
    if (seed_override) plan.seed = *seed_override;
    if (k_override) plan.k_features = *k_override;

    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);
    ExperimentResult result;
    try {
        run_experiment(plan, result, &out, &std::cerr);
    } catch (const stage_error& e) {
        // keep whatever completed before the failure
        if (!result.cells.empty()) {
            emit_report(result, out, ReportFormat::csv);
            emit_report(result, out, ReportFormat::json);
        }
        if (!result.manifest.is_null())
            write_file_atomic(out / "manifest.json", result.manifest.dump(2) + "\n");
        throw;
    }
    emit_report(result, out, ReportFormat::csv);
    emit_report(result, out, ReportFormat::json);
    write_file_atomic(out / "manifest.json", result.manifest.dump(2) + "\n");
    std::cerr << "experiment: " << result.cells.size() << " result cells -> " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, abort_handler);
    std::signal(SIGTERM, abort_handler);

    CLI::App app{"trafficbench: encrypted-traffic classifiers under evasion attacks"};
    app.require_subcommand(1);

    std::string data, out_path, label_column = "class", model_path, model = "mlp";
    std::string attack = "pgd", format = "csv", plan_path, surrogate_train;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::size_t bins = 10, k = 5, knn_k = 5, min_leaf = 2;
    SyntheticSpec synth;
    TrainConfig train_cfg;
    PgdConfig pgd;
    DeepFoolConfig deepfool;
    ZooConfig zoo;
    std::size_t iters = 0;
    bool has_iters = false;

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic flow-feature dataset");
    synth_cmd->add_option("--out", out_path, "Output CSV path")->required();
    synth_cmd->add_option("--per-class", synth.n_per_class, "Rows per class")
        ->capture_default_str();
    synth_cmd->add_option("--classes", synth.n_classes, "Number of classes")
        ->capture_default_str();
    synth_cmd->add_option("--informative", synth.n_informative, "Informative feature count")
        ->capture_default_str();
    synth_cmd->add_option("--noise", synth.n_noise, "Noise feature count")
        ->capture_default_str();
    synth_cmd->add_option("--separation", synth.class_separation, "Class mean separation")
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();

    auto* ingest = app.add_subcommand("ingest", "Parse ARFF/CSV and write canonical CSV");
    ingest->add_option("--data", data, "Input .arff or .csv path")->required();
    ingest->add_option("--label-column", label_column, "CSV label column name")
        ->capture_default_str();
    ingest->add_option("--out", out_path, "Output CSV path")->required();

    auto* rank = app.add_subcommand("rank-features", "Mutual-information feature ranking");
    rank->add_option("--data", data, "Input dataset path")->required();
    rank->add_option("--label-column", label_column, "CSV label column name")
        ->capture_default_str();
    rank->add_option("--bins", bins, "Equal-frequency bins for the MI estimator")
        ->capture_default_str();
    rank->add_option("--out", out_path, "Output CSV path (stdout when omitted)");

    auto* train = app.add_subcommand("train", "Train one classifier and save it");
    train->add_option("--data", data, "Training dataset path")->required();
    train->add_option("--label-column", label_column, "CSV label column name")
        ->capture_default_str();
    train->add_option("--model", model, "Model kind")
        ->check(CLI::IsMember({"c45", "knn", "mlp", "cnn1d", "rnn"}))
        ->capture_default_str();
    train->add_option("--out", model_path, "Output model path")->required();
    train->add_option("--seed", train_cfg.seed, "Training seed")->capture_default_str();
    train->add_option("--epochs", train_cfg.epochs, "SGD epochs")->capture_default_str();
    train->add_option("--batch-size", train_cfg.batch_size, "Mini-batch size")
        ->capture_default_str();
    train->add_option("--lr", train_cfg.learning_rate, "Learning rate")->capture_default_str();
    train->add_option("--knn-k", knn_k, "k for the knn model")->capture_default_str();
    train->add_option("--min-leaf", min_leaf, "Minimum rows per tree leaf")
        ->capture_default_str();

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a saved model on a dataset");
    evaluate->add_option("--model", model_path, "Saved model path")->required();
    evaluate->add_option("--data", data, "Evaluation dataset path")->required();
    evaluate->add_option("--label-column", label_column, "CSV label column name")
        ->capture_default_str();
    evaluate->add_option("--format", format, "Report format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    evaluate->add_option("--out", out_path, "Output path (stdout when omitted)");

    auto* attack_cmd = app.add_subcommand("attack", "Craft adversarial samples against a model");
    attack_cmd->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
    attack_cmd->add_option("--model", model_path, "Saved model path")->required();
    attack_cmd->add_option("--data", data, "Dataset to attack")->required();
    attack_cmd->add_option("--label-column", label_column, "CSV label column name")
        ->capture_default_str();
    attack_cmd->add_option("--attack", attack, "Attack kind")
        ->check(CLI::IsMember({"zoo", "pgd", "deepfool"}))
        ->capture_default_str();
    attack_cmd->add_option("--out", out_path, "Output directory")->required();
    attack_cmd->add_option("--epsilon", pgd.epsilon, "PGD L-inf budget")->capture_default_str();
    attack_cmd->add_option("--alpha", pgd.alpha, "PGD step size")->capture_default_str();
    auto* iters_opt =
        attack_cmd->add_option("--iters", iters, "Iteration count (pgd/deepfool/zoo)");
    attack_cmd->add_option("--h", zoo.h, "ZOO finite-difference step")->capture_default_str();
    attack_cmd->add_option("--step", zoo.step_size, "ZOO coordinate step size")
        ->capture_default_str();
    attack_cmd->add_option("--coords", zoo.coords_per_iter, "ZOO coordinates per iteration")
        ->capture_default_str();
    attack_cmd->add_option("--kappa", zoo.confidence_kappa, "ZOO confidence margin")
        ->capture_default_str();
    attack_cmd->add_option("--overshoot", deepfool.overshoot, "DeepFool overshoot")
        ->capture_default_str();
    auto* seed_opt = attack_cmd->add_option("--seed", seed, "Attack seed");
    attack_cmd->add_option("--surrogate-train", surrogate_train,
                           "Training data for the surrogate pathway (tree/knn targets)");

    auto* experiment =
        app.add_subcommand("experiment", "Run a full experiment plan (JSON) end to end");
    experiment->add_option("--plan", plan_path, "Plan JSON path")->required();
    experiment->add_option("--out", out_path, "Output directory")->required();
    auto* exp_seed = experiment->add_option("--seed", seed, "Override the plan seed");
    std::size_t k_exp = 5;
    auto* exp_k = experiment->add_option("--k", k_exp, "Override selected feature count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    (void)has_seed;
    (void)has_iters;
    (void)bins;
    (void)k;

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth, out_path);
        if (ingest->parsed()) return cmd_ingest(data, label_column, out_path);
        if (rank->parsed()) return cmd_rank(data, label_column, bins, out_path);
        if (train->parsed())
            return cmd_train(data, label_column, model, model_path, train_cfg, knn_k, min_leaf);
        if (evaluate->parsed())
            return cmd_evaluate(model_path, data, label_column, format, out_path);
        if (attack_cmd->parsed()) {
            if (*iters_opt) {
                pgd.iterations = iters;
                deepfool.max_iterations = iters;
                zoo.iterations = iters;
            }
            if (*seed_opt) {
                pgd.seed = seed;
                zoo.seed = seed;
            }
            return cmd_attack(model_path, data, label_column, attack, surrogate_train, out_path,
                              pgd, deepfool, zoo, train_cfg);
        }
        if (experiment->parsed()) {
            std::optional<std::uint64_t> seed_override;
            std::optional<std::size_t> k_override;
            if (*exp_seed) seed_override = seed;
            if (*exp_k) k_override = k_exp;
            return cmd_experiment(plan_path, out_path, seed_override, k_override);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
