#include "trafficbench/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace tb {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void apply_bounds(std::span<double> x, const std::optional<FeatureBounds>& clamp) {
    if (!clamp) return;
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], clamp->lo[j], clamp->hi[j]);
}

AttackResult make_result(const Dataset& data) {
    AttackResult r;
    r.adversarial = data.features;
    r.success.assign(data.n_rows(), 0);
    r.linf_norms.assign(data.n_rows(), 0.0);
    r.l2_norms.assign(data.n_rows(), 0.0);
    r.queries.assign(data.n_rows(), 0);
    return r;
}

void fill_norms(AttackResult& r, const Matrix& clean, std::size_t i) {
    double linf = 0.0, l2 = 0.0;
    for (std::size_t j = 0; j < clean.cols; ++j) {
        const double d = r.adversarial(i, j) - clean(i, j);
        linf = std::max(linf, std::abs(d));
        l2 += d * d;
    }
    r.linf_norms[i] = linf;
    r.l2_norms[i] = std::sqrt(l2);
}

void check_gradient_support(const Classifier& model, const char* attack) {
    if (!model.has_gradients())
        throw not_differentiable(std::string(attack) +
                                 ": model has no gradient support; craft against a surrogate "
                                 "(train_surrogate) and transfer");
}

AttackResult pgd_impl(const Classifier& model, const Dataset& data, const PgdConfig& cfg,
                      bool parallel) {
    check_gradient_support(model, "attack_pgd");
    if (!(cfg.epsilon >= 0.0)) throw tb_error("attack_pgd: epsilon must be >= 0");
    if (cfg.epsilon > 0.0 && cfg.alpha > cfg.epsilon)
        throw tb_error("attack_pgd: alpha must not exceed epsilon");
    if (cfg.iterations < 1) throw tb_error("attack_pgd: iterations must be >= 1");
    if (data.n_features() != model.n_features()) throw tb_error("attack_pgd: dimension mismatch");

    AttackResult result = make_result(data);
    const Matrix& clean = data.features;
    std::vector<int> clean_pred = predict_labels(model, clean);

    parallel_for(data.n_rows(), parallel, [&](std::size_t i) {
        Rng rng(cfg.seed ^ static_cast<std::uint64_t>(i));
        const auto x0 = clean.row(i);
        auto x = result.adversarial.row(i);
        if (cfg.random_start)
            for (std::size_t j = 0; j < x.size(); ++j)
                x[j] = x0[j] + rng.uniform(-cfg.epsilon, cfg.epsilon);
        apply_bounds(x, cfg.clamp);
        const int label = data.labels[i];
        for (std::size_t it = 0; it < cfg.iterations; ++it) {
            const std::vector<double> g = model.grad_loss(x, label);
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double stepped = x[j] + cfg.alpha * sign(g[j]);
                x[j] = std::clamp(stepped, x0[j] - cfg.epsilon, x0[j] + cfg.epsilon);
            }
            apply_bounds(x, cfg.clamp);
        }
        result.success[i] = argmax_class(model.predict_proba(x)) != clean_pred[i];
        fill_norms(result, clean, i);
    });
    return result;
}

AttackResult deepfool_impl(const Classifier& model, const Dataset& data,
                           const DeepFoolConfig& cfg, bool parallel) {
    check_gradient_support(model, "attack_deepfool");
    if (cfg.max_iterations < 1) throw tb_error("attack_deepfool: max_iterations must be >= 1");
    if (cfg.overshoot < 0.0) throw tb_error("attack_deepfool: overshoot must be >= 0");
    if (model.n_classes() < 2) throw tb_error("attack_deepfool: need at least 2 classes");
    if (data.n_features() != model.n_features())
        throw tb_error("attack_deepfool: dimension mismatch");

    AttackResult result = make_result(data);
    const Matrix& clean = data.features;
    const std::size_t d = data.n_features();
    const std::size_t n_classes = model.n_classes();
    std::vector<int> clean_pred = predict_labels(model, clean);

    parallel_for(data.n_rows(), parallel, [&](std::size_t i) {
        const auto x0 = clean.row(i);
        const auto orig = static_cast<std::size_t>(clean_pred[i]);
        std::vector<double> x(x0.begin(), x0.end());
        std::vector<double> r_total(d, 0.0);
        bool degenerate = false;

        for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
            const std::vector<double> proba = model.predict_proba(x);
            if (static_cast<std::size_t>(argmax_class(proba)) != orig) break;
            const Matrix jac = model.grad_logits(x);
            // log-probability differences equal logit differences
            const double lp_orig = std::log(std::max(proba[orig], 1e-300));

            double best_ratio = 0.0;
            std::size_t best_l = n_classes;
            double best_fp = 0.0, best_wnorm2 = 0.0;
            for (std::size_t l = 0; l < n_classes; ++l) {
                if (l == orig) continue;
                double wnorm2 = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double w = jac(l, j) - jac(orig, j);
                    wnorm2 += w * w;
                }
                const double fp = std::log(std::max(proba[l], 1e-300)) - lp_orig;
                const double wnorm = std::sqrt(wnorm2);
                if (wnorm < 1e-12) continue;
                const double ratio = std::abs(fp) / wnorm;
                if (best_l == n_classes || ratio < best_ratio) {
                    best_ratio = ratio;
                    best_l = l;
                    best_fp = fp;
                    best_wnorm2 = wnorm2;
                }
            }
            if (best_l == n_classes) {
                degenerate = true;  // all boundary gradients vanished
                break;
            }
            const double scale = (std::abs(best_fp) + 1e-4) / best_wnorm2;
            for (std::size_t j = 0; j < d; ++j) {
                const double step = scale * (jac(best_l, j) - jac(orig, j));
                r_total[j] += step;
                x[j] = x0[j] + r_total[j];
            }
            apply_bounds(x, cfg.clamp);
        }

        auto adv = result.adversarial.row(i);
        for (std::size_t j = 0; j < d; ++j) adv[j] = x0[j] + (1.0 + cfg.overshoot) * r_total[j];
        apply_bounds(adv, cfg.clamp);
        result.success[i] =
            !degenerate && argmax_class(model.predict_proba(adv)) != clean_pred[i];
        fill_norms(result, clean, i);
    });
    return result;
}

// margin loss: max(ln p_orig - max_{l != orig} ln p_l, -kappa)
double zoo_margin(const Classifier& model, std::span<const double> x, std::size_t orig,
                  double kappa, std::uint64_t& queries) {
    ++queries;
    const std::vector<double> p = model.predict_proba(x);
    const double lp_orig = std::log(std::max(p[orig], 1e-300));
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < p.size(); ++l)
        if (l != orig) best_other = std::max(best_other, std::log(std::max(p[l], 1e-300)));
    return std::max(lp_orig - best_other, -kappa);
}

AttackResult zoo_impl(const Classifier& model, const Dataset& data, const ZooConfig& cfg,
                      bool parallel) {
    if (!(cfg.h > 0.0)) throw tb_error("attack_zoo: h must be > 0");
    if (!(cfg.step_size > 0.0)) throw tb_error("attack_zoo: step_size must be > 0");
    if (cfg.iterations < 1) throw tb_error("attack_zoo: iterations must be >= 1");
    if (cfg.coords_per_iter < 1 || cfg.coords_per_iter > data.n_features())
        throw tb_error("attack_zoo: coords_per_iter out of range");
    if (data.n_features() != model.n_features()) throw tb_error("attack_zoo: dimension mismatch");

    AttackResult result = make_result(data);
    const Matrix& clean = data.features;
    const std::size_t d = data.n_features();
    std::vector<int> clean_pred = predict_labels(model, clean);

    parallel_for(data.n_rows(), parallel, [&](std::size_t i) {
        Rng rng(cfg.seed ^ static_cast<std::uint64_t>(i));
        const auto orig = static_cast<std::size_t>(clean_pred[i]);
        auto x = result.adversarial.row(i);
        std::vector<double> probe(x.begin(), x.end());
        std::vector<std::size_t> coords(d);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        std::uint64_t queries = 0;
        bool flipped = false;

        for (std::size_t it = 0; it < cfg.iterations && !flipped; ++it) {
            // draw coords_per_iter distinct coordinates (partial Fisher-Yates)
            for (std::size_t c = 0; c < cfg.coords_per_iter; ++c)
                std::swap(coords[c], coords[c + rng.index(d - c)]);
            for (std::size_t c = 0; c < cfg.coords_per_iter; ++c) {
                const std::size_t j = coords[c];
                probe.assign(x.begin(), x.end());
                probe[j] = x[j] + cfg.h;
                const double g_plus = zoo_margin(model, probe, orig, cfg.confidence_kappa, queries);
                probe[j] = x[j] - cfg.h;
                const double g_minus =
                    zoo_margin(model, probe, orig, cfg.confidence_kappa, queries);
                const double grad_est = (g_plus - g_minus) / (2.0 * cfg.h);
                x[j] -= cfg.step_size * grad_est;
            }
            apply_bounds(x, cfg.clamp);
            ++queries;  // per-iteration prediction check
            flipped = static_cast<std::size_t>(argmax_class(model.predict_proba(x))) != orig;
        }
        result.success[i] = flipped;
        result.queries[i] = queries;
        fill_norms(result, clean, i);
    });
    return result;
}

}  // namespace

AttackResult attack_pgd(const Classifier& model, const Dataset& data, const PgdConfig& cfg) {
    return pgd_impl(model, data, cfg, true);
}
AttackResult attack_pgd_serial(const Classifier& model, const Dataset& data,
                               const PgdConfig& cfg) {
    return pgd_impl(model, data, cfg, false);
}

AttackResult attack_deepfool(const Classifier& model, const Dataset& data,
                             const DeepFoolConfig& cfg) {
    return deepfool_impl(model, data, cfg, true);
}
AttackResult attack_deepfool_serial(const Classifier& model, const Dataset& data,
                                    const DeepFoolConfig& cfg) {
    return deepfool_impl(model, data, cfg, false);
}

AttackResult attack_zoo(const Classifier& model, const Dataset& data, const ZooConfig& cfg) {
    return zoo_impl(model, data, cfg, true);
}
AttackResult attack_zoo_serial(const Classifier& model, const Dataset& data,
                               const ZooConfig& cfg) {
    return zoo_impl(model, data, cfg, false);
}

SurrogateModel train_surrogate(const Classifier& target, const Dataset& train,
                               const TrainConfig& cfg) {
    if (train.n_features() != target.n_features())
        throw tb_error("train_surrogate: dimension mismatch");
    const std::vector<int> target_labels = predict_labels(target, train.features);

    SurrogateModel s;
    s.model = init_neural(NeuralKind::mlp, train.n_features(), target.n_classes(), cfg.seed);
    train_neural_inplace(s.model, train.features, target_labels, cfg);

    const std::vector<int> surrogate_labels = predict_labels(s.model, train.features);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < target_labels.size(); ++i)
        if (surrogate_labels[i] == target_labels[i]) ++agree;
    s.agreement = static_cast<double>(agree) / static_cast<double>(target_labels.size());
    s.low_agreement = s.agreement < 0.6;
    return s;
}

void rescore_success(AttackResult& result, const Classifier& target, const Matrix& clean) {
    const std::vector<int> clean_pred = predict_labels(target, clean);
    const std::vector<int> adv_pred = predict_labels(target, result.adversarial);
    for (std::size_t i = 0; i < result.success.size(); ++i)
        result.success[i] = adv_pred[i] != clean_pred[i];
}

void write_attack_result(const AttackResult& result, const Dataset& clean,
                         const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ostringstream csv;
        for (const auto& name : clean.schema.feature_names) csv << name << ',';
        csv << "class\n";
        char buf[64];
        for (std::size_t i = 0; i < result.adversarial.rows; ++i) {
            for (std::size_t j = 0; j < result.adversarial.cols; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", result.adversarial(i, j));
                csv << buf << ',';
            }
            csv << clean.schema.class_names[static_cast<std::size_t>(clean.labels[i])] << '\n';
        }
        write_file_atomic(dir / "adversarial.csv", csv.str());
    }
    {
        std::ostringstream meta;
        for (std::size_t i = 0; i < result.success.size(); ++i) {
            nlohmann::ordered_json j;
            j["index"] = i;
            j["success"] = static_cast<bool>(result.success[i]);
            j["linf"] = result.linf_norms[i];
            j["l2"] = result.l2_norms[i];
            j["queries"] = result.queries[i];
            meta << j.dump() << '\n';
        }
        write_file_atomic(dir / "meta.jsonl", meta.str());
    }
}

}  // namespace tb
