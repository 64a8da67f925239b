// Compares the OpenMP kernels against their serial reference implementations
// and reports speedups. The serial variants are the same per-sample code run
// on one thread, so the outputs must match bit for bit; this harness verifies
// that too.

#include <chrono>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "trafficbench/attacks.hpp"
#include "trafficbench/experiment.hpp"
#include "trafficbench/knn.hpp"
#include "trafficbench/metrics.hpp"
#include "trafficbench/preprocess.hpp"

using namespace tb;
using clock_type = std::chrono::steady_clock;

namespace {

template <class F>
double time_ms(F&& f) {
    const auto t0 = clock_type::now();
    f();
    const auto t1 = clock_type::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-24s serial %9.1f ms   parallel %9.1f ms   speedup %5.2fx   %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trafficbench parallel-kernel benchmark"};
    std::size_t rows = 4000, features = 24;
    app.add_option("--rows", rows, "Synthetic rows per class")->capture_default_str();
    app.add_option("--features", features, "Feature count")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    std::printf("workers: %d\n\n", max_workers());

    SyntheticSpec spec;
    spec.n_per_class = rows / 2;
    spec.n_classes = 2;
    spec.n_informative = features;
    spec.class_separation = 0.6;
    spec.seed = 7;
    Dataset ds = generate_synthetic(spec);
    ScalerParams scaler = fit_scaler(ds);
    Dataset scaled = apply_scaler(ds, scaler);

    {
        FeatureRanking a, b;
        const double ts = time_ms([&] { a = rank_features_serial(scaled, 10); });
        const double tp = time_ms([&] { b = rank_features(scaled, 10); });
        bool same = a.entries.size() == b.entries.size();
        for (std::size_t i = 0; same && i < a.entries.size(); ++i)
            same = a.entries[i].feature_index == b.entries[i].feature_index &&
                   a.entries[i].mi_nats == b.entries[i].mi_nats;
        report("rank_features", ts, tp, same);
    }

    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 11;
    NeuralModel mlp = train_neural(scaled, NeuralKind::mlp, cfg);

    {
        ConfusionMatrix a, b;
        const double ts = time_ms([&] { a = confusion_serial(mlp, scaled); });
        const double tp = time_ms([&] { b = confusion(mlp, scaled); });
        report("confusion (mlp)", ts, tp, a.counts == b.counts);
    }
    {
        KnnModel knn = train_knn(scaled, 5);
        ConfusionMatrix a, b;
        const double ts = time_ms([&] { a = confusion_serial(knn, scaled); });
        const double tp = time_ms([&] { b = confusion(knn, scaled); });
        report("confusion (knn)", ts, tp, a.counts == b.counts);
    }

    // attacks run on a slice so the benchmark stays interactive
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < std::min<std::size_t>(512, scaled.n_rows()); ++i)
        idx.push_back(i);
    Dataset slice = select_rows(scaled, idx);

    {
        PgdConfig pcfg;
        pcfg.seed = 3;
        AttackResult a, b;
        const double ts = time_ms([&] { a = attack_pgd_serial(mlp, slice, pcfg); });
        const double tp = time_ms([&] { b = attack_pgd(mlp, slice, pcfg); });
        report("attack_pgd (mlp)", ts, tp,
               bit_equal(a.adversarial, b.adversarial) && a.success == b.success);
    }
    {
        DeepFoolConfig dcfg;
        AttackResult a, b;
        const double ts = time_ms([&] { a = attack_deepfool_serial(mlp, slice, dcfg); });
        const double tp = time_ms([&] { b = attack_deepfool(mlp, slice, dcfg); });
        report("attack_deepfool (mlp)", ts, tp,
               bit_equal(a.adversarial, b.adversarial) && a.success == b.success);
    }
    {
        ZooConfig zcfg;
        zcfg.seed = 5;
        AttackResult a, b;
        const double ts = time_ms([&] { a = attack_zoo_serial(mlp, slice, zcfg); });
        const double tp = time_ms([&] { b = attack_zoo(mlp, slice, zcfg); });
        report("attack_zoo (mlp)", ts, tp,
               bit_equal(a.adversarial, b.adversarial) && a.queries == b.queries);
    }
    return 0;
}
