#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "trafficbench/dataset.hpp"

using namespace tb;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs the installed CLI binary with stdout/stderr captured to temp files.
RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path out_file = fs::temp_directory_path() / ("tb_cli_out_" + std::to_string(counter));
    const fs::path err_file = fs::temp_directory_path() / ("tb_cli_err_" + std::to_string(counter));
    ++counter;
    const std::string cmd =
        std::string(TB_CLI_PATH) + " " + args + " > " + out_file.string() + " 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
#ifdef _WIN32
    r.exit_code = status;
#else
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
#endif
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    fs::remove(out_file);
    fs::remove(err_file);
    return r;
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "tb_cli_work";
    fs::create_directories(dir);
    return dir;
}

std::string slurp_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("cli: unknown flags exit 1 with usage text") {
    RunResult r = run_cli("synth --nonsense 4");
    CHECK(r.exit_code == 1);
    RunResult top = run_cli("--bogus");
    CHECK(top.exit_code == 1);
}

TEST_CASE("cli: --help exits 0 on every subcommand and lists flags with defaults") {
    CHECK(run_cli("--help").exit_code == 0);
    struct Expect {
        const char* cmd;
        std::vector<const char*> flags;
    };
    const std::vector<Expect> expects = {
        {"synth", {"--out", "--per-class", "--classes", "--informative", "--noise",
                   "--separation", "--seed"}},
        {"ingest", {"--data", "--label-column", "--out"}},
        {"rank-features", {"--data", "--bins", "--out"}},
        {"train", {"--data", "--model", "--out", "--seed", "--epochs", "--batch-size", "--lr",
                   "--knn-k", "--min-leaf"}},
        {"evaluate", {"--model", "--data", "--format", "--out"}},
        {"attack", {"--model", "--data", "--attack", "--out", "--epsilon", "--alpha", "--iters",
                    "--h", "--step", "--seed", "--surrogate-train"}},
        {"experiment", {"--plan", "--out", "--seed", "--k"}},
    };
    for (const auto& e : expects) {
        RunResult r = run_cli(std::string(e.cmd) + " --help");
        CHECK(r.exit_code == 0);
        for (const char* flag : e.flags) {
            INFO(e.cmd << " should document " << flag);
            CHECK(r.out.find(flag) != std::string::npos);
        }
    }
    // defaults are printed
    RunResult r = run_cli("train --help");
    CHECK(r.out.find("64") != std::string::npos);    // batch size default
    CHECK(r.out.find("0.01") != std::string::npos);  // learning rate default
}

TEST_CASE("cli: missing files exit 2 with a diagnostic") {
    RunResult r = run_cli("rank-features --data /nonexistent/areally.csv");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("cli: synth -> ingest -> rank -> train -> evaluate pipeline") {
    const fs::path dir = work_dir();
    const fs::path csv = dir / "data.csv";
    RunResult synth = run_cli("synth --out " + csv.string() +
                              " --per-class 150 --classes 2 --informative 3 --noise 1 "
                              "--separation 3.0 --seed 9");
    REQUIRE(synth.exit_code == 0);
    REQUIRE(fs::exists(csv));

    // ingest round-trips the canonical csv byte for byte
    const fs::path csv2 = dir / "data2.csv";
    REQUIRE(run_cli("ingest --data " + csv.string() + " --out " + csv2.string()).exit_code == 0);
    CHECK(slurp_file(csv) == slurp_file(csv2));

    RunResult rank = run_cli("rank-features --data " + csv.string() + " --bins 10");
    CHECK(rank.exit_code == 0);
    CHECK(rank.out.rfind("feature_index,feature_name,mi_nats", 0) == 0);
    CHECK(rank.out.find("inf0") != std::string::npos);

    const fs::path model = dir / "model.bin";
    REQUIRE(run_cli("train --data " + csv.string() + " --model c45 --out " + model.string())
                .exit_code == 0);
    RunResult eval = run_cli("evaluate --model " + model.string() + " --data " + csv.string());
    CHECK(eval.exit_code == 0);
    CHECK(eval.out.find("__macro__") != std::string::npos);

    RunResult eval_json = run_cli("evaluate --model " + model.string() + " --data " +
                                  csv.string() + " --format json");
    CHECK(eval_json.exit_code == 0);
    const auto j = nlohmann::json::parse(eval_json.out);
    CHECK(j.at("macro_f1").get<double>() >= 0.9);  // highly separable data
}

TEST_CASE("cli: zero-budget pgd leaves the dataset numerically untouched") {
    const fs::path dir = work_dir();
    const fs::path csv = dir / "atk.csv";
    REQUIRE(run_cli("synth --out " + csv.string() +
                    " --per-class 40 --classes 2 --informative 3 --separation 2 --seed 3")
                .exit_code == 0);
    const fs::path model = dir / "mlp.bin";
    REQUIRE(run_cli("train --data " + csv.string() + " --model mlp --out " + model.string() +
                    " --epochs 3 --seed 1")
                .exit_code == 0);
    const fs::path out = dir / "adv0";
    RunResult r = run_cli("attack --model " + model.string() + " --data " + csv.string() +
                          " --attack pgd --epsilon 0 --seed 5 --out " + out.string());
    REQUIRE(r.exit_code == 0);

    std::ifstream in_clean(csv);
    std::ifstream in_adv(out / "adversarial.csv");
    Dataset clean = parse_csv(in_clean, "class");
    Dataset adv = parse_csv(in_adv, "class");
    CHECK(bit_equal(clean.features, adv.features));

    RunResult zoo = run_cli("attack --model " + model.string() + " --data " + csv.string() +
                            " --attack zoo --iters 10 --seed 5 --out " + (dir / "advz").string());
    CHECK(zoo.exit_code == 0);
    CHECK(fs::exists(dir / "advz" / "meta.jsonl"));
    CHECK(fs::exists(dir / "advz" / "summary.json"));
}

TEST_CASE("cli: surrogate pathway demands training data for tree targets") {
    const fs::path dir = work_dir();
    const fs::path csv = dir / "sur.csv";
    REQUIRE(run_cli("synth --out " + csv.string() +
                    " --per-class 50 --classes 2 --informative 2 --separation 4 --seed 2")
                .exit_code == 0);
    const fs::path model = dir / "tree.bin";
    REQUIRE(run_cli("train --data " + csv.string() + " --model c45 --out " + model.string())
                .exit_code == 0);

    RunResult no_surrogate = run_cli("attack --model " + model.string() + " --data " +
                                     csv.string() + " --attack pgd --out " + (dir / "x").string());
    CHECK(no_surrogate.exit_code == 2);
    CHECK(no_surrogate.err.find("surrogate") != std::string::npos);

    RunResult ok = run_cli("attack --model " + model.string() + " --data " + csv.string() +
                           " --attack pgd --surrogate-train " + csv.string() + " --out " +
                           (dir / "adv_tree").string());
    CHECK(ok.exit_code == 0);
    CHECK(fs::exists(dir / "adv_tree" / "adversarial.csv"));
}

TEST_CASE("cli: experiment runs a plan and reruns byte-identically") {
    const fs::path dir = work_dir();
    const fs::path plan = dir / "plan.json";
    {
        std::ofstream out(plan);
        out << R"({
            "name": "cli-exp",
            "dataset": {"kind": "synthetic",
                        "spec": {"n_per_class": 80, "n_classes": 2, "n_informative": 5,
                                 "n_noise": 1, "class_separation": 1.5, "seed": 4}},
            "k_features": 4,
            "models": ["c45", "mlp"],
            "attacks": ["pgd"],
            "train": {"epochs": 5},
            "seed": 77
        })";
    }
    const fs::path out_a = dir / "exp_a";
    const fs::path out_b = dir / "exp_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    REQUIRE(run_cli("experiment --plan " + plan.string() + " --out " + out_a.string())
                .exit_code == 0);
    REQUIRE(run_cli("experiment --plan " + plan.string() + " --out " + out_b.string())
                .exit_code == 0);

    for (const char* name : {"metrics.csv", "manifest.json", "report.json"}) {
        INFO(name);
        CHECK(slurp_file(out_a / name) == slurp_file(out_b / name));
    }
    CHECK(fs::exists(out_a / "adv" / "mlp_pgd" / "adversarial.csv"));
    CHECK(fs::exists(out_a / "adv" / "c45_pgd" / "adversarial.csv"));

    // one macro row per (model, attack) pair
    std::istringstream csv_in(slurp_file(out_a / "metrics.csv"));
    std::string line;
    std::size_t macro_rows = 0;
    while (std::getline(csv_in, line))
        if (line.find("__macro__") != std::string::npos) ++macro_rows;
    CHECK(macro_rows == 4);  // 2 models x (none + pgd)
}

TEST_CASE("cli: no bare partial files are left behind by failures") {
    const fs::path dir = work_dir();
    const fs::path bad_plan = dir / "bad_plan.json";
    {
        std::ofstream out(bad_plan);
        out << R"({"dataset": {"kind": "file", "path": "/definitely/missing.arff"}, "seed": 1})";
    }
    const fs::path out_dir = dir / "bad_exp";
    fs::remove_all(out_dir);
    RunResult r = run_cli("experiment --plan " + bad_plan.string() + " --out " + out_dir.string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("ingest") != std::string::npos);  // failure names the stage
    // nothing completed, so no finished outputs may exist; any debris must
    // carry the .partial suffix
    CHECK_FALSE(fs::exists(out_dir / "metrics.csv"));
    CHECK_FALSE(fs::exists(out_dir / "manifest.json"));
    if (fs::exists(out_dir))
        for (const auto& entry : fs::recursive_directory_iterator(out_dir)) {
            if (!entry.is_regular_file()) continue;
            INFO(entry.path().string());
            CHECK(entry.path().filename().string().ends_with(".partial"));
        }
}
