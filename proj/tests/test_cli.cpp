#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

const std::filesystem::path kCli = YOU2ME_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli.string() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_capture(const std::string& args, std::string* out) {
    const auto tmp = std::filesystem::temp_directory_path() / "y2m_cli_stdout.txt";
    const std::string cmd = kCli.string() + " " + args + " >" + tmp.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream f(tmp);
    out->assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    std::filesystem::remove(tmp);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("synth") == 2);                       // missing --out
    CHECK(run("train --out /tmp/x") == 2);          // missing --dataset/--codebook
    CHECK(run("build-codebook --out /tmp/x") == 2); // missing --dataset
    CHECK(run("synth --out /tmp/x --bogus-flag") == 2);
}

TEST_CASE("help exits with 0") {
    CHECK(run("--help") == 0);
    CHECK(run("synth --help") == 0);
    CHECK(run("train --help") == 0);
    CHECK(run("eval --help") == 0);
}

TEST_CASE("data errors exit with 1") {
    CHECK(run("build-codebook --dataset /nonexistent/manifest.json --out /tmp/y2m_cli_cb") == 1);
    CHECK(run("quantstats --dataset /nonexistent/manifest.json --codebook /tmp/nope") == 1);
    CHECK(run("eval --dataset /nonexistent/manifest.json --codebook /tmp/nope "
              "--baseline stand") == 1);
}

TEST_CASE("gradcheck exits cleanly") {
    std::string out;
    CHECK(run_capture("gradcheck", &out) == 0);
    CHECK(out.find("classification max rel err") != std::string::npos);
    CHECK(out.find("regression") != std::string::npos);
}

TEST_CASE("pipeline subcommands chain on a tiny dataset") {
    const auto root = std::filesystem::temp_directory_path() / "y2m_cli_pipeline";
    std::filesystem::remove_all(root);
    std::filesystem::create_directories(root);
    const std::string data = (root / "data").string();
    const std::string cb = (root / "cb").string();
    const std::string ckpt = (root / "ckpt").string();
    const std::string manifest = data + "/manifest.json";

    {
        std::ofstream f(root / "synth.json");
        f << R"({"num_sequences": 3, "num_test_sequences": 1, "frames_per_sequence": 32})";
    }
    CHECK(run("synth --config " + (root / "synth.json").string() + " --out " + data +
              " --seed 5") == 0);
    CHECK(std::filesystem::exists(manifest));

    CHECK(run("build-codebook --dataset " + manifest + " --out " + cb +
              " --k-upper 4 --k-lower 2 --seed 1") == 0);

    std::string out;
    CHECK(run_capture("quantstats --dataset " + manifest + " --codebook " + cb, &out) == 0);
    CHECK(out.find("mean per-joint distance") != std::string::npos);

    const std::string train_common = " --dataset " + manifest + " --codebook " + cb +
                                     " --embed 4 --hidden 8 --window 16 --overlap 0 "
                                     "--batch 4 --epochs 1 --seed 3";
    CHECK(run("train" + train_common + " --head upper --out " + ckpt + "/upper") == 0);
    CHECK(run("train" + train_common + " --head lower --out " + ckpt + "/lower") == 0);
    const std::string up = ckpt + "/upper/ckpt_epoch_1.y2mc";
    const std::string low = ckpt + "/lower/ckpt_epoch_1.y2mc";
    CHECK(std::filesystem::exists(up));
    CHECK(std::filesystem::exists(ckpt + "/upper/loss_curve.csv"));

    // eval needs either a checkpoint or a baseline; with neither it is a
    // usage error even though the data paths are valid.
    CHECK(run("eval --dataset " + manifest + " --codebook " + cb) == 2);
    CHECK(run_capture("eval --dataset " + manifest + " --codebook " + cb + " --checkpoint " +
                          up + " --checkpoint-lower " + low + " --out " + (root / "rep").string(),
                      &out) == 0);
    CHECK(out.find("ALL") != std::string::npos);
    CHECK(std::filesystem::exists(root / "rep" / "report.csv"));
    CHECK(run("eval --dataset " + manifest + " --codebook " + cb + " --baseline stand") == 0);
    CHECK(run("eval --dataset " + manifest + " --codebook " + cb + " --checkpoint " + up +
              " --checkpoint-lower " + low + " --substitution zero") == 0);

    CHECK(run("infer --dataset " + manifest + " --codebook " + cb + " --checkpoint " + up +
              " --checkpoint-lower " + low + " --out " + (root / "pred").string()) == 0);
    CHECK(std::filesystem::exists(root / "pred" / "seq2_clusters.csv"));
    CHECK(std::filesystem::exists(root / "pred" / "seq2_skeletons.y2m"));

    // Corrupt checkpoint path is a data error.
    CHECK(run("eval --dataset " + manifest + " --codebook " + cb + " --checkpoint " +
              (root / "missing.y2mc").string()) == 1);
    std::filesystem::remove_all(root);
}
