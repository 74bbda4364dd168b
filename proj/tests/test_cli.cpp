#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "ppdeid/cli.hpp"
#include "ppdeid/nn/checkpoint.hpp"

using namespace ppdeid;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("ppdeid_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("cli: usage errors exit with status 2") {
    CHECK(cli_run({"no-such-command"}) == 2);
    CHECK(cli_run({}) == 2);
    CHECK(cli_run({"synth-fixture"}) == 2); // missing required --out
}

TEST_CASE("cli: synth-fixture is byte-identical across invocations and writes a run manifest") {
    TempDir dir("synth");
    const std::string out_a = (dir.path / "a").string();
    const std::string out_b = (dir.path / "b").string();
    for (const auto& out : {out_a, out_b})
        REQUIRE(cli_run({"synth-fixture", "--out", out, "--subjects", "4", "--per-subject", "3",
                         "--seed", "7"}) == 0);

    int compared = 0;
    for (const auto& entry : fs::directory_iterator(out_a)) {
        const auto name = entry.path().filename().string();
        if (name.find("run_manifest") != std::string::npos) continue; // timestamps live here
        CHECK(slurp(entry.path()) == slurp(fs::path(out_b) / name));
        ++compared;
    }
    CHECK(compared == 13); // 12 images + manifest.csv
    CHECK(fs::exists(fs::path(out_a) / "synth-fixture_run_manifest.json"));
}

TEST_CASE("cli: train then deidentify keeps a one-to-one name mapping") {
    TempDir dir("train");
    const std::string fixture = (dir.path / "fix").string();
    REQUIRE(cli_run({"synth-fixture", "--out", fixture, "--subjects", "4", "--per-subject", "4",
                     "--seed", "3"}) == 0);

    const std::string config_path = (dir.path / "toy.cfg").string();
    {
        std::ofstream cfg(config_path);
        cfg << "gen_width = 0.125\ndisc_width = 0.125\nverif_width = 0.125\n"
            << "batch_size = 2\nepochs = 1\nlr_system = 2e-4\nseed = 5\n";
    }
    const std::string ckpt = (dir.path / "model.ppgn").string();
    REQUIRE(cli_run({"train", "--manifest", fixture + "/manifest.csv", "--config", config_path,
                     "--out", ckpt, "--ablation", "cgan_only"}) == 0);
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(ckpt + ".history.csv"));

    CheckpointBlob blob = load_checkpoint(ckpt);
    CHECK(blob.module_name == "training");
    CHECK(blob.step > 0);

    const std::string deid_dir = (dir.path / "deid").string();
    REQUIRE(cli_run({"deidentify", "--checkpoint", ckpt, "--in", fixture, "--out", deid_dir,
                     "--seed", "1"}) == 0);
    int inputs = 0, outputs = 0;
    for (const auto& e : fs::directory_iterator(fixture))
        if (e.path().extension() == ".png") {
            ++inputs;
            if (fs::exists(fs::path(deid_dir) / e.path().filename())) ++outputs;
        }
    CHECK(inputs == 16);
    CHECK(outputs == inputs);

    // identical invocation produces byte-identical outputs
    const std::string deid_dir2 = (dir.path / "deid2").string();
    REQUIRE(cli_run({"deidentify", "--checkpoint", ckpt, "--in", fixture, "--out", deid_dir2,
                     "--seed", "1"}) == 0);
    for (const auto& e : fs::directory_iterator(deid_dir)) {
        const auto name = e.path().filename().string();
        if (name.find("run_manifest") != std::string::npos) continue;
        CHECK(slurp(e.path()) == slurp(fs::path(deid_dir2) / name));
    }
}

TEST_CASE("cli: montage command composes sorted directory listings") {
    TempDir dir("montage");
    const std::string fixture = (dir.path / "fix").string();
    REQUIRE(cli_run({"synth-fixture", "--out", fixture, "--subjects", "2", "--per-subject", "2",
                     "--seed", "9"}) == 0);
    const std::string out_png = (dir.path / "grid.png").string();
    REQUIRE(cli_run({"montage", "--originals", fixture, "--generated", fixture, "--out",
                     out_png}) == 0);
    CHECK(fs::exists(out_png));
}

TEST_CASE("cli: module errors surface as exit 1") {
    CHECK(cli_run({"train", "--manifest", "/nonexistent/manifest.csv", "--out", "/tmp/x.ppgn"}) ==
          1);
}
