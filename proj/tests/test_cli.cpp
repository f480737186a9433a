// End-to-end tests that spawn the twshed binary (path baked in via
// TWSHED_BIN) and inspect its artifacts, exit codes and determinism.

#include <sys/wait.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "tw/classifier.hpp"
#include "tw/dataset.hpp"
#include "tw/graph_build.hpp"
#include "tw/metrics.hpp"
#include "tw/model.hpp"
#include "tw/pca.hpp"
#include "tw/trainer.hpp"
#include "tw/watershed.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CmdResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "tw_cli" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

CmdResult run_cli(const std::string& args, const fs::path& capture_dir) {
    const fs::path out_file = capture_dir / "stdout.txt";
    const fs::path err_file = capture_dir / "stderr.txt";
    const std::string cmd = std::string(TWSHED_BIN) + " " + args + " > " + out_file.string() +
                            " 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

// Small labeled strip with hand-picked labels; spectra are distinct
// per pixel so PCA has variance to work with.
tw::HsiDataset strip_dataset(const std::vector<std::uint16_t>& labels, int bands, int n_classes) {
    tw::HsiDataset ds;
    ds.height = 1;
    ds.width = static_cast<int>(labels.size());
    ds.bands = bands;
    ds.n_classes = n_classes;
    ds.labels = labels;
    ds.cube.resize(labels.size() * static_cast<std::size_t>(bands));
    for (std::size_t i = 0; i < ds.cube.size(); ++i) {
        ds.cube[i] = static_cast<float>(i % 7) + 0.25f * static_cast<float>(i);
    }
    return ds;
}

void write_raster(const std::vector<std::uint16_t>& raster, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    for (const auto v : raster) {
        const char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
        out.write(bytes, 2);
    }
}

std::string q(const fs::path& p) { return p.string(); }

}  // namespace

TEST_CASE("make-synth writes a deterministic three-file dataset") {
    const fs::path dir = fresh_dir("synth_det");
    const std::string flags = " --h 16 --w 16 --bands 4 --classes 3 --seed 9";
    const auto r1 = run_cli("make-synth --out " + q(dir / "a") + flags, dir);
    const auto r2 = run_cli("make-synth --out " + q(dir / "b") + flags, dir);
    CHECK(r1.code == 0);
    CHECK(r2.code == 0);
    CHECK(r1.out.find("class 1:") != std::string::npos);

    int n_files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "a")) ++n_files;
    CHECK(n_files == 3);
    for (const char* name : {"cube.json", "cube.f32", "labels.u16"}) {
        CAPTURE(name);
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
        CHECK(!slurp(dir / "a" / name).empty());
    }
}

TEST_CASE("make-synth rejects a single class as a usage error") {
    const fs::path dir = fresh_dir("synth_bad");
    const auto r = run_cli("make-synth --out " + q(dir / "d") + " --classes 1", dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("--classes") != std::string::npos);
}

TEST_CASE("make-synth honors the unlabeled fraction") {
    const fs::path dir = fresh_dir("synth_unlab");
    const auto r = run_cli(
        "make-synth --out " + q(dir / "d") + " --h 20 --w 20 --bands 3 --classes 3 --seed 4" +
            " --unlabeled-frac 0.1",
        dir);
    CHECK(r.code == 0);
    const tw::HsiDataset ds = tw::load_dataset(q(dir / "d"));
    std::int64_t zeros = 0;
    for (const auto lab : ds.labels) zeros += lab == 0;
    CHECK(zeros == std::llround(0.1 * 400));
}

TEST_CASE("train writes a TWNET1 model and identical artifacts on rerun") {
    const fs::path dir = fresh_dir("train_det");
    run_cli("make-synth --out " + q(dir / "data") + " --h 20 --w 20 --bands 4 --classes 3 --seed 2",
            dir);
    const std::string common = " --data " + q(dir / "data") +
                               " --seed 5 --epochs 4 --batch-size 32 --embed-dim 8 --hidden 16"
                               " --patch 5 --train-frac 0.3";
    const auto r1 = run_cli("train" + common + " --out " + q(dir / "r1") + " --threads 2", dir);
    CHECK(r1.code == 0);
    CHECK(slurp(dir / "r1" / "model.twnet").substr(0, 6) == "TWNET1");

    std::ifstream log(dir / "r1" / "train_log.jsonl");
    std::string first_line;
    std::getline(log, first_line);
    const json echo = json::parse(first_line);
    CHECK(echo.at("format") == "twshed-run");
    CHECK(echo.at("seed") == 5);
    CHECK(!echo.contains("threads"));

    const auto r2 = run_cli("train" + common + " --out " + q(dir / "r2") + " --threads 1", dir);
    CHECK(r2.code == 0);
    CHECK(slurp(dir / "r1" / "model.twnet") == slurp(dir / "r2" / "model.twnet"));
    CHECK(slurp(dir / "r1" / "train_log.jsonl") == slurp(dir / "r2" / "train_log.jsonl"));
}

TEST_CASE("train with zero epochs leaves the model at its initialization") {
    const fs::path dir = fresh_dir("train_zero");
    run_cli("make-synth --out " + q(dir / "data") + " --h 12 --w 12 --bands 4 --classes 2 --seed 3",
            dir);
    const std::string common = "train --data " + q(dir / "data") +
                               " --seed 5 --epochs 0 --embed-dim 8 --hidden 16 --patch 5"
                               " --train-frac 0.3";
    const auto r = run_cli(common + " --out " + q(dir / "run"), dir);
    CHECK(r.code == 0);

    // The file stores f32 parameters, so compare against the f32 rounding
    // of a fresh initialization.
    const tw::Model loaded = tw::Model::load(q(dir / "run" / "model.twnet"));
    const tw::Model expected =
        tw::build_model(tw::mlp_architecture(4, 5, 5, {16}, 8), {4, 5, 5}, 5);
    REQUIRE(loaded.params.size() == expected.params.size());
    REQUIRE(loaded.running.size() == expected.running.size());
    int mismatches = 0;
    for (std::size_t i = 0; i < expected.params.size(); ++i) {
        mismatches +=
            loaded.params[i] != static_cast<double>(static_cast<float>(expected.params[i]));
    }
    for (std::size_t i = 0; i < expected.running.size(); ++i) {
        mismatches +=
            loaded.running[i] != static_cast<double>(static_cast<float>(expected.running[i]));
    }
    CHECK(mismatches == 0);

    const auto r2 = run_cli(common + " --out " + q(dir / "run2"), dir);
    CHECK(r2.code == 0);
    CHECK(slurp(dir / "run" / "model.twnet") == slurp(dir / "run2" / "model.twnet"));
}

TEST_CASE("train resumes from a saved model") {
    const fs::path dir = fresh_dir("train_resume");
    run_cli("make-synth --out " + q(dir / "data") + " --h 14 --w 14 --bands 4 --classes 2 --seed 8",
            dir);
    const std::string common = "train --data " + q(dir / "data") +
                               " --seed 5 --batch-size 32 --embed-dim 8 --hidden 16 --patch 5"
                               " --train-frac 0.3";
    run_cli(common + " --epochs 2 --out " + q(dir / "a"), dir);

    // Zero extra epochs keeps the parameters bit-identical (f32 round-trips
    // losslessly through the in-memory f64 copy).
    const auto r0 = run_cli(common + " --epochs 0 --resume " + q(dir / "a" / "model.twnet") +
                                " --out " + q(dir / "b"),
                            dir);
    CHECK(r0.code == 0);
    const tw::Model a = tw::Model::load(q(dir / "a" / "model.twnet"));
    const tw::Model b = tw::Model::load(q(dir / "b" / "model.twnet"));
    CHECK(a.params == b.params);
    const json echo = json::parse(slurp(dir / "b" / "train_log.jsonl").substr(
        0, slurp(dir / "b" / "train_log.jsonl").find('\n')));
    CHECK(echo.at("resume") == true);

    // More epochs actually move the weights.
    const auto r1 = run_cli(common + " --epochs 2 --resume " + q(dir / "a" / "model.twnet") +
                                " --out " + q(dir / "c"),
                            dir);
    CHECK(r1.code == 0);
    const tw::Model c = tw::Model::load(q(dir / "c" / "model.twnet"));
    CHECK(a.params != c.params);

    // Architecture flags must match the resumed file.
    const auto bad = run_cli("train --data " + q(dir / "data") + " --out " + q(dir / "d") +
                                 " --epochs 1 --embed-dim 8 --hidden 24 --patch 5"
                                 " --train-frac 0.3 --resume " + q(dir / "a" / "model.twnet"),
                             dir);
    CHECK(bad.code == 1);
    CHECK(bad.err.find("resume") != std::string::npos);
}

TEST_CASE("predict writes a full-size raster and degenerates to one watershed") {
    const fs::path dir = fresh_dir("predict");
    run_cli("make-synth --out " + q(dir / "data") + " --h 20 --w 20 --bands 4 --classes 3 --seed 2",
            dir);
    run_cli("train --data " + q(dir / "data") + " --out " + q(dir / "run") +
                " --seed 5 --epochs 3 --batch-size 32 --embed-dim 8 --hidden 16 --patch 5"
                " --train-frac 0.3",
            dir);
    const std::string degenerate = "predict --data " + q(dir / "data") + " --model " +
                                   q(dir / "run" / "model.twnet") +
                                   " --n-estimators 1 --seed-frac 1 --feature-frac 1";
    const auto r = run_cli(degenerate + " --out " + q(dir / "p1") + " --seed 123", dir);
    CHECK(r.code == 0);
    const std::string raster_bytes = slurp(dir / "p1" / "pred.u16");
    CHECK(raster_bytes.size() == 2u * 20 * 20);

    const json meta = json::parse(slurp(dir / "p1" / "pred.json"));
    CHECK(meta.at("height") == 20);
    CHECK(meta.at("width") == 20);
    CHECK(meta.at("train_config").at("seed") == 5);

    // A one-estimator, full-seed, full-dimension ensemble must not depend
    // on the prediction seed.
    const auto r2 = run_cli(degenerate + " --out " + q(dir / "p2") + " --seed 999", dir);
    CHECK(r2.code == 0);
    CHECK(raster_bytes == slurp(dir / "p2" / "pred.u16"));

    // Same route rebuilt in-process: one seeded watershed on the
    // embedding-reweighted graph.
    const tw::HsiDataset ds = tw::load_dataset(q(dir / "data"));
    tw::SplitSpec spec;
    spec.fraction = 0.3;
    const tw::SplitMask mask = tw::split(ds, spec, 5);
    const tw::PcaBasis basis = tw::fit_pca(ds, ds.bands);
    const tw::ProjectedCube projected = tw::project_cube(ds, basis);
    tw::BuiltGraph built = tw::build_edge_set(ds, projected, ds.bands, 2);
    const tw::Model model = tw::Model::load(q(dir / "run" / "model.twnet"));
    const tw::Tensor emb = tw::embed_all(model, projected, built.vertex_pixel, 2);
    tw::reweight(built.graph, emb);
    tw::SeedSet seeds;
    for (int v = 0; v < built.graph.n_vertices; ++v) {
        const int pix = built.vertex_pixel[static_cast<std::size_t>(v)];
        if (mask.state[static_cast<std::size_t>(pix)] == tw::SplitMask::kTrain) {
            seeds.add(v, ds.labels[static_cast<std::size_t>(pix)] - 1);
        }
    }
    const std::vector<int> labels = tw::classify_single(built.graph, seeds);
    for (int v = 0; v < built.graph.n_vertices; ++v) {
        const int pix = built.vertex_pixel[static_cast<std::size_t>(v)];
        const int lo = static_cast<unsigned char>(raster_bytes[2 * pix]);
        const int hi = static_cast<unsigned char>(raster_bytes[2 * pix + 1]);
        CHECK(lo + 256 * hi == labels[static_cast<std::size_t>(v)] + 1);
    }
}

TEST_CASE("predict rejects a missing model file") {
    const fs::path dir = fresh_dir("predict_missing");
    run_cli("make-synth --out " + q(dir / "data") + " --h 8 --w 8 --bands 3 --classes 2 --seed 1",
            dir);
    const auto r = run_cli("predict --data " + q(dir / "data") + " --model " +
                               q(dir / "nope.twnet") + " --out " + q(dir / "p"),
                           dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("nope.twnet") != std::string::npos);
}

TEST_CASE("eval reproduces hand metrics from a crafted prediction") {
    const fs::path dir = fresh_dir("eval_hand");
    const tw::HsiDataset ds = strip_dataset({1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2}, 2, 2);
    tw::save_dataset(ds, q(dir / "data"));

    // Rebuild the split the CLI will use (fraction 0.1 puts 1 of 6 pixels
    // per class in train) and craft test predictions with confusion
    // [[4,1],[2,3]].
    tw::SplitSpec spec;
    spec.fraction = 0.1;
    const tw::SplitMask mask = tw::split(ds, spec, 40);
    std::vector<std::uint16_t> pred(12, 0);
    int seen1 = 0, seen2 = 0;
    for (int pix = 0; pix < 12; ++pix) {
        if (mask.state[static_cast<std::size_t>(pix)] != tw::SplitMask::kTest) continue;
        if (ds.labels[static_cast<std::size_t>(pix)] == 1) {
            pred[static_cast<std::size_t>(pix)] = ++seen1 <= 4 ? 1 : 2;
        } else {
            pred[static_cast<std::size_t>(pix)] = ++seen2 <= 2 ? 1 : 2;
        }
    }
    REQUIRE(seen1 == 5);
    REQUIRE(seen2 == 5);
    write_raster(pred, dir / "pred.u16");

    const auto r = run_cli("eval --data " + q(dir / "data") + " --pred " + q(dir / "pred.u16") +
                               " --out " + q(dir / "rep") + " --train-frac 0.1 --seed 40",
                           dir);
    CHECK(r.code == 0);
    CHECK(r.out.find("OA 0.7") != std::string::npos);
    const json rep = json::parse(slurp(dir / "rep" / "report.json"));
    CHECK(rep.at("oa").get<double>() == 0.7);
    CHECK(rep.at("aa").get<double>() == 0.7);
    CHECK(rep.at("kappa").get<double>() == 0.4);
    CHECK(rep.at("confusion") == json::parse("[[4,1],[2,3]]"));
    const std::string csv = slurp(dir / "rep" / "report.csv");
    CHECK(csv.rfind("class,train_n,test_n,accuracy\n", 0) == 0);
    CHECK(csv.find("1,1,5,0.8") != std::string::npos);
}

TEST_CASE("eval scores a perfect prediction at full accuracy") {
    const fs::path dir = fresh_dir("eval_perfect");
    run_cli("make-synth --out " + q(dir / "data") + " --h 10 --w 10 --bands 3 --classes 3 --seed 6",
            dir);
    const tw::HsiDataset ds = tw::load_dataset(q(dir / "data"));
    write_raster(ds.labels, dir / "pred.u16");
    const auto r = run_cli("eval --data " + q(dir / "data") + " --pred " + q(dir / "pred.u16") +
                               " --out " + q(dir / "rep") + " --train-frac 0.2 --seed 1",
                           dir);
    CHECK(r.code == 0);
    const json rep = json::parse(slurp(dir / "rep" / "report.json"));
    CHECK(rep.at("oa").get<double>() == 1.0);
    CHECK(rep.at("kappa").get<double>() == 1.0);
}

TEST_CASE("eval computes retrieval precision from model embeddings") {
    const fs::path dir = fresh_dir("eval_map");
    // Class 1 has 4 pixels (2 train / 2 test), class 2 has 2 (1 / 1):
    // three test points, and the class-2 query is skipped as a singleton.
    const tw::HsiDataset ds = strip_dataset({1, 1, 1, 1, 2, 2}, 2, 2);
    tw::save_dataset(ds, q(dir / "data"));
    run_cli("train --data " + q(dir / "data") + " --out " + q(dir / "run") +
                " --seed 7 --epochs 0 --embed-dim 4 --hidden 8 --patch 3 --train-frac 0.5",
            dir);

    const auto r = run_cli("eval --data " + q(dir / "data") + " --pred " + q(dir / "data" / "labels.u16") +
                               " --out " + q(dir / "rep") + " --train-frac 0.5 --seed 7 --map" +
                               " --model " + q(dir / "run" / "model.twnet"),
                           dir);
    CHECK(r.code == 0);
    const json rep = json::parse(slurp(dir / "rep" / "report.json"));
    REQUIRE(rep.contains("map"));
    CHECK(rep.at("map").at("queries") == 2);
    CHECK(rep.at("map").at("skipped") == 1);

    // Hand value: each class-1 query scores 1.0 when its classmate outranks
    // the class-2 point, else 1/2.
    const tw::SplitSpec spec{tw::SplitSpec::Mode::Fraction, 0.5, 30, 15};
    const tw::SplitMask mask = tw::split(ds, spec, 7);
    const tw::PcaBasis basis = tw::fit_pca(ds, 2);
    const tw::ProjectedCube projected = tw::project_cube(ds, basis);
    std::vector<int> test_pixels;
    std::vector<int> truth;
    for (int pix = 0; pix < 6; ++pix) {
        if (mask.state[static_cast<std::size_t>(pix)] == tw::SplitMask::kTest) {
            test_pixels.push_back(pix);
            truth.push_back(ds.labels[static_cast<std::size_t>(pix)] - 1);
        }
    }
    REQUIRE(test_pixels.size() == 3);
    const tw::Model model = tw::Model::load(q(dir / "run" / "model.twnet"));
    const tw::Tensor emb = tw::embed_all(model, projected, test_pixels, 1);
    const auto dist = [&](int i, int j) {
        double s = 0.0;
        for (int d = 0; d < 4; ++d) {
            const double diff = emb.at(i, d) - emb.at(j, d);
            s += diff * diff;
        }
        return std::sqrt(s);
    };
    double expected = 0.0;
    int n_queries = 0;
    for (int i = 0; i < 3; ++i) {
        if (truth[static_cast<std::size_t>(i)] != 0) continue;
        int mate = -1, other = -1;
        for (int j = 0; j < 3; ++j) {
            if (j == i) continue;
            (truth[static_cast<std::size_t>(j)] == 0 ? mate : other) = j;
        }
        expected += dist(i, mate) <= dist(i, other) ? 1.0 : 0.5;
        ++n_queries;
    }
    expected /= n_queries;
    CHECK(rep.at("map").at("value").get<double>() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("graph-stats reports the strip fixture counts and is stable") {
    const fs::path dir = fresh_dir("stats");
    const tw::HsiDataset ds = strip_dataset({1, 1, 1}, 1, 1);
    tw::save_dataset(ds, q(dir / "data"));
    const std::string cmd = "graph-stats --data " + q(dir / "data") + " --train-frac 1.0 --seed 2";
    const auto r1 = run_cli(cmd, dir);
    CHECK(r1.code == 0);
    const json stats = json::parse(r1.out);
    CHECK(stats.at("n_vertices") == 3);
    CHECK(stats.at("n_adjacency_edges") == 2);
    CHECK(stats.at("n_emst_edges") == 2);
    CHECK(stats.at("n_combined") == 2);
    CHECK(stats.at("n_connected_components") == 1);
    CHECK(stats.at("orphan_components") == 0);

    const auto r2 = run_cli(cmd, dir);
    CHECK(r1.out == r2.out);

    const auto r3 = run_cli(cmd + " --out " + q(dir / "o") + " --dump-graph " + q(dir / "g.txt"),
                            dir);
    CHECK(r3.code == 0);
    CHECK(json::parse(slurp(dir / "o" / "graph_stats.json")) == stats);
    const std::string dump = slurp(dir / "g.txt");
    CHECK(dump.rfind("# vertices 3\n", 0) == 0);
    CHECK(std::count(dump.begin(), dump.end(), '\n') == 3);
}

TEST_CASE("graph-stats fails cleanly on a dataset without labels") {
    const fs::path dir = fresh_dir("stats_empty");
    tw::HsiDataset ds = strip_dataset({1, 1, 2}, 2, 2);
    std::fill(ds.labels.begin(), ds.labels.end(), static_cast<std::uint16_t>(0));
    tw::save_dataset(ds, q(dir / "data"));
    const auto r = run_cli("graph-stats --data " + q(dir / "data"), dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("no labeled pixels") != std::string::npos);
}
