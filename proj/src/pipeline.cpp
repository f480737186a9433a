#include "tw/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "tw/classifier.hpp"
#include "tw/dataset.hpp"
#include "tw/graph_build.hpp"
#include "tw/metrics.hpp"
#include "tw/model.hpp"
#include "tw/parallel.hpp"
#include "tw/pca.hpp"
#include "tw/util.hpp"
#include "tw/watershed.hpp"

namespace tw {

namespace {

using nlohmann::ordered_json;

SplitSpec split_spec_of(const RunConfig& cfg) {
    SplitSpec spec;
    if (cfg.per_class_mode) {
        spec.mode = SplitSpec::Mode::PerClass;
        spec.per_class_big = cfg.per_class_big;
        spec.per_class_small = cfg.per_class_small;
    } else {
        spec.mode = SplitSpec::Mode::Fraction;
        spec.fraction = cfg.train_frac;
    }
    return spec;
}

ordered_json split_echo(const RunConfig& cfg) {
    ordered_json j;
    if (cfg.per_class_mode) {
        j["mode"] = "per-class";
        j["per_class_big"] = cfg.per_class_big;
        j["per_class_small"] = cfg.per_class_small;
    } else {
        j["mode"] = "fraction";
        j["train_frac"] = cfg.train_frac;
    }
    return j;
}

// The semantic settings of a training run. Paths and thread counts stay
// out so artifacts from identical-seed runs are byte-identical.
ordered_json train_echo(const RunConfig& cfg, int k_eff, int emst_eff, std::uint64_t run_seed) {
    ordered_json j;
    j["format"] = "twshed-run";
    j["version"] = 1;
    j["command"] = "train";
    j["seed"] = run_seed;
    j["repeats"] = cfg.repeats;
    j["split"] = split_echo(cfg);
    j["pca_k"] = k_eff;
    j["emst_dims"] = emst_eff;
    j["arch"] = cfg.train.arch == TrainConfig::Arch::Mlp ? "mlp" : "conv";
    j["embed_dim"] = cfg.train.embed_dim;
    j["patch"] = cfg.train.patch;
    if (cfg.train.arch == TrainConfig::Arch::Mlp) {
        j["mlp_hidden"] = cfg.train.mlp_hidden;
    } else {
        j["conv_channels"] = cfg.train.conv_channels;
    }
    j["epochs"] = cfg.train.epochs;
    j["batch_size"] = cfg.train.batch_size;
    j["alpha"] = cfg.train.alpha;
    j["seed_frac"] = cfg.train.seed_fraction;
    j["lr_base"] = cfg.train.lr_base;
    j["lr_max"] = cfg.train.lr_max;
    j["cycle_len"] = cfg.train.cycle_len;
    j["triplet_pool"] = cfg.train.pool == TrainConfig::Pool::All ? "all" : "train-only";
    j["fixed_seeds"] = cfg.train.fixed_seeds;
    j["resume"] = !cfg.resume_path.empty();
    j["n_estimators"] = cfg.n_estimators;
    j["ensemble_seed_frac"] = cfg.ensemble_seed_frac;
    j["feature_frac"] = cfg.feature_frac;
    return j;
}

struct Prepared {
    HsiDataset ds;
    SplitMask mask;
    PcaBasis basis;
    ProjectedCube projected;
    BuiltGraph built;
    int k_eff = 0;
    int emst_eff = 0;
};

Prepared prepare(const std::string& data_dir, const SplitSpec& spec, std::uint64_t seed,
                 int pca_k, int emst_dims, int threads) {
    Prepared p;
    p.ds = load_dataset(data_dir);
    p.mask = split(p.ds, spec, seed);
    p.k_eff = pca_k == 0 ? p.ds.bands : pca_k;
    p.basis = fit_pca(p.ds, p.k_eff);
    p.projected = project_cube(p.ds, p.basis);
    p.emst_eff = std::min(emst_dims, p.k_eff);
    p.built = build_edge_set(p.ds, p.projected, p.emst_eff, threads);
    return p;
}

// Every train pixel becomes a seed carrying its 0-based class.
SeedSet seeds_from_train(const HsiDataset& ds, const BuiltGraph& built, const SplitMask& mask) {
    SeedSet seeds;
    for (int v = 0; v < built.graph.n_vertices; ++v) {
        const int pix = built.vertex_pixel[static_cast<std::size_t>(v)];
        if (mask.state[static_cast<std::size_t>(pix)] == SplitMask::kTrain) {
            seeds.add(v, ds.labels[static_cast<std::size_t>(pix)] - 1);
        }
    }
    require(!seeds.empty(), "no train pixels to seed the classifier");
    return seeds;
}

std::vector<std::uint16_t> raster_from_labels(const HsiDataset& ds, const BuiltGraph& built,
                                              const std::vector<int>& labels) {
    std::vector<std::uint16_t> raster(static_cast<std::size_t>(ds.n_pixels()), 0);
    for (int v = 0; v < built.graph.n_vertices; ++v) {
        const int c = labels[static_cast<std::size_t>(v)];
        if (c != kUnlabeled) {
            raster[static_cast<std::size_t>(built.vertex_pixel[static_cast<std::size_t>(v)])] =
                static_cast<std::uint16_t>(c + 1);
        }
    }
    return raster;
}

void write_u16_raster(const std::vector<std::uint16_t>& raster, const std::string& path) {
    std::vector<unsigned char> bytes(raster.size() * 2);
    for (std::size_t i = 0; i < raster.size(); ++i) {
        bytes[i * 2] = static_cast<unsigned char>(raster[i] & 0xff);
        bytes[i * 2 + 1] = static_cast<unsigned char>(raster[i] >> 8);
    }
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write ", path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint16_t> read_u16_raster(const std::string& path, std::int64_t expected) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open ", path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    require(static_cast<std::int64_t>(bytes.size()) == expected * 2, path, ": expected ",
            expected * 2, " bytes, got ", bytes.size());
    std::vector<std::uint16_t> raster(static_cast<std::size_t>(expected));
    for (std::size_t i = 0; i < raster.size(); ++i) {
        raster[i] = static_cast<std::uint16_t>(bytes[i * 2] | bytes[i * 2 + 1] << 8);
    }
    return raster;
}

// Training settings a model file carries, needed to rebuild its graph.
struct ModelRunInfo {
    std::uint64_t seed = 0;
    SplitSpec spec;
    int pca_k = 0;
    int emst_dims = 0;
};

ModelRunInfo parse_model_echo(const Model& model, const std::string& path) {
    require(!model.config_echo_json.empty(), path, ": model carries no training config");
    ModelRunInfo info;
    try {
        const auto j = ordered_json::parse(model.config_echo_json);
        info.seed = j.at("seed").get<std::uint64_t>();
        info.pca_k = j.at("pca_k").get<int>();
        info.emst_dims = j.at("emst_dims").get<int>();
        const auto& s = j.at("split");
        if (s.at("mode").get<std::string>() == "per-class") {
            info.spec.mode = SplitSpec::Mode::PerClass;
            info.spec.per_class_big = s.at("per_class_big").get<int>();
            info.spec.per_class_small = s.at("per_class_small").get<int>();
        } else {
            info.spec.mode = SplitSpec::Mode::Fraction;
            info.spec.fraction = s.at("train_frac").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        fail(path, ": malformed training config in model header: ", e.what());
    }
    return info;
}

void write_json(const ordered_json& j, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write ", path);
    out << j.dump(2) << "\n";
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (const double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_stdev(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double s = 0.0;
    for (const double x : xs) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

bool same_layer(const LayerSpec& a, const LayerSpec& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case LayerKind::Linear:
            return a.in_features == b.in_features && a.out_features == b.out_features;
        case LayerKind::Conv2d:
            return a.in_ch == b.in_ch && a.out_ch == b.out_ch && a.kernel == b.kernel &&
                   a.stride == b.stride && a.pad == b.pad;
        case LayerKind::BatchNorm:
            return a.features == b.features;
        case LayerKind::Relu:
            return true;
    }
    return false;
}

MetricsReport score_with_ensemble(const Prepared& p, const Model& model, const RunConfig& cfg,
                                  std::uint64_t run_seed, int threads) {
    const Tensor embeddings = embed_all(model, p.projected, p.built.vertex_pixel, threads);
    const SeedSet seeds = seeds_from_train(p.ds, p.built, p.mask);
    EnsembleConfig ec;
    ec.n_estimators = cfg.n_estimators;
    ec.seed_fraction = cfg.ensemble_seed_frac;
    ec.feature_fraction = cfg.feature_frac;
    ec.seed = run_seed;
    ec.threads = threads;
    const EnsembleResult ens = classify_ensemble(p.built.graph, embeddings, seeds, ec);
    return compute_metrics(raster_from_labels(p.ds, p.built, ens.labels), p.ds, p.mask);
}

}  // namespace

void run_make_synth(const RunConfig& cfg) {
    SyntheticParams p;
    p.height = cfg.synth_h;
    p.width = cfg.synth_w;
    p.bands = cfg.synth_bands;
    p.classes = cfg.synth_classes;
    p.noise_sigma = cfg.noise_sigma;
    p.unlabeled_frac = cfg.unlabeled_frac;
    p.separation = cfg.separation;
    p.seed = cfg.seed;
    const HsiDataset ds = make_synthetic(p);
    save_dataset(ds, cfg.out_dir);

    std::vector<std::int64_t> sizes(static_cast<std::size_t>(ds.n_classes), 0);
    std::int64_t unlabeled = 0;
    for (const auto lab : ds.labels) {
        if (lab == 0) {
            ++unlabeled;
        } else {
            ++sizes[static_cast<std::size_t>(lab - 1)];
        }
    }
    std::cout << "wrote " << cfg.out_dir << ": " << ds.height << "x" << ds.width << "x"
              << ds.bands << ", " << ds.n_classes << " classes\n";
    for (int c = 0; c < ds.n_classes; ++c) {
        std::cout << "  class " << c + 1 << ": " << sizes[static_cast<std::size_t>(c)]
                  << " pixels\n";
    }
    std::cout << "  unlabeled: " << unlabeled << " pixels\n";
}

void run_train(const RunConfig& cfg) {
    require(cfg.repeats >= 1, "train: --repeats must be at least 1");
    const int threads = resolve_threads(cfg.threads);
    const SplitSpec spec = split_spec_of(cfg);
    std::filesystem::create_directories(cfg.out_dir);

    std::vector<double> oas, aas, kappas;
    ordered_json run_summaries = ordered_json::array();
    int base_k_eff = 0, base_emst_eff = 0;

    for (int r = 0; r < cfg.repeats; ++r) {
        const std::uint64_t run_seed = cfg.seed + static_cast<std::uint64_t>(r);
        Prepared p = prepare(cfg.data_dir, spec, run_seed, cfg.pca_k, cfg.emst_dims, threads);
        if (r == 0) {
            base_k_eff = p.k_eff;
            base_emst_eff = p.emst_eff;
        }

        const ordered_json echo = train_echo(cfg, p.k_eff, p.emst_eff, run_seed);
        std::vector<LayerSpec> layers =
            cfg.train.arch == TrainConfig::Arch::Mlp
                ? mlp_architecture(p.k_eff, cfg.train.patch, cfg.train.patch,
                                   cfg.train.mlp_hidden, cfg.train.embed_dim)
                : conv_architecture(p.k_eff, cfg.train.patch, cfg.train.patch,
                                    cfg.train.conv_channels, cfg.train.embed_dim);
        Model model;
        if (cfg.resume_path.empty()) {
            model = build_model(std::move(layers),
                                {p.k_eff, cfg.train.patch, cfg.train.patch}, run_seed);
        } else {
            model = Model::load(cfg.resume_path);
            require(model.input_shape ==
                        std::vector<std::int64_t>({p.k_eff, cfg.train.patch, cfg.train.patch}),
                    "resume: ", cfg.resume_path, " expects input ",
                    shape_str(model.input_shape), ", flags describe [", p.k_eff, ", ",
                    cfg.train.patch, ", ", cfg.train.patch, "]");
            require(model.layers.size() == layers.size(), "resume: ", cfg.resume_path, " has ",
                    model.layers.size(), " layers, flags describe ", layers.size());
            for (std::size_t i = 0; i < layers.size(); ++i) {
                require(same_layer(model.layers[i], layers[i]), "resume: layer ", i,
                        " of ", cfg.resume_path, " does not match the flags architecture");
            }
        }
        model.config_echo_json = echo.dump();
        if (r == 0) std::cout << "model parameters: " << model.param_count() << "\n";

        const std::string suffix = cfg.repeats == 1 ? "" : cat("_", r);
        const std::string log_path = cat(cfg.out_dir, "/train_log", suffix, ".jsonl");
        const std::string model_path = cat(cfg.out_dir, "/model", suffix, ".twnet");

        std::ofstream log(log_path);
        require(log.good(), "cannot write ", log_path);
        log << echo.dump() << "\n";

        TrainConfig tc = cfg.train;
        tc.seed = run_seed;
        tc.threads = cfg.threads;
        const auto on_epoch = [&log](const EpochRecord& rec) {
            ordered_json line;
            line["epoch"] = rec.epoch;
            line["mean_loss"] = rec.mean_loss;
            line["out_of_box"] = rec.out_of_box;
            line["active_fraction"] = rec.active_fraction;
            line["lr_last"] = rec.lr_last;
            line["degenerate"] = rec.degenerate;
            log << line.dump() << "\n";
        };
        const auto records = train(p.ds, p.projected, p.built, p.mask, model, tc, on_epoch);
        log.close();
        model.save(model_path);

        std::cout << "run " << r << " (seed " << run_seed << "): " << records.size()
                  << " epochs";
        if (!records.empty()) {
            std::cout << ", final out_of_box " << records.back().out_of_box << ", mean loss "
                      << records.back().mean_loss;
        }
        std::cout << "\n";

        ordered_json summary;
        summary["run"] = r;
        summary["seed"] = run_seed;
        summary["epochs"] = records.size();
        summary["final_out_of_box"] = records.empty() ? 0.0 : records.back().out_of_box;
        if (p.mask.test_total() > 0) {
            const MetricsReport rep = score_with_ensemble(p, model, cfg, run_seed, threads);
            oas.push_back(rep.oa);
            aas.push_back(rep.aa);
            kappas.push_back(rep.kappa);
            summary["test_oa"] = rep.oa;
            summary["test_aa"] = rep.aa;
            summary["test_kappa"] = rep.kappa_defined ? ordered_json(rep.kappa)
                                                      : ordered_json(nullptr);
            std::cout << "  test OA " << rep.oa << ", AA " << rep.aa << ", kappa "
                      << rep.kappa << "\n";
        }
        run_summaries.push_back(summary);
    }

    if (!oas.empty()) {
        ordered_json j;
        j["format"] = "twsummary";
        j["version"] = 1;
        j["config"] = train_echo(cfg, base_k_eff, base_emst_eff, cfg.seed);
        j["runs"] = run_summaries;
        const double oa_mean = mean_of(oas), aa_mean = mean_of(aas), k_mean = mean_of(kappas);
        j["mean"] = {{"oa", oa_mean}, {"aa", aa_mean}, {"kappa", k_mean}};
        j["stdev"] = {{"oa", sample_stdev(oas, oa_mean)},
                      {"aa", sample_stdev(aas, aa_mean)},
                      {"kappa", sample_stdev(kappas, k_mean)}};
        write_json(j, cat(cfg.out_dir, "/summary.json"));
    }
}

void run_predict(const RunConfig& cfg) {
    const int threads = resolve_threads(cfg.threads);
    const Model model = Model::load(cfg.model_path);
    const ModelRunInfo info = parse_model_echo(model, cfg.model_path);

    Prepared p = prepare(cfg.data_dir, info.spec, info.seed, info.pca_k, info.emst_dims, threads);
    require(p.k_eff == model.input_shape[0], "model expects ", model.input_shape[0],
            " input channels, dataset preprocessing yields ", p.k_eff);

    const Tensor embeddings = embed_all(model, p.projected, p.built.vertex_pixel, threads);
    const SeedSet seeds = seeds_from_train(p.ds, p.built, p.mask);
    EnsembleConfig ec;
    ec.n_estimators = cfg.n_estimators;
    ec.seed_fraction = cfg.ensemble_seed_frac;
    ec.feature_fraction = cfg.feature_frac;
    ec.seed = cfg.seed;
    ec.threads = threads;
    const EnsembleResult ens = classify_ensemble(p.built.graph, embeddings, seeds, ec);
    const auto raster = raster_from_labels(p.ds, p.built, ens.labels);

    std::filesystem::create_directories(cfg.out_dir);
    write_u16_raster(raster, cat(cfg.out_dir, "/pred.u16"));

    std::vector<std::int64_t> per_class(static_cast<std::size_t>(ens.n_classes), 0);
    std::int64_t unpredicted = 0;
    for (const int lab : ens.labels) {
        if (lab == kUnlabeled) {
            ++unpredicted;
        } else {
            ++per_class[static_cast<std::size_t>(lab)];
        }
    }

    ordered_json j;
    j["format"] = "twpred";
    j["version"] = 1;
    j["config"] = {{"command", "predict"},
                   {"seed", cfg.seed},
                   {"n_estimators", cfg.n_estimators},
                   {"seed_frac", cfg.ensemble_seed_frac},
                   {"feature_frac", cfg.feature_frac}};
    j["train_config"] = ordered_json::parse(model.config_echo_json);
    j["height"] = p.ds.height;
    j["width"] = p.ds.width;
    j["n_vertices"] = p.built.graph.n_vertices;
    j["n_classes"] = ens.n_classes;
    j["predicted_per_class"] = per_class;
    j["unpredicted_vertices"] = unpredicted;
    write_json(j, cat(cfg.out_dir, "/pred.json"));

    if (!cfg.votes_path.empty()) {
        std::ofstream out(cfg.votes_path);
        require(out.good(), "cannot write ", cfg.votes_path);
        out << "vertex";
        for (int c = 0; c < ens.n_classes; ++c) out << ",class" << c;
        out << "\n";
        for (int v = 0; v < p.built.graph.n_vertices; ++v) {
            out << v;
            for (int c = 0; c < ens.n_classes; ++c) out << "," << ens.vote(v, c);
            out << "\n";
        }
    }

    std::cout << "wrote " << cfg.out_dir << "/pred.u16 (" << p.ds.height << "x" << p.ds.width
              << "), " << unpredicted << " unpredicted vertices\n";
}

void run_eval(const RunConfig& cfg) {
    const int threads = resolve_threads(cfg.threads);
    const HsiDataset ds = load_dataset(cfg.data_dir);
    const SplitMask mask = split(ds, split_spec_of(cfg), cfg.seed);
    const auto raster = read_u16_raster(cfg.pred_path, ds.n_pixels());
    MetricsReport rep = compute_metrics(raster, ds, mask);

    if (cfg.map) {
        require(!cfg.model_path.empty(), "eval: --map needs --model for the embeddings");
        const Model model = Model::load(cfg.model_path);
        const ModelRunInfo info = parse_model_echo(model, cfg.model_path);
        const int k_eff = info.pca_k == 0 ? ds.bands : info.pca_k;
        const PcaBasis basis = fit_pca(ds, k_eff);
        const ProjectedCube projected = project_cube(ds, basis);

        std::vector<int> test_pixels;
        std::vector<int> truth;
        for (std::int64_t pix = 0; pix < ds.n_pixels(); ++pix) {
            if (mask.state[static_cast<std::size_t>(pix)] == SplitMask::kTest) {
                test_pixels.push_back(static_cast<int>(pix));
                truth.push_back(ds.labels[static_cast<std::size_t>(pix)] - 1);
            }
        }
        require(test_pixels.size() >= 2, "eval: --map needs at least 2 test pixels");
        const Tensor emb = embed_all(model, projected, test_pixels, threads);
        const MapResult mr = mean_average_precision(emb, truth, cfg.map_subsample, cfg.seed,
                                                    threads);
        rep.has_map = true;
        rep.map = mr.value;
        rep.map_queries = mr.queries;
        rep.map_skipped = mr.skipped;
    }

    ordered_json echo;
    echo["command"] = "eval";
    echo["seed"] = cfg.seed;
    echo["split"] = split_echo(cfg);
    echo["map"] = cfg.map;
    if (cfg.map) echo["map_subsample"] = cfg.map_subsample;

    std::filesystem::create_directories(cfg.out_dir);
    write_report(rep, mask, echo.dump(), cat(cfg.out_dir, "/report.json"),
                 cat(cfg.out_dir, "/report.csv"));

    std::cout << "OA " << rep.oa << ", AA " << rep.aa << ", kappa ";
    if (rep.kappa_defined) {
        std::cout << rep.kappa;
    } else {
        std::cout << "undefined";
    }
    if (rep.has_map) std::cout << ", MAP " << rep.map;
    std::cout << "\n";
}

void run_graph_stats(const RunConfig& cfg) {
    const int threads = resolve_threads(cfg.threads);
    const HsiDataset ds = load_dataset(cfg.data_dir);
    const SplitMask mask = split(ds, split_spec_of(cfg), cfg.seed);
    const int k_eff = cfg.pca_k == 0 ? ds.bands : cfg.pca_k;
    const PcaBasis basis = fit_pca(ds, k_eff);
    const ProjectedCube projected = project_cube(ds, basis);
    const int emst_eff = std::min(cfg.emst_dims, k_eff);
    const BuiltGraph built = build_edge_set(ds, projected, emst_eff, threads);

    UnionFind uf(built.graph.n_vertices);
    for (const auto& e : built.graph.edges) uf.unite(e.u, e.v);
    std::vector<int> component_train(static_cast<std::size_t>(built.graph.n_vertices), 0);
    std::vector<char> is_root_seen(static_cast<std::size_t>(built.graph.n_vertices), 0);
    int components = 0;
    for (int v = 0; v < built.graph.n_vertices; ++v) {
        const int root = uf.find(v);
        if (!is_root_seen[static_cast<std::size_t>(root)]) {
            is_root_seen[static_cast<std::size_t>(root)] = 1;
            ++components;
        }
        const int pix = built.vertex_pixel[static_cast<std::size_t>(v)];
        if (mask.state[static_cast<std::size_t>(pix)] == SplitMask::kTrain) {
            ++component_train[static_cast<std::size_t>(root)];
        }
    }
    int orphans = 0;
    for (int v = 0; v < built.graph.n_vertices; ++v) {
        if (is_root_seen[static_cast<std::size_t>(v)] && component_train[static_cast<std::size_t>(v)] == 0) {
            ++orphans;
        }
    }

    ordered_json j;
    j["n_vertices"] = built.graph.n_vertices;
    j["n_adjacency_edges"] = built.edges.adjacency_edges.size();
    j["n_emst_edges"] = built.edges.emst_edges.size();
    j["n_combined"] = built.edges.combined.size();
    j["n_connected_components"] = components;
    j["orphan_components"] = orphans;
    std::cout << j.dump(2) << "\n";
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        write_json(j, cat(cfg.out_dir, "/graph_stats.json"));
    }

    if (!cfg.dump_graph_path.empty()) {
        std::ofstream out(cfg.dump_graph_path);
        require(out.good(), "cannot write ", cfg.dump_graph_path);
        out << "# vertices " << built.graph.n_vertices << "\n";
        for (const auto& e : built.graph.edges) {
            out << e.u << " " << e.v << " " << e.w << "\n";
        }
    }
}

}  // namespace tw
