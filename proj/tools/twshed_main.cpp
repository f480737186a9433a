// twshed: train a triplet-loss embedding against watershed labelings and
// classify multi-band images with a seeded-watershed ensemble.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags or
// missing input files).

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tw/pipeline.hpp"

namespace {

// Split selection is shared by train, eval and graph-stats.
struct SplitFlags {
    std::vector<int> per_class;

    void attach(CLI::App* sc, tw::RunConfig& cfg) {
        auto* frac = sc->add_option("--train-frac", cfg.train_frac,
                                    "Train fraction per class, rounded, at least 1 pixel")
                         ->check(CLI::Range(0.0, 1.0))
                         ->capture_default_str();
        auto* pc = sc->add_option("--per-class", per_class,
                                  "N,M: N train pixels per class, M when the class has <= N")
                        ->delimiter(',')
                        ->expected(2);
        frac->excludes(pc);
    }

    void apply(const CLI::App* sc, tw::RunConfig& cfg) const {
        if (sc->count("--per-class")) {
            cfg.per_class_mode = true;
            cfg.per_class_big = per_class[0];
            cfg.per_class_small = per_class[1];
        }
    }
};

}  // namespace

int main(int argc, char** argv) {
    tw::RunConfig cfg;
    std::string arch = "mlp";
    std::string pool = "all";
    SplitFlags train_split, eval_split, stats_split;

    CLI::App app{"twshed: triplet-trained watershed classification of multi-band images"};
    app.require_subcommand(1);

    CLI::App* synth = app.add_subcommand("make-synth", "Write a synthetic labeled cube");
    // --h (height) needs the short help alias out of the way
    synth->set_help_flag("--help", "Print this help message and exit");
    synth->add_option("--out", cfg.out_dir, "Output dataset directory")->required();
    synth->add_option("--h", cfg.synth_h, "Image height")->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--w", cfg.synth_w, "Image width")->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--bands", cfg.synth_bands, "Spectral bands")->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--classes", cfg.synth_classes, "Number of classes")
        ->check(CLI::Range(2, 65535))
        ->capture_default_str();
    synth->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
    synth->add_option("--noise-sigma", cfg.noise_sigma, "Per-band Gaussian noise sigma")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    synth->add_option("--separation", cfg.separation,
                      "Class-mean scale in units of noise sigma")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--unlabeled-frac", cfg.unlabeled_frac,
                      "Fraction of pixels relabeled as unlabeled")
        ->check(CLI::Range(0.0, 0.999))
        ->capture_default_str();

    CLI::App* train = app.add_subcommand("train", "Train an embedding model");
    train->add_option("--data", cfg.data_dir, "Dataset directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    train->add_option("--out", cfg.out_dir, "Output directory for model/logs")->required();
    train->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
    train->add_option("--epochs", cfg.train.epochs, "Training epochs")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    train->add_option("--batch-size", cfg.train.batch_size, "Triplets per SGD step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train->add_option("--alpha", cfg.train.alpha, "Triplet margin")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train->add_option("--embed-dim", cfg.train.embed_dim, "Embedding dimension")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train->add_option("--arch", arch, "Network architecture")
        ->check(CLI::IsMember({"mlp", "conv"}))
        ->capture_default_str();
    train->add_option("--patch", cfg.train.patch, "Patch window size (odd)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train->add_option("--hidden", cfg.train.mlp_hidden, "MLP hidden layer widths")
        ->delimiter(',');
    train->add_option("--channels", cfg.train.conv_channels, "Conv channel counts (3 stages)")
        ->delimiter(',')
        ->expected(3);
    train->add_option("--pca-k", cfg.pca_k, "PCA components (0 = all bands)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    train->add_option("--emst-dims", cfg.emst_dims, "PCA dims for the Euclidean MST")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_split.attach(train, cfg);
    train->add_option("--seed-frac", cfg.train.seed_fraction,
                      "Watershed seed fraction per class, per epoch")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    train->add_option("--lr-base", cfg.train.lr_base, "Cyclic LR floor")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train->add_option("--lr-max", cfg.train.lr_max, "Cyclic LR ceiling")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train->add_option("--cycle-len", cfg.train.cycle_len,
                      "Iterations per LR half-cycle (0 = four epochs' worth)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    train->add_option("--triplet-pool", pool, "Vertices eligible for triplet mining")
        ->check(CLI::IsMember({"all", "train-only"}))
        ->capture_default_str();
    train->add_flag("--fixed-seeds", cfg.train.fixed_seeds,
                    "Reuse the first epoch's watershed seeds every epoch");
    train->add_option("--resume", cfg.resume_path,
                      "Continue training from this model (architecture flags must match)")
        ->check(CLI::ExistingFile);
    train->add_option("--repeats", cfg.repeats, "Independent runs with seeds seed..seed+R-1")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train->add_option("--n-estimators", cfg.n_estimators,
                      "Ensemble size for post-train test scoring")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train->add_option("--feature-frac", cfg.feature_frac,
                      "Embedding-dimension fraction per ensemble estimator")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    train->add_option("--threads", cfg.threads, "Worker threads (0 = machine cores)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    CLI::App* predict = app.add_subcommand("predict", "Classify a dataset with a trained model");
    predict->add_option("--data", cfg.data_dir, "Dataset directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    predict->add_option("--model", cfg.model_path, "Trained model file")
        ->required()
        ->check(CLI::ExistingFile);
    predict->add_option("--out", cfg.out_dir, "Output directory for pred.u16/pred.json")
        ->required();
    predict->add_option("--seed", cfg.seed, "RNG seed for the ensemble")->capture_default_str();
    predict->add_option("--n-estimators", cfg.n_estimators, "Ensemble size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    predict->add_option("--seed-frac", cfg.ensemble_seed_frac,
                        "Seed fraction per class, per estimator")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    predict->add_option("--feature-frac", cfg.feature_frac,
                        "Embedding-dimension fraction per estimator")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    predict->add_option("--votes", cfg.votes_path, "Also write per-vertex vote counts (CSV)");
    predict->add_option("--threads", cfg.threads, "Worker threads (0 = machine cores)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    CLI::App* eval = app.add_subcommand("eval", "Score a prediction raster against ground truth");
    eval->add_option("--data", cfg.data_dir, "Dataset directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    eval->add_option("--pred", cfg.pred_path, "Predicted label raster (u16)")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--out", cfg.out_dir, "Output directory for report.json/csv")->required();
    eval->add_option("--seed", cfg.seed, "Split RNG seed (must match the training run)")
        ->capture_default_str();
    eval_split.attach(eval, cfg);
    auto* map_flag = eval->add_flag("--map", cfg.map,
                                    "Also compute mean average precision over test embeddings");
    eval->add_option("--model", cfg.model_path, "Model file providing embeddings for --map")
        ->check(CLI::ExistingFile)
        ->needs(map_flag);
    eval->add_option("--map-subsample", cfg.map_subsample,
                     "MAP query cap (0 = default policy)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    eval->add_option("--threads", cfg.threads, "Worker threads (0 = machine cores)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    CLI::App* stats = app.add_subcommand("graph-stats", "Print edge-set statistics as JSON");
    stats->add_option("--data", cfg.data_dir, "Dataset directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    stats->add_option("--out", cfg.out_dir, "Also write graph_stats.json into this directory");
    stats->add_option("--seed", cfg.seed, "Split RNG seed")->capture_default_str();
    stats_split.attach(stats, cfg);
    stats->add_option("--pca-k", cfg.pca_k, "PCA components (0 = all bands)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    stats->add_option("--emst-dims", cfg.emst_dims, "PCA dims for the Euclidean MST")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    stats->add_option("--dump-graph", cfg.dump_graph_path,
                      "Write the combined edge list to this file");
    stats->add_option("--threads", cfg.threads, "Worker threads (0 = machine cores)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    cfg.train.arch = arch == "conv" ? tw::TrainConfig::Arch::Conv : tw::TrainConfig::Arch::Mlp;
    cfg.train.pool =
        pool == "train-only" ? tw::TrainConfig::Pool::TrainOnly : tw::TrainConfig::Pool::All;
    train_split.apply(train, cfg);
    eval_split.apply(eval, cfg);
    stats_split.apply(stats, cfg);

    try {
        if (synth->parsed()) {
            cfg.command = "make-synth";
            tw::run_make_synth(cfg);
        } else if (train->parsed()) {
            cfg.command = "train";
            tw::run_train(cfg);
        } else if (predict->parsed()) {
            cfg.command = "predict";
            tw::run_predict(cfg);
        } else if (eval->parsed()) {
            cfg.command = "eval";
            tw::run_eval(cfg);
        } else {
            cfg.command = "graph-stats";
            tw::run_graph_stats(cfg);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
