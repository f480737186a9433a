#include "tw/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "tw/parallel.hpp"
#include "tw/util.hpp"

namespace tw {

double triplet_loss(const double* a, const double* p, const double* n, int dim, double alpha,
                    double* grad_a, double* grad_p, double* grad_n) {
    require(dim >= 1, "triplet_loss: empty embeddings");
    require(alpha >= 0.0, "triplet_loss: negative margin ", alpha);
    double dap2 = 0.0, dan2 = 0.0;
    for (int i = 0; i < dim; ++i) {
        require(std::isfinite(a[i]) && std::isfinite(p[i]) && std::isfinite(n[i]),
                "triplet_loss: non-finite embedding entry");
        dap2 += (a[i] - p[i]) * (a[i] - p[i]);
        dan2 += (a[i] - n[i]) * (a[i] - n[i]);
    }
    const double dap = std::sqrt(dap2);
    const double dan = std::sqrt(dan2);
    const double loss = dap - dan + alpha;

    std::fill(grad_a, grad_a + dim, 0.0);
    std::fill(grad_p, grad_p + dim, 0.0);
    std::fill(grad_n, grad_n + dim, 0.0);
    if (loss <= 0.0) return 0.0;
    // d(dap)/da_i = (a_i - p_i)/dap; at dap = 0 take the zero subgradient
    if (dap > 0.0) {
        for (int i = 0; i < dim; ++i) {
            const double g = (a[i] - p[i]) / dap;
            grad_a[i] += g;
            grad_p[i] -= g;
        }
    }
    if (dan > 0.0) {
        for (int i = 0; i < dim; ++i) {
            const double g = (a[i] - n[i]) / dan;
            grad_a[i] -= g;
            grad_n[i] += g;
        }
    }
    return loss;
}

double cyclic_lr(std::int64_t iteration, double lr_base, double lr_max, int cycle_len) {
    require(cycle_len >= 1, "cyclic_lr: cycle_len must be at least 1");
    require(lr_base <= lr_max, "cyclic_lr: lr_base ", lr_base, " exceeds lr_max ", lr_max);
    require(iteration >= 0, "cyclic_lr: negative iteration");
    const std::int64_t pos = iteration % (2 * static_cast<std::int64_t>(cycle_len));
    const double t = pos <= cycle_len
                         ? static_cast<double>(pos) / cycle_len
                         : 2.0 - static_cast<double>(pos) / cycle_len;
    return lr_base + (lr_max - lr_base) * t;
}

Tensor build_patch_batch(const ProjectedCube& projected, const std::vector<int>& pixels,
                         int patch) {
    require(!pixels.empty(), "build_patch_batch: empty pixel list");
    const int k = projected.k;
    Tensor batch = Tensor::zeros({static_cast<std::int64_t>(pixels.size()), k, patch, patch});
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const int pix = pixels[i];
        const Tensor window =
            extract_patch(projected, pix / projected.width, pix % projected.width, patch);
        // [patch][patch][k] -> [k][patch][patch]
        for (int h = 0; h < patch; ++h) {
            for (int w = 0; w < patch; ++w) {
                const double* src =
                    window.data.data() + (static_cast<std::int64_t>(h) * patch + w) * k;
                for (int c = 0; c < k; ++c) {
                    batch.at(static_cast<std::int64_t>(i), c, h, w) = src[c];
                }
            }
        }
    }
    return batch;
}

Tensor embed_all(const Model& model, const ProjectedCube& projected,
                 const std::vector<int>& vertex_pixel, int threads) {
    require(model.input_shape.size() == 3, "embed_all: model expects item shape ",
            shape_str(model.input_shape));
    require(model.input_shape[0] == projected.k, "embed_all: model expects ",
            model.input_shape[0], " channels, projection has ", projected.k);
    const int patch = static_cast<int>(model.input_shape[1]);
    const std::int64_t n = static_cast<std::int64_t>(vertex_pixel.size());
    Tensor out = Tensor::zeros({n, model.embed_dim});
    parallel_for(n, threads, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t v = begin; v < end; ++v) {
            const Tensor item =
                build_patch_batch(projected, {vertex_pixel[static_cast<std::size_t>(v)]}, patch);
            const Tensor emb = model.forward_eval(item);
            std::copy(emb.data.begin(), emb.data.end(), out.row(v));
        }
    });
    out.check_finite("embeddings");
    return out;
}

namespace {

// Train vertices grouped by 0-based class, each list in ascending vertex order.
std::vector<std::vector<int>> train_vertices_by_class(const HsiDataset& ds,
                                                      const BuiltGraph& built,
                                                      const SplitMask& mask) {
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.n_classes));
    for (int v = 0; v < built.graph.n_vertices; ++v) {
        const int pix = built.vertex_pixel[static_cast<std::size_t>(v)];
        if (mask.state[static_cast<std::size_t>(pix)] == SplitMask::kTrain) {
            by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(pix)] - 1)]
                .push_back(v);
        }
    }
    return by_class;
}

SeedSet sample_seeds(const std::vector<std::vector<int>>& by_class, double fraction,
                     std::uint64_t master, std::uint64_t epoch) {
    SeedSet seeds;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const auto& members = by_class[c];
        if (members.empty()) continue;
        const int n_c = static_cast<int>(members.size());
        const int k = std::max(
            1, static_cast<int>(std::ceil(fraction * static_cast<double>(n_c))));
        Rng rng = Rng::derive(master, {stream::kEpochSeeds, epoch, static_cast<std::uint64_t>(c)});
        for (int idx : rng.sample_without_replacement(n_c, std::min(k, n_c))) {
            seeds.add(members[static_cast<std::size_t>(idx)], static_cast<int>(c));
        }
    }
    return seeds;
}

}  // namespace

std::vector<EpochRecord> train(const HsiDataset& ds, const ProjectedCube& projected,
                               BuiltGraph& built, const SplitMask& mask, Model& model,
                               const TrainConfig& cfg,
                               const std::function<void(const EpochRecord&)>& on_epoch) {
    require(cfg.epochs >= 0, "train: negative epoch count");
    require(cfg.batch_size >= 1, "train: batch_size must be at least 1");
    require(cfg.alpha >= 0.0, "train: negative margin");
    require(cfg.seed_fraction > 0.0 && cfg.seed_fraction <= 1.0, "train: seed_fraction ",
            cfg.seed_fraction, " outside (0,1]");
    require(cfg.lr_base > 0.0 && cfg.lr_base <= cfg.lr_max, "train: bad learning-rate range [",
            cfg.lr_base, ", ", cfg.lr_max, "]");

    const int threads = resolve_threads(cfg.threads);
    const auto by_class = train_vertices_by_class(ds, built, mask);
    int train_classes = 0, train_total = 0;
    for (const auto& members : by_class) {
        if (!members.empty()) ++train_classes;
        train_total += static_cast<int>(members.size());
    }
    require(train_classes >= 2, "train: need at least 2 classes in the train split, got ",
            train_classes);

    // class id per vertex for out-of-box scoring (-1 for non-train vertices)
    std::vector<int> truth(static_cast<std::size_t>(built.graph.n_vertices), -1);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        for (int v : by_class[c]) truth[static_cast<std::size_t>(v)] = static_cast<int>(c);
    }

    const int nominal_pool = cfg.pool == TrainConfig::Pool::All
                                 ? built.graph.n_vertices
                                 : train_total;
    const int batches_per_epoch =
        std::max(1, (nominal_pool + cfg.batch_size - 1) / cfg.batch_size);
    const int cycle_len = cfg.cycle_len > 0 ? cfg.cycle_len : 4 * batches_per_epoch;

    std::vector<EpochRecord> records;
    SeedSet fixed_seeds;
    std::int64_t iteration = 0;
    int calm_epochs = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const Tensor embeddings = embed_all(model, projected, built.vertex_pixel, threads);
        reweight(built.graph, embeddings);

        SeedSet seeds;
        if (cfg.fixed_seeds) {
            if (epoch == 0) fixed_seeds = sample_seeds(by_class, cfg.seed_fraction, cfg.seed, 0);
            seeds = fixed_seeds;
        } else {
            seeds = sample_seeds(by_class, cfg.seed_fraction, cfg.seed,
                                 static_cast<std::uint64_t>(epoch));
        }
        const std::vector<int> labels = classify_single(built.graph, seeds);

        EpochRecord rec;
        rec.epoch = epoch;
        std::int64_t oob_total = 0, oob_correct = 0;
        for (int v = 0; v < built.graph.n_vertices; ++v) {
            if (truth[static_cast<std::size_t>(v)] < 0) continue;
            if (seeds.label_by_vertex.count(v)) continue;
            ++oob_total;
            if (labels[static_cast<std::size_t>(v)] == truth[static_cast<std::size_t>(v)]) {
                ++oob_correct;
            }
        }
        rec.out_of_box = oob_total == 0
                             ? 1.0
                             : static_cast<double>(oob_correct) / static_cast<double>(oob_total);

        std::vector<int> pool;
        if (cfg.pool == TrainConfig::Pool::All) {
            for (int v = 0; v < built.graph.n_vertices; ++v) {
                if (labels[static_cast<std::size_t>(v)] != kUnlabeled) pool.push_back(v);
            }
        } else {
            for (int v = 0; v < built.graph.n_vertices; ++v) {
                if (truth[static_cast<std::size_t>(v)] >= 0 &&
                    labels[static_cast<std::size_t>(v)] != kUnlabeled) {
                    pool.push_back(v);
                }
            }
        }
        std::set<int> pool_classes;
        for (int v : pool) pool_classes.insert(labels[static_cast<std::size_t>(v)]);

        if (pool_classes.size() < 2) {
            rec.degenerate = true;
            std::cerr << "warning: epoch " << epoch
                      << ": watershed labels collapsed to a single class, skipping SGD\n";
        } else {
            const int n_batches =
                std::max(1, (static_cast<int>(pool.size()) + cfg.batch_size - 1) / cfg.batch_size);
            const int embed_dim = model.embed_dim;
            const int patch = static_cast<int>(model.input_shape[1]);
            double loss_sum = 0.0;
            std::int64_t triplet_count = 0, active_count = 0;

            for (int b = 0; b < n_batches; ++b) {
                Rng rng = Rng::derive(cfg.seed, {stream::kTriplets,
                                                 static_cast<std::uint64_t>(epoch),
                                                 static_cast<std::uint64_t>(b)});
                const TripletBatch tb = mine_triplets(labels, pool, cfg.batch_size, rng);
                const int B = tb.size();
                if (B == 0) continue;

                std::vector<int> pixels;
                pixels.reserve(static_cast<std::size_t>(3 * B));
                for (int v : tb.anchors) pixels.push_back(built.vertex_pixel[static_cast<std::size_t>(v)]);
                for (int v : tb.positives) pixels.push_back(built.vertex_pixel[static_cast<std::size_t>(v)]);
                for (int v : tb.negatives) pixels.push_back(built.vertex_pixel[static_cast<std::size_t>(v)]);
                const Tensor batch = build_patch_batch(projected, pixels, patch);

                model.train_mode = true;
                const Tensor out = model.forward(batch);
                Tensor gout = Tensor::zeros(out.shape);
                double batch_loss = 0.0;
                for (int i = 0; i < B; ++i) {
                    const double loss = triplet_loss(
                        out.row(i), out.row(B + i), out.row(2 * B + i), embed_dim, cfg.alpha,
                        gout.row(i), gout.row(B + i), gout.row(2 * B + i));
                    batch_loss += loss;
                    if (loss > 0.0) ++active_count;
                }
                require(std::isfinite(batch_loss), "train: non-finite loss at epoch ", epoch,
                        ", batch ", b);
                for (double& g : gout.data) g /= static_cast<double>(B);

                const BackwardResult grads = model.backward(gout);
                const double lr = cyclic_lr(iteration, cfg.lr_base, cfg.lr_max, cycle_len);
                for (std::size_t i = 0; i < model.params.size(); ++i) {
                    model.params[i] -= lr * grads.param_grad[i];
                }
                model.train_mode = false;
                rec.lr_last = lr;
                ++iteration;
                loss_sum += batch_loss;
                triplet_count += B;
            }
            rec.mean_loss = triplet_count == 0
                                ? 0.0
                                : loss_sum / static_cast<double>(triplet_count);
            rec.active_fraction = triplet_count == 0
                                      ? 0.0
                                      : static_cast<double>(active_count) /
                                            static_cast<double>(triplet_count);
        }

        records.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (!rec.degenerate && rec.out_of_box == 1.0 && rec.mean_loss < cfg.stop_tol) {
            ++calm_epochs;
        } else {
            calm_epochs = 0;
        }
        if (calm_epochs >= cfg.patience) break;
    }
    return records;
}

}  // namespace tw
