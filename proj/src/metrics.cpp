#include "tw/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "tw/parallel.hpp"
#include "tw/rng.hpp"
#include "tw/util.hpp"

namespace tw {

MetricsReport metrics_from_confusion(std::vector<std::vector<std::int64_t>> confusion,
                                     std::vector<std::int64_t> unlabeled_pred_per_class) {
    const int C = static_cast<int>(confusion.size());
    require(C >= 1, "metrics: empty confusion matrix");
    for (const auto& row : confusion) {
        require(static_cast<int>(row.size()) == C, "metrics: confusion matrix is not square");
    }
    if (unlabeled_pred_per_class.empty()) {
        unlabeled_pred_per_class.assign(static_cast<std::size_t>(C), 0);
    }
    require(static_cast<int>(unlabeled_pred_per_class.size()) == C,
            "metrics: unlabeled counts do not match the class count");

    MetricsReport rep;
    rep.confusion = std::move(confusion);
    rep.unlabeled_pred_per_class = std::move(unlabeled_pred_per_class);

    std::int64_t trace = 0, total = 0;
    std::vector<std::int64_t> row_totals(static_cast<std::size_t>(C), 0);
    std::vector<std::int64_t> col_totals(static_cast<std::size_t>(C), 0);
    for (int t = 0; t < C; ++t) {
        trace += rep.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(t)];
        row_totals[static_cast<std::size_t>(t)] = rep.unlabeled_pred_per_class[static_cast<std::size_t>(t)];
        for (int p = 0; p < C; ++p) {
            const std::int64_t v = rep.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
            require(v >= 0, "metrics: negative confusion count");
            row_totals[static_cast<std::size_t>(t)] += v;
            col_totals[static_cast<std::size_t>(p)] += v;
        }
        total += row_totals[static_cast<std::size_t>(t)];
    }
    require(total > 0, "metrics: no test pixels");
    rep.total = total;
    rep.oa = static_cast<double>(trace) / static_cast<double>(total);

    rep.per_class_accuracy.assign(static_cast<std::size_t>(C),
                                  std::numeric_limits<double>::quiet_NaN());
    double recall_sum = 0.0;
    int present = 0;
    for (int t = 0; t < C; ++t) {
        if (row_totals[static_cast<std::size_t>(t)] == 0) continue;  // class absent from the test set
        const double recall =
            static_cast<double>(rep.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(t)]) /
            static_cast<double>(row_totals[static_cast<std::size_t>(t)]);
        rep.per_class_accuracy[static_cast<std::size_t>(t)] = recall;
        recall_sum += recall;
        ++present;
    }
    rep.aa = recall_sum / static_cast<double>(present);

    // kappa = (p_o - p_e) / (1 - p_e) computed on integers:
    // (N*trace - sum r_c*k_c) / (N^2 - sum r_c*k_c)
    std::int64_t cross = 0;
    for (int c = 0; c < C; ++c) {
        cross += row_totals[static_cast<std::size_t>(c)] * col_totals[static_cast<std::size_t>(c)];
    }
    const std::int64_t denom = total * total - cross;
    if (denom == 0) {
        rep.kappa = std::numeric_limits<double>::quiet_NaN();
        rep.kappa_defined = false;
    } else {
        rep.kappa = static_cast<double>(total * trace - cross) / static_cast<double>(denom);
    }
    return rep;
}

MetricsReport compute_metrics(const std::vector<std::uint16_t>& pred_raster,
                              const HsiDataset& ds, const SplitMask& mask) {
    require(static_cast<std::int64_t>(pred_raster.size()) == ds.n_pixels(),
            "compute_metrics: prediction raster has ", pred_raster.size(), " pixels, dataset has ",
            ds.n_pixels());
    require(mask.state.size() == pred_raster.size(),
            "compute_metrics: split mask does not match the dataset");
    const int C = ds.n_classes;
    std::vector<std::vector<std::int64_t>> confusion(
        static_cast<std::size_t>(C), std::vector<std::int64_t>(static_cast<std::size_t>(C), 0));
    std::vector<std::int64_t> unlabeled(static_cast<std::size_t>(C), 0);
    for (std::size_t pix = 0; pix < pred_raster.size(); ++pix) {
        if (mask.state[pix] != SplitMask::kTest) continue;
        const int truth = ds.labels[pix];
        require(truth >= 1 && truth <= C, "compute_metrics: test pixel ", pix,
                " has ground-truth label ", truth);
        const int pred = pred_raster[pix];
        require(pred <= C, "compute_metrics: prediction ", pred, " exceeds class count ", C);
        if (pred == 0) {
            ++unlabeled[static_cast<std::size_t>(truth - 1)];
        } else {
            ++confusion[static_cast<std::size_t>(truth - 1)][static_cast<std::size_t>(pred - 1)];
        }
    }
    return metrics_from_confusion(std::move(confusion), std::move(unlabeled));
}

namespace {

double average_precision(const Tensor& emb, const std::vector<int>& labels, int query,
                         std::vector<int>& order_buf, std::vector<double>& score_buf) {
    const int n = static_cast<int>(emb.dim(0));
    const std::int64_t d = emb.dim(1);
    const double* q = emb.row(query);
    score_buf.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        const double* r = emb.row(i);
        for (std::int64_t j = 0; j < d; ++j) {
            const double diff = q[j] - r[j];
            s += diff * diff;
        }
        score_buf[static_cast<std::size_t>(i)] = std::exp(-std::sqrt(s));
    }
    order_buf.clear();
    for (int i = 0; i < n; ++i) {
        if (i != query) order_buf.push_back(i);
    }
    std::sort(order_buf.begin(), order_buf.end(), [&](int a, int b) {
        const double sa = score_buf[static_cast<std::size_t>(a)];
        const double sb = score_buf[static_cast<std::size_t>(b)];
        if (sa != sb) return sa > sb;
        return a < b;
    });

    int n_relevant = 0;
    for (int i = 0; i < n; ++i) {
        if (i != query && labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(query)]) {
            ++n_relevant;
        }
    }
    if (n_relevant == 0) return -1.0;  // caller counts this as skipped

    double ap = 0.0;
    int hits = 0;
    for (std::size_t rank = 0; rank < order_buf.size(); ++rank) {
        if (labels[static_cast<std::size_t>(order_buf[rank])] == labels[static_cast<std::size_t>(query)]) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    return ap / static_cast<double>(n_relevant);
}

}  // namespace

MapResult mean_average_precision(const Tensor& embeddings, const std::vector<int>& labels,
                                 int subsample, std::uint64_t seed, int threads) {
    require(embeddings.rank() == 2, "MAP: expected [n, d] embeddings, got ",
            embeddings.shape_str());
    const int n = static_cast<int>(embeddings.dim(0));
    require(n >= 2, "MAP: need at least 2 points, got ", n);
    require(static_cast<int>(labels.size()) == n, "MAP: ", labels.size(), " labels for ", n,
            " points");
    require(subsample >= 0, "MAP: negative subsample");

    std::vector<int> queries;
    int budget = subsample;
    if (budget == 0 && n >= 5000) budget = 2000;
    if (budget == 0 || budget >= n) {
        queries.resize(static_cast<std::size_t>(n));
        std::iota(queries.begin(), queries.end(), 0);
    } else {
        Rng rng = Rng::derive(seed, {stream::kMapSubsample});
        queries = rng.sample_without_replacement(n, budget);
        std::sort(queries.begin(), queries.end());
    }

    std::vector<double> ap(queries.size());
    parallel_for(static_cast<std::int64_t>(queries.size()), threads,
                 [&](std::int64_t begin, std::int64_t end) {
                     std::vector<int> order_buf;
                     std::vector<double> score_buf;
                     for (std::int64_t i = begin; i < end; ++i) {
                         ap[static_cast<std::size_t>(i)] = average_precision(
                             embeddings, labels, queries[static_cast<std::size_t>(i)], order_buf,
                             score_buf);
                     }
                 });

    MapResult res;
    double sum = 0.0;
    for (double a : ap) {
        if (a < 0.0) {
            ++res.skipped;
        } else {
            sum += a;
            ++res.queries;
        }
    }
    require(res.queries > 0, "MAP: every query's class was a singleton");
    res.value = sum / static_cast<double>(res.queries);
    return res;
}

void write_report(const MetricsReport& report, const SplitMask& mask,
                  const std::string& config_echo_json, const std::string& json_path,
                  const std::string& csv_path) {
    const int C = static_cast<int>(report.per_class_accuracy.size());
    nlohmann::ordered_json j;
    j["format"] = "twreport";
    j["version"] = 1;
    j["config"] = config_echo_json.empty()
                      ? nlohmann::ordered_json(nullptr)
                      : nlohmann::ordered_json::parse(config_echo_json);
    j["oa"] = report.oa;
    j["aa"] = report.aa;
    j["kappa"] = report.kappa_defined ? nlohmann::ordered_json(report.kappa)
                                      : nlohmann::ordered_json(nullptr);
    j["kappa_defined"] = report.kappa_defined;
    j["total_test"] = report.total;
    if (report.has_map) {
        j["map"] = {{"value", report.map},
                    {"queries", report.map_queries},
                    {"skipped", report.map_skipped}};
    }
    nlohmann::ordered_json per_class = nlohmann::ordered_json::array();
    for (int c = 0; c < C; ++c) {
        const double acc = report.per_class_accuracy[static_cast<std::size_t>(c)];
        per_class.push_back(
            {{"class", c + 1},
             {"train_n", mask.train_per_class.empty() ? 0 : mask.train_per_class[static_cast<std::size_t>(c)]},
             {"test_n", mask.test_per_class.empty() ? 0 : mask.test_per_class[static_cast<std::size_t>(c)]},
             {"accuracy", std::isnan(acc) ? nlohmann::ordered_json(nullptr)
                                          : nlohmann::ordered_json(acc)},
             {"unlabeled_predictions", report.unlabeled_pred_per_class[static_cast<std::size_t>(c)]}});
    }
    j["per_class"] = per_class;
    j["confusion"] = report.confusion;

    std::ofstream jout(json_path);
    require(jout.good(), "cannot write ", json_path);
    jout << j.dump(2) << "\n";

    std::ofstream cout_(csv_path);
    require(cout_.good(), "cannot write ", csv_path);
    cout_ << "class,train_n,test_n,accuracy\n";
    for (int c = 0; c < C; ++c) {
        const double acc = report.per_class_accuracy[static_cast<std::size_t>(c)];
        cout_ << c + 1 << ","
              << (mask.train_per_class.empty() ? 0 : mask.train_per_class[static_cast<std::size_t>(c)]) << ","
              << (mask.test_per_class.empty() ? 0 : mask.test_per_class[static_cast<std::size_t>(c)]) << ",";
        if (std::isnan(acc)) {
            cout_ << "nan";
        } else {
            cout_ << acc;
        }
        cout_ << "\n";
    }
}

}  // namespace tw
