#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tw/dataset.hpp"
#include "tw/tensor.hpp"

namespace tw {

struct MetricsReport {
    double oa = 0.0;
    double aa = 0.0;
    double kappa = 0.0;
    bool kappa_defined = true;
    // index = class id - 1; recall is NaN for classes with no test pixels
    std::vector<double> per_class_accuracy;
    // confusion[truth][pred], both 0-based; unlabeled predictions are kept
    // out of the matrix and counted separately (they are wrong against
    // every class).
    std::vector<std::vector<std::int64_t>> confusion;
    std::vector<std::int64_t> unlabeled_pred_per_class;
    std::int64_t total = 0;

    bool has_map = false;
    double map = 0.0;
    int map_queries = 0;
    int map_skipped = 0;
};

// OA, AA and kappa from a filled confusion matrix (+ optional per-class
// unlabeled-prediction counts). kappa uses the integer form
// (N*trace - sum_c row_c*col_c) / (N^2 - sum_c row_c*col_c) and is flagged
// undefined when the denominator vanishes.
MetricsReport metrics_from_confusion(std::vector<std::vector<std::int64_t>> confusion,
                                     std::vector<std::int64_t> unlabeled_pred_per_class = {});

// Scores a predicted label raster (1-based classes, 0 = no prediction)
// against the dataset ground truth over the mask's test pixels.
MetricsReport compute_metrics(const std::vector<std::uint16_t>& pred_raster,
                              const HsiDataset& ds, const SplitMask& mask);

struct MapResult {
    double value = 0.0;
    int queries = 0;  // queries actually scored
    int skipped = 0;  // queries whose class has no other member
};

// Mean average precision of same-class retrieval: each query ranks all other
// points by exp(-Euclidean distance) descending (ties by point index), and
// AP averages precision at the relevant ranks. subsample = 0 applies the
// default policy (all points below 5000, else 2000 seeded queries).
MapResult mean_average_precision(const Tensor& embeddings, const std::vector<int>& labels,
                                 int subsample = 0, std::uint64_t seed = 0, int threads = 1);

// report.json (full report + config echo + per-class table) and report.csv
// (class,train_n,test_n,accuracy).
void write_report(const MetricsReport& report, const SplitMask& mask,
                  const std::string& config_echo_json, const std::string& json_path,
                  const std::string& csv_path);

}  // namespace tw
