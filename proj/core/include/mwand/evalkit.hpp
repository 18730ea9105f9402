#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mwand/retrieve.hpp"

namespace mwand {

/// Mean over positives of precision at each positive's rank; positives absent
/// from the ranking contribute 0. Throws RequestError on empty positives.
double average_precision(std::span<const PartId> ranking, std::span<const PartId> positives);

/// Precision within the top-R, R = |positives|.
double r_precision(std::span<const PartId> ranking, std::span<const PartId> positives);

/// |top-k ∩ positives| / |positives|.
double recall_at_k(std::span<const PartId> ranking, std::span<const PartId> positives, std::size_t k);

/// A ranked retrieval for one benchmark query.
struct QueryResult {
    std::string mesh;
    PartId query = kNoPart;
    std::vector<RankedPart> ranking;  // every other part, ascending distance
    std::vector<PartId> positives;    // ground truth minus the query
};

std::vector<PartId> ranking_ids(std::span<const RankedPart> ranking);

/// Lower empirical quantiles sorted[floor(q (N - 1))] at q = k / (n - 1),
/// k = 0..n-1, so the first and last thresholds are the min and max.
std::vector<double> quantile_thresholds(std::vector<double> values, int n);

/// Every distance of every query's ranking.
std::vector<double> pooled_distances(std::span<const QueryResult> queries);

struct PrPoint {
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

enum class PrAveraging {
    macro,  // per-threshold mean of per-query precision and recall
    micro,  // precision and recall of the pooled selections
};

struct PrCurve {
    std::vector<PrPoint> points;  // sorted by recall, before endpoint extension
    double auc = 0.0;
};

/// Precision of an empty selection is 1. The curve is extended to recall 0
/// with the first precision and to recall 1 with precision 0 when recall 1 is
/// never reached, then integrated by the trapezoid rule without interpolation.
PrCurve pr_curve_quantile(std::span<const QueryResult> queries, int n_thresholds = 200,
                          PrAveraging averaging = PrAveraging::macro);

/// Trapezoid area of a recall-sorted curve with the endpoint extension above.
double pr_auc(std::span<const PrPoint> points);

/// Selection = ranking prefix with distance <= lambda (query excluded).
double query_f1(const QueryResult& q, double lambda);
double f1_at_lambda(std::span<const QueryResult> queries, double lambda);

struct LambdaChoice {
    double lambda = 0.0;
    double f1 = 0.0;
};

/// Macro-F1 argmax over quantile thresholds of the pooled distances, ties to
/// the smallest lambda.
LambdaChoice select_lambda_f1(std::span<const QueryResult> validation, int n_thresholds = 200);

struct MetricsReport {
    std::size_t query_count = 0;
    double lambda = 0.0;
    double validation_f1 = 0.0;
    double auc_pr = 0.0;
    double r_prec = 0.0;
    double map = 0.0;
    double recall_5 = 0.0;
    double recall_10 = 0.0;
    double recall_20 = 0.0;
    double recall_100 = 0.0;
    double f1 = 0.0;

    struct PerQuery {
        std::string mesh;
        PartId query = kNoPart;
        std::size_t positives = 0;
        double ap = 0.0;
        double r_prec = 0.0;
        double recall_5 = 0.0;
        double recall_10 = 0.0;
        double recall_20 = 0.0;
        double recall_100 = 0.0;
        double f1 = 0.0;
    };
    std::vector<PerQuery> per_query;
    PrCurve curve;
};

/// Selects lambda on `validation`, then macro-averages every metric over `test`.
MetricsReport evaluate(std::span<const QueryResult> validation, std::span<const QueryResult> test,
                       int n_thresholds = 200, PrAveraging averaging = PrAveraging::macro);

/// Includes a `table` object keyed by the usual column names
/// (AUC PR, R-Prec, mAP, R@5, R@10, R@20, R@100, F1), in percent.
nlohmann::json report_to_json(const MetricsReport& report);

struct BenchmarkQuery {
    PartId query_part = kNoPart;
    std::vector<PartId> positives;
};

struct BenchmarkMesh {
    std::string mesh;  // path to the mesh file
    std::vector<BenchmarkQuery> queries;
};

/// Accepts one `{mesh, queries:[{query_part, positives}]}` object or an array of them.
std::vector<BenchmarkMesh> benchmark_from_json(const nlohmann::json& j);
nlohmann::json benchmark_to_json(std::span<const BenchmarkMesh> meshes);

/// Throws RequestError if the query is among its positives or ids fall outside [0, part_count).
void validate_query(const BenchmarkQuery& q, std::size_t part_count);

/// Runs rank_parts for every query of a mesh.
std::vector<QueryResult> run_queries(const EmbeddingIndex& index, const BenchmarkMesh& mesh);

}  // namespace mwand
