#include "mwand/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mwand/errors.hpp"

namespace mwand {

namespace {

std::unordered_set<PartId> positive_set(std::span<const PartId> positives) {
    if (positives.empty()) throw RequestError("positives must be nonempty");
    return {positives.begin(), positives.end()};
}

std::size_t hits_in_top(std::span<const PartId> ranking, const std::unordered_set<PartId>& pos, std::size_t k) {
    const auto n = std::min(k, ranking.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += pos.count(ranking[i]);
    return hits;
}

struct Counts {
    std::size_t selected = 0;
    std::size_t true_pos = 0;
    std::size_t positives = 0;
};

Counts count_at(const QueryResult& q, const std::unordered_set<PartId>& pos, double threshold) {
    Counts c;
    c.positives = pos.size();
    for (const auto& r : q.ranking) {
        if (r.distance > threshold) break;
        ++c.selected;
        c.true_pos += pos.count(r.part_id);
    }
    return c;
}

double precision_of(const Counts& c) {
    return c.selected == 0 ? 1.0 : static_cast<double>(c.true_pos) / static_cast<double>(c.selected);
}

double recall_of(const Counts& c) {
    return c.positives == 0 ? 0.0 : static_cast<double>(c.true_pos) / static_cast<double>(c.positives);
}

double f1_of(const Counts& c) {
    if (c.true_pos == 0) return 0.0;
    const double p = precision_of(c);
    const double r = recall_of(c);
    return 2.0 * p * r / (p + r);
}

void check_sorted(const QueryResult& q) {
    for (std::size_t i = 1; i < q.ranking.size(); ++i) {
        if (q.ranking[i].distance < q.ranking[i - 1].distance) {
            throw RequestError("ranking for query " + std::to_string(q.query) + " is not sorted by distance");
        }
    }
}

}  // namespace

double average_precision(std::span<const PartId> ranking, std::span<const PartId> positives) {
    const auto pos = positive_set(positives);
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (pos.count(ranking[i])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(pos.size());
}

double r_precision(std::span<const PartId> ranking, std::span<const PartId> positives) {
    const auto pos = positive_set(positives);
    return static_cast<double>(hits_in_top(ranking, pos, pos.size())) / static_cast<double>(pos.size());
}

double recall_at_k(std::span<const PartId> ranking, std::span<const PartId> positives, std::size_t k) {
    if (k == 0) throw RequestError("k must be at least 1");
    const auto pos = positive_set(positives);
    return static_cast<double>(hits_in_top(ranking, pos, k)) / static_cast<double>(pos.size());
}

std::vector<PartId> ranking_ids(std::span<const RankedPart> ranking) {
    std::vector<PartId> out;
    out.reserve(ranking.size());
    for (const auto& r : ranking) out.push_back(r.part_id);
    return out;
}

std::vector<double> quantile_thresholds(std::vector<double> values, int n) {
    if (n < 2) throw ConfigError("need at least 2 thresholds");
    if (values.empty()) return {};
    std::sort(values.begin(), values.end());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    const auto last = static_cast<double>(values.size() - 1);
    for (int k = 0; k < n; ++k) {
        const double q = static_cast<double>(k) / static_cast<double>(n - 1);
        const auto idx = static_cast<std::size_t>(std::floor(q * last));
        out.push_back(values[std::min(idx, values.size() - 1)]);
    }
    return out;
}

std::vector<double> pooled_distances(std::span<const QueryResult> queries) {
    std::vector<double> out;
    for (const auto& q : queries) {
        for (const auto& r : q.ranking) out.push_back(r.distance);
    }
    return out;
}

double pr_auc(std::span<const PrPoint> points) {
    if (points.empty()) return 0.0;
    std::vector<std::pair<double, double>> rp;
    rp.reserve(points.size() + 2);
    for (const auto& p : points) rp.emplace_back(p.recall, p.precision);
    std::stable_sort(rp.begin(), rp.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (rp.front().first > 0.0) rp.insert(rp.begin(), {0.0, rp.front().second});
    if (rp.back().first < 1.0) rp.emplace_back(1.0, 0.0);
    double area = 0.0;
    for (std::size_t i = 1; i < rp.size(); ++i) {
        area += (rp[i].first - rp[i - 1].first) * 0.5 * (rp[i].second + rp[i - 1].second);
    }
    return std::clamp(area, 0.0, 1.0);
}

PrCurve pr_curve_quantile(std::span<const QueryResult> queries, int n_thresholds, PrAveraging averaging) {
    if (queries.empty()) throw RequestError("PR curve needs at least one query");
    std::vector<std::unordered_set<PartId>> pos;
    pos.reserve(queries.size());
    for (const auto& q : queries) {
        check_sorted(q);
        pos.push_back(positive_set(q.positives));
    }
    PrCurve curve;
    for (const double t : quantile_thresholds(pooled_distances(queries), n_thresholds)) {
        PrPoint pt{t, 0.0, 0.0};
        if (averaging == PrAveraging::macro) {
            for (std::size_t i = 0; i < queries.size(); ++i) {
                const auto c = count_at(queries[i], pos[i], t);
                pt.precision += precision_of(c);
                pt.recall += recall_of(c);
            }
            pt.precision /= static_cast<double>(queries.size());
            pt.recall /= static_cast<double>(queries.size());
        } else {
            Counts total;
            for (std::size_t i = 0; i < queries.size(); ++i) {
                const auto c = count_at(queries[i], pos[i], t);
                total.selected += c.selected;
                total.true_pos += c.true_pos;
                total.positives += c.positives;
            }
            pt.precision = precision_of(total);
            pt.recall = recall_of(total);
        }
        curve.points.push_back(pt);
    }
    std::stable_sort(curve.points.begin(), curve.points.end(),
                     [](const PrPoint& a, const PrPoint& b) { return a.recall < b.recall; });
    curve.auc = pr_auc(curve.points);
    return curve;
}

double query_f1(const QueryResult& q, double lambda) {
    check_sorted(q);
    return f1_of(count_at(q, positive_set(q.positives), lambda));
}

double f1_at_lambda(std::span<const QueryResult> queries, double lambda) {
    if (queries.empty()) throw RequestError("F1 needs at least one query");
    double sum = 0.0;
    for (const auto& q : queries) sum += query_f1(q, lambda);
    return sum / static_cast<double>(queries.size());
}

LambdaChoice select_lambda_f1(std::span<const QueryResult> validation, int n_thresholds) {
    if (validation.empty()) throw RequestError("lambda selection needs at least one validation query");
    auto grid = quantile_thresholds(pooled_distances(validation), n_thresholds);
    if (grid.empty()) grid.push_back(0.0);
    std::sort(grid.begin(), grid.end());
    LambdaChoice best{grid.front(), -1.0};
    for (const double t : grid) {
        const double f1 = f1_at_lambda(validation, t);
        if (f1 > best.f1) best = {t, f1};
    }
    return best;
}

MetricsReport evaluate(std::span<const QueryResult> validation, std::span<const QueryResult> test, int n_thresholds,
                       PrAveraging averaging) {
    if (test.empty()) throw RequestError("evaluation needs at least one test query");
    MetricsReport rep;
    const auto choice = select_lambda_f1(validation, n_thresholds);
    rep.lambda = choice.lambda;
    rep.validation_f1 = choice.f1;
    rep.query_count = test.size();
    for (const auto& q : test) {
        const auto ids = ranking_ids(q.ranking);
        MetricsReport::PerQuery pq;
        pq.mesh = q.mesh;
        pq.query = q.query;
        pq.positives = q.positives.size();
        pq.ap = average_precision(ids, q.positives);
        pq.r_prec = r_precision(ids, q.positives);
        pq.recall_5 = recall_at_k(ids, q.positives, 5);
        pq.recall_10 = recall_at_k(ids, q.positives, 10);
        pq.recall_20 = recall_at_k(ids, q.positives, 20);
        pq.recall_100 = recall_at_k(ids, q.positives, 100);
        pq.f1 = query_f1(q, rep.lambda);
        rep.map += pq.ap;
        rep.r_prec += pq.r_prec;
        rep.recall_5 += pq.recall_5;
        rep.recall_10 += pq.recall_10;
        rep.recall_20 += pq.recall_20;
        rep.recall_100 += pq.recall_100;
        rep.f1 += pq.f1;
        rep.per_query.push_back(std::move(pq));
    }
    const auto n = static_cast<double>(test.size());
    rep.map /= n;
    rep.r_prec /= n;
    rep.recall_5 /= n;
    rep.recall_10 /= n;
    rep.recall_20 /= n;
    rep.recall_100 /= n;
    rep.f1 /= n;
    rep.curve = pr_curve_quantile(test, n_thresholds, averaging);
    rep.auc_pr = rep.curve.auc;
    return rep;
}

nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["query_count"] = r.query_count;
    j["lambda"] = r.lambda;
    j["validation_f1"] = r.validation_f1;
    j["auc_pr"] = r.auc_pr;
    j["r_prec"] = r.r_prec;
    j["map"] = r.map;
    j["recall_at_5"] = r.recall_5;
    j["recall_at_10"] = r.recall_10;
    j["recall_at_20"] = r.recall_20;
    j["recall_at_100"] = r.recall_100;
    j["f1"] = r.f1;
    j["table"] = {{"AUC PR", 100.0 * r.auc_pr}, {"R-Prec", 100.0 * r.r_prec}, {"mAP", 100.0 * r.map},
                  {"R@5", 100.0 * r.recall_5},  {"R@10", 100.0 * r.recall_10}, {"R@20", 100.0 * r.recall_20},
                  {"R@100", 100.0 * r.recall_100}, {"F1", 100.0 * r.f1}};
    auto per = nlohmann::json::array();
    for (const auto& q : r.per_query) {
        per.push_back({{"mesh", q.mesh},
                       {"query_part", q.query},
                       {"positives", q.positives},
                       {"ap", q.ap},
                       {"r_prec", q.r_prec},
                       {"recall_at_5", q.recall_5},
                       {"recall_at_10", q.recall_10},
                       {"recall_at_20", q.recall_20},
                       {"recall_at_100", q.recall_100},
                       {"f1", q.f1}});
    }
    j["per_query"] = std::move(per);
    auto curve = nlohmann::json::array();
    for (const auto& p : r.curve.points) curve.push_back({p.threshold, p.recall, p.precision});
    j["pr_curve"] = std::move(curve);
    return j;
}

namespace {

BenchmarkMesh mesh_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("mesh") || !j.contains("queries") || !j["queries"].is_array()) {
        throw FormatError("benchmark entry needs 'mesh' and a 'queries' array");
    }
    BenchmarkMesh m;
    m.mesh = j["mesh"].get<std::string>();
    for (const auto& q : j["queries"]) {
        if (!q.contains("query_part") || !q.contains("positives")) {
            throw FormatError("benchmark query needs 'query_part' and 'positives'");
        }
        BenchmarkQuery bq;
        bq.query_part = q["query_part"].get<PartId>();
        bq.positives = q["positives"].get<std::vector<PartId>>();
        if (bq.positives.empty()) throw FormatError("benchmark query has no positives");
        m.queries.push_back(std::move(bq));
    }
    return m;
}

}  // namespace

std::vector<BenchmarkMesh> benchmark_from_json(const nlohmann::json& j) {
    std::vector<BenchmarkMesh> out;
    if (j.is_array()) {
        for (const auto& e : j) out.push_back(mesh_from_json(e));
    } else {
        out.push_back(mesh_from_json(j));
    }
    return out;
}

nlohmann::json benchmark_to_json(std::span<const BenchmarkMesh> meshes) {
    auto arr = nlohmann::json::array();
    for (const auto& m : meshes) {
        auto qs = nlohmann::json::array();
        for (const auto& q : m.queries) qs.push_back({{"query_part", q.query_part}, {"positives", q.positives}});
        arr.push_back({{"mesh", m.mesh}, {"queries", std::move(qs)}});
    }
    return arr;
}

void validate_query(const BenchmarkQuery& q, std::size_t part_count) {
    const auto in_range = [&](PartId p) { return p >= 0 && static_cast<std::size_t>(p) < part_count; };
    if (!in_range(q.query_part)) throw RequestError("query part " + std::to_string(q.query_part) + " out of range");
    if (q.positives.empty()) throw RequestError("query " + std::to_string(q.query_part) + " has no positives");
    for (const auto p : q.positives) {
        if (p == q.query_part) throw RequestError("query " + std::to_string(p) + " listed among its positives");
        if (!in_range(p)) throw RequestError("positive part " + std::to_string(p) + " out of range");
    }
}

std::vector<QueryResult> run_queries(const EmbeddingIndex& index, const BenchmarkMesh& mesh) {
    std::vector<QueryResult> out;
    out.reserve(mesh.queries.size());
    for (const auto& q : mesh.queries) {
        validate_query(q, index.part_count());
        out.push_back({mesh.mesh, q.query_part, rank_parts(index, q.query_part), q.positives});
    }
    return out;
}

}  // namespace mwand
