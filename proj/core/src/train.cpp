#include "mwand/train.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "mwand/errors.hpp"
#include "mwand/random.hpp"

namespace mwand {

namespace {

// Keeps a uniformly random subset of `keep` items, preserving their order.
template <typename T>
void subsample(std::vector<T>& items, std::size_t keep, Rng& rng) {
    if (items.size() <= keep) return;
    std::vector<std::size_t> idx(items.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    std::vector<T> out;
    out.reserve(keep);
    for (const auto i : idx) out.push_back(std::move(items[i]));
    items = std::move(out);
}

struct Unit {
    PartId representative;
    std::vector<PartId> instances;  // ascending, excluding the representative
};

std::vector<TrainSample> balance_material(const CorpusMesh& mesh, MaterialId material, const std::vector<Unit>& units,
                                          const BalanceConfig& cfg) {
    std::vector<TrainSample> out;
    auto make = [&](PartId pid, SampleTag tag, int variant) {
        const auto& part = mesh.parts[static_cast<std::size_t>(pid)];
        return TrainSample{mesh.mesh_id, pid, material, tag, variant, part.views[static_cast<std::size_t>(variant)]};
    };
    const auto target = static_cast<std::size_t>(cfg.min_samples);
    for (const auto& u : units) out.push_back(make(u.representative, SampleTag::base, 0));

    // Other instances, round-robin over the deduplicated units.
    for (std::size_t round = 0; out.size() < target; ++round) {
        bool any = false;
        for (const auto& u : units) {
            if (round >= u.instances.size()) continue;
            any = true;
            if (out.size() >= target) break;
            out.push_back(make(u.instances[round], SampleTag::extra_instance, 0));
        }
        if (!any) break;
    }

    // Extra viewpoints, round-robin over the samples gathered so far.
    const std::size_t base_count = out.size();
    for (int variant = 1; out.size() < target; ++variant) {
        bool any = false;
        for (std::size_t i = 0; i < base_count && out.size() < target; ++i) {
            const auto& part = mesh.parts[static_cast<std::size_t>(out[i].part_id)];
            if (static_cast<std::size_t>(variant) >= part.views.size()) continue;
            any = true;
            out.push_back(make(out[i].part_id, SampleTag::extra_view, variant));
        }
        if (!any) break;
    }
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (samples_per_key < 2) throw ConfigError("samples_per_key must be at least 2");
    if (steps < 0) throw ConfigError("steps must be non-negative");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

std::string_view to_string(SampleTag tag) {
    switch (tag) {
        case SampleTag::base: return "base";
        case SampleTag::extra_instance: return "extra-instance";
        case SampleTag::extra_view: return "extra-view";
    }
    return "?";
}

std::vector<TrainSample> balance_dataset(std::span<const CorpusMesh> corpus, const BalanceConfig& cfg) {
    Rng rng(cfg.seed);
    std::vector<TrainSample> out;
    for (const auto& mesh : corpus) {
        // Deduplicated units per material: within each dedup group, the lowest
        // part of a given material represents it and the rest are instances.
        std::map<MaterialId, std::vector<Unit>> units;
        for (const auto& group : mesh.groups.groups) {
            std::map<MaterialId, std::size_t> unit_of;  // material -> index into units[material]
            for (const auto pid : group.members) {
                const auto mat = mesh.parts.at(static_cast<std::size_t>(pid)).material_id;
                auto& list = units[mat];
                const auto [it, inserted] = unit_of.try_emplace(mat, list.size());
                if (inserted) {
                    list.push_back({pid, {}});
                } else {
                    list[it->second].instances.push_back(pid);
                }
            }
        }
        for (auto& [mat, list] : units) {
            std::sort(list.begin(), list.end(), [](const Unit& a, const Unit& b) { return a.representative < b.representative; });
        }

        std::map<MaterialId, std::vector<TrainSample>> per_key;
        for (const auto& [mat, list] : units) {
            auto samples = balance_material(mesh, mat, list, cfg);
            if (samples.size() < 2) continue;
            subsample(samples, static_cast<std::size_t>(cfg.max_samples), rng);
            per_key.emplace(mat, std::move(samples));
        }

        for (bool changed = true; changed && !per_key.empty();) {
            changed = false;
            std::size_t least = std::numeric_limits<std::size_t>::max();
            for (const auto& [mat, s] : per_key) least = std::min(least, s.size());
            const auto limit = static_cast<std::size_t>(std::floor(cfg.max_ratio * static_cast<double>(least)));
            for (auto& [mat, s] : per_key) {
                if (s.size() > limit) {
                    subsample(s, limit, rng);
                    changed = true;
                }
            }
        }
        for (auto& [mat, s] : per_key) {
            for (auto& sample : s) out.push_back(std::move(sample));
        }
    }
    return out;
}

SupConResult supcon_loss(const Eigen::MatrixXd& z, std::span<const int> labels, double temperature) {
    const auto n = z.rows();
    if (static_cast<std::size_t>(n) != labels.size()) throw ConfigError("one label per embedding required");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    const Eigen::MatrixXd logits = (z * z.transpose()) / temperature;

    std::vector<int> positives(static_cast<std::size_t>(n), 0);
    int anchors = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i && labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) ++positives[static_cast<std::size_t>(i)];
        }
        anchors += positives[static_cast<std::size_t>(i)] > 0;
    }
    if (anchors == 0) throw RequestError("batch has no anchor with a positive");

    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    double loss = 0.0;
    const double inv_anchors = 1.0 / anchors;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int np = positives[static_cast<std::size_t>(i)];
        if (np == 0) continue;
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index a = 0; a < n; ++a) {
            if (a != i) m = std::max(m, logits(i, a));
        }
        double sum = 0.0;
        for (Eigen::Index a = 0; a < n; ++a) {
            if (a != i) sum += std::exp(logits(i, a) - m);
        }
        const double lse = m + std::log(sum);
        double pos_mean = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i && labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) pos_mean += logits(i, j);
        }
        pos_mean /= np;
        loss += (lse - pos_mean) * inv_anchors;
        for (Eigen::Index a = 0; a < n; ++a) {
            if (a == i) continue;
            const double p = std::exp(logits(i, a) - lse);
            const double target = labels[static_cast<std::size_t>(a)] == labels[static_cast<std::size_t>(i)] ? 1.0 / np : 0.0;
            g(i, a) = (p - target) * inv_anchors;
        }
    }
    SupConResult out;
    out.loss = loss;
    out.anchors = anchors;
    out.grad = ((g + g.transpose()) * z) / temperature;
    return out;
}

BatchResult head_loss_and_gradients(const ProjectionHead& head, const Eigen::MatrixXd& x, std::span<const int> labels,
                                    double temperature) {
    if (x.cols() != head.w1.cols()) {
        throw ConfigError("batch width " + std::to_string(x.cols()) + " does not match head input " +
                          std::to_string(head.w1.cols()));
    }
    const Eigen::MatrixXd pre = (x * head.w1.transpose()).rowwise() + head.b1.transpose();
    const Eigen::MatrixXd act = pre.cwiseMax(0.0);
    const Eigen::MatrixXd u = (act * head.w2.transpose()).rowwise() + head.b2.transpose();
    const Eigen::VectorXd norms = u.rowwise().norm();
    Eigen::MatrixXd z(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        if (norms[i] < 1e-12) {
            z.row(i).setZero();
            z(i, 0) = 1.0;
        } else {
            z.row(i) = u.row(i) / norms[i];
        }
    }
    const SupConResult sc = supcon_loss(z, labels, temperature);

    Eigen::MatrixXd du(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        if (norms[i] < 1e-12) {
            du.row(i).setZero();
            continue;
        }
        const double proj = z.row(i).dot(sc.grad.row(i));
        du.row(i) = (sc.grad.row(i) - proj * z.row(i)) / norms[i];
    }
    const Eigen::MatrixXd dact = du * head.w2;
    const Eigen::MatrixXd dpre = dact.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());

    BatchResult out;
    out.loss = sc.loss;
    out.z = z;
    out.grads.w2 = du.transpose() * act;
    out.grads.b2 = du.colwise().sum().transpose();
    out.grads.w1 = dpre.transpose() * x;
    out.grads.b1 = dpre.colwise().sum().transpose();
    return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg) {
    if (params.size() != grads.size()) throw ConfigError("parameter and gradient sizes differ");
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

TrainResult train_projection_head(std::span<const TrainSample> samples, const TrainConfig& cfg) {
    cfg.validate();
    TrainResult result;
    const int input = samples.empty() ? kEmbeddingDim : static_cast<int>(samples.front().x.size());
    result.head = ProjectionHead::initialized(input, cfg.hidden_dim, cfg.output_dim, cfg.seed);
    if (cfg.steps == 0) return result;

    std::map<std::pair<std::string, MaterialId>, std::vector<std::size_t>> by_key;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (static_cast<int>(samples[i].x.size()) != input) throw ConfigError("training samples have mixed widths");
        by_key[samples[i].material_key()].push_back(i);
    }
    std::vector<const std::vector<std::size_t>*> keys;
    for (const auto& [k, idx] : by_key) {
        if (idx.size() >= 2) keys.push_back(&idx);
    }
    if (keys.empty()) throw ConfigError("no material key has two samples");

    Rng rng(cfg.seed ^ 0x5DEECE66Dull);
    std::array<AdamState, 4> states;
    const auto adam = cfg.adam();
    auto& head = result.head;
    const auto batch_cap = static_cast<std::size_t>(cfg.batch_size);

    std::vector<std::size_t> key_order(keys.size());
    std::iota(key_order.begin(), key_order.end(), 0);
    for (int step = 0; step < cfg.steps; ++step) {
        rng.shuffle(std::span<std::size_t>(key_order));
        std::vector<std::size_t> batch;
        std::vector<int> labels;
        for (const auto k : key_order) {
            const std::size_t remaining = batch_cap - batch.size();
            if (remaining < 2) break;
            std::vector<std::size_t> pool = *keys[k];
            const std::size_t take = std::min({pool.size(), remaining, static_cast<std::size_t>(cfg.samples_per_key)});
            for (std::size_t t = 0; t < take; ++t) {
                const auto j = t + static_cast<std::size_t>(rng.index(pool.size() - t));
                std::swap(pool[t], pool[j]);
                batch.push_back(pool[t]);
                labels.push_back(static_cast<int>(k));
            }
        }
        Eigen::MatrixXd x(static_cast<Eigen::Index>(batch.size()), input);
        for (std::size_t r = 0; r < batch.size(); ++r) {
            const auto& src = samples[batch[r]].x;
            for (int c = 0; c < input; ++c) {
                x(static_cast<Eigen::Index>(r), c) = src[static_cast<std::size_t>(c)];
            }
        }
        const BatchResult br = head_loss_and_gradients(head, x, labels, cfg.temperature);
        if (!std::isfinite(br.loss)) {
            throw DataError("non-finite training loss at step " + std::to_string(step));
        }
        result.loss_curve.push_back(br.loss);
        adam_step({head.w1.data(), static_cast<std::size_t>(head.w1.size())},
                  {br.grads.w1.data(), static_cast<std::size_t>(br.grads.w1.size())}, states[0], adam);
        adam_step({head.b1.data(), static_cast<std::size_t>(head.b1.size())},
                  {br.grads.b1.data(), static_cast<std::size_t>(br.grads.b1.size())}, states[1], adam);
        adam_step({head.w2.data(), static_cast<std::size_t>(head.w2.size())},
                  {br.grads.w2.data(), static_cast<std::size_t>(br.grads.w2.size())}, states[2], adam);
        adam_step({head.b2.data(), static_cast<std::size_t>(head.b2.size())},
                  {br.grads.b2.data(), static_cast<std::size_t>(br.grads.b2.size())}, states[3], adam);
    }
    return result;
}

std::string loss_curve_csv(std::span<const double> losses) {
    std::ostringstream out;
    out.precision(17);
    out << "step,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) out << i << ',' << losses[i] << '\n';
    return out.str();
}

}  // namespace mwand
