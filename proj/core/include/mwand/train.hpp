#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mwand/dedup.hpp"
#include "mwand/encode.hpp"

namespace mwand {

struct AdamConfig {
    double learning_rate = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    double temperature = 0.07;
    double learning_rate = 1e-5;
    int steps = 20000;
    int batch_size = 256;
    /// Upper bound on samples drawn per material key when filling a batch (>= 2).
    int samples_per_key = 8;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int hidden_dim = kHiddenDim;
    int output_dim = kProjectionDim;

    AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
    /// Throws ConfigError on tau <= 0, batch_size < 2, samples_per_key < 2 or steps < 0.
    void validate() const;
};

enum class SampleTag { base, extra_instance, extra_view };

std::string_view to_string(SampleTag tag);

struct TrainSample {
    std::string mesh_id;
    PartId part_id = kNoPart;
    MaterialId material_id = 0;
    SampleTag tag = SampleTag::base;
    int view_variant = 0;
    std::vector<float> x;

    /// Material identity is mesh-local.
    std::pair<std::string, MaterialId> material_key() const { return {mesh_id, material_id}; }

    bool operator==(const TrainSample&) const = default;
};

/// Per-part training inputs: views[0] is the canonical render's embedding,
/// views[k > 0] are embeddings from additional viewpoints.
struct CorpusPart {
    PartId part_id = kNoPart;
    MaterialId material_id = 0;
    std::vector<std::vector<float>> views;
};

struct CorpusMesh {
    std::string mesh_id;
    std::vector<CorpusPart> parts;  // indexed by part_id
    DuplicateGroups groups;
};

struct BalanceConfig {
    int min_samples = 8;
    int max_samples = 100;
    double max_ratio = 5.0;
    std::uint64_t seed = 0;
};

/// Per material key: one sample per deduplicated part; below min_samples,
/// other instances of the same geometry are added first and extra viewpoints
/// second; keys that cannot reach 2 samples are dropped; keys above
/// max_samples are subsampled; finally each mesh's most/least frequent ratio
/// is brought to <= max_ratio by subsampling the largest keys.
std::vector<TrainSample> balance_dataset(std::span<const CorpusMesh> corpus, const BalanceConfig& cfg = {});

struct SupConResult {
    double loss = 0.0;
    Eigen::MatrixXd grad;  // dL/dz, same shape as z
    int anchors = 0;       // anchors with at least one positive
};

/// Supervised contrastive loss over a batch of unit rows of `z`. Anchors
/// without positives are skipped; throws RequestError when none has one.
SupConResult supcon_loss(const Eigen::MatrixXd& z, std::span<const int> labels, double temperature);

struct HeadGradients {
    ProjectionHead::Matrix w1;
    Eigen::VectorXd b1;
    ProjectionHead::Matrix w2;
    Eigen::VectorXd b2;
};

struct BatchResult {
    double loss = 0.0;
    HeadGradients grads;
    Eigen::MatrixXd z;
};

/// Forward through head + normalization, SupCon loss, and backpropagation to
/// every head parameter. Rows of `x` are samples.
BatchResult head_loss_and_gradients(const ProjectionHead& head, const Eigen::MatrixXd& x, std::span<const int> labels,
                                    double temperature);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

/// One bias-corrected Adam update in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg);

struct TrainResult {
    ProjectionHead head;
    std::vector<double> loss_curve;  // one entry per step
};

/// Batches draw material keys, then at least two samples per drawn key.
TrainResult train_projection_head(std::span<const TrainSample> samples, const TrainConfig& cfg);

/// "step,loss" rows.
std::string loss_curve_csv(std::span<const double> losses);

}  // namespace mwand
