#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mwand/raster.hpp"
#include "mwand/views.hpp"

namespace mwand {

inline constexpr int kViewFeatureDim = 384;
inline constexpr int kOccupancyGrid = 16;
inline constexpr int kShadingGrid = 8;

using ViewFeature = std::vector<float>;

struct PartEmbedding {
    PartId part_id = kNoPart;
    std::vector<float> x;

    bool operator==(const PartEmbedding&) const = default;
};

struct ProjectedEmbedding {
    PartId part_id = kNoPart;
    std::vector<double> z;
};

/// Per-view encoder contract: one fixed-width feature vector per render.
class FeatureBackend {
public:
    virtual ~FeatureBackend() = default;
    virtual int dim() const = 0;
    virtual ViewFeature extract(const FrameBuffer& fb, PartId part, ViewRole role) const = 0;
};

/// Coarse silhouette / depth / shading grids of the highlighted part:
///   [0, 256)   16x16 occupancy fraction of part pixels per cell
///   [256, 320) 8x8 mean depth over part pixels, min-max normalized over the part
///   [320, 384) 8x8 mean shaded intensity over part pixels
/// A buffer without part pixels yields the zero vector.
ViewFeature extract_view_feature(const FrameBuffer& fb, PartId part, ViewRole role);

class BuiltinBackend final : public FeatureBackend {
public:
    int dim() const override { return kViewFeatureDim; }
    ViewFeature extract(const FrameBuffer& fb, PartId part, ViewRole role) const override {
        return extract_view_feature(fb, part, role);
    }
};

/// Which renders contribute to x (ablations drop some).
struct ViewSelection {
    bool isolated = true;
    bool context = true;
    bool full = true;

    int count() const { return int{isolated} + int{context} + int{full}; }
    std::vector<ViewRole> roles() const;
};

/// x = [f(isolated); f(context); f(full)], restricted to the selected views.
/// Throws ConfigError when the backend emits a feature of the wrong width.
PartEmbedding embed_part(const ViewSet& views, const FeatureBackend& backend, const ViewSelection& selection = {});

/// Two-layer ReLU MLP, parameters row-major.
struct ProjectionHead {
    using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Matrix w1;              // hidden x input
    Eigen::VectorXd b1;     // hidden
    Matrix w2;              // output x hidden
    Eigen::VectorXd b2;     // output
    std::uint64_t seed = 0;

    int input_dim() const { return static_cast<int>(w1.cols()); }
    int hidden_dim() const { return static_cast<int>(w1.rows()); }
    int output_dim() const { return static_cast<int>(w2.rows()); }
    std::size_t parameter_count() const {
        return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
    }

    static ProjectionHead zeros(int input, int hidden, int output);
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    static ProjectionHead initialized(int input, int hidden, int output, std::uint64_t seed);
};

inline constexpr int kEmbeddingDim = 3 * kViewFeatureDim;
inline constexpr int kHiddenDim = 512;
inline constexpr int kProjectionDim = 128;

/// Pre-normalization output u = W2 relu(W1 x + b1) + b2.
Eigen::VectorXd head_forward(const ProjectionHead& head, const Eigen::VectorXd& x);

/// z = u / |u|, or e1 when |u| < 1e-12.
ProjectedEmbedding project(const PartEmbedding& x, const ProjectionHead& head);

/// Checkpoint: "MWHEAD1\n", u32 LE header length, JSON header, f32 LE
/// parameters (w1, b1, w2, b2; row-major).
void save_head(const ProjectionHead& head, const std::filesystem::path& path, const nlohmann::json& config = {});
ProjectionHead load_head(const std::filesystem::path& path);

/// One record of an on-disk vector store.
struct StoreEntry {
    PartId part_id = kNoPart;
    std::string view;
    int variant = 0;
    std::vector<float> values;
};

/// Index JSON `{dim, order:[{part_id, view[, variant]}]}` and a blob of
/// little-endian f32 densely packed in index order.
void write_vector_store(const std::filesystem::path& index_file, const std::filesystem::path& blob_file, int dim,
                        const std::vector<StoreEntry>& entries, const nlohmann::json& extra = {});
std::vector<StoreEntry> read_vector_store(const std::filesystem::path& index_file,
                                          const std::filesystem::path& blob_file, int* dim_out = nullptr);

/// Splits each x into its per-view blocks and writes them as a store.
void write_embedding_store(const std::filesystem::path& index_file, const std::filesystem::path& blob_file,
                           const std::vector<PartEmbedding>& embeddings, const ViewSelection& selection = {},
                           int view_dim = kViewFeatureDim);

/// Reads a per-view store and concatenates (isolated, context, full) per part.
/// Only variant 0 entries are used. Throws FormatError for size mismatches or
/// missing views and DataError for non-finite values.
std::map<PartId, PartEmbedding> load_external_embeddings(const std::filesystem::path& index_file,
                                                         const std::filesystem::path& blob_file);

/// All variants: key (part_id, variant).
std::map<std::pair<PartId, int>, PartEmbedding> load_embedding_variants(const std::filesystem::path& index_file,
                                                                        const std::filesystem::path& blob_file);

}  // namespace mwand
