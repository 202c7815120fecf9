#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shiftlens/io.hpp"
#include "shiftlens/types.hpp"

namespace shiftlens::saliency {

// Raw (unnormalized) saliency at feature or input resolution.
using RawMap = Grid<double>;

struct PoolSpec {
    std::size_t window = 1;  // k x k max pool over gradients; 1 is identity
};

// Ordered, non-empty list of unique layer names.
class LayerSet {
public:
    explicit LayerSet(std::vector<std::string> names);

    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t size() const noexcept { return names_.size(); }
    bool contains(std::string_view name) const;

private:
    std::vector<std::string> names_;
};

// encoder.4, encoder.5, decoder.0 ... decoder.4
const LayerSet& default_layer_set();

enum class Method { SegXResCam, SegGradCam };

std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view text);

struct MethodSpec {
    Method method = Method::SegXResCam;
    PoolSpec pool;
};

// Stride-1 k x k max filter with edge replication. The window at (h, w)
// spans rows h - (k-1)/2 .. h + k/2, so even k extends toward larger indices.
RawMap max_pool(const RawMap& plane, std::size_t window);

// Sum over channels of MaxPool_k(G_c) * A_c, before the ReLU.
RawMap segxrescam_accumulator(const LayerDump& dump, PoolSpec pool);
RawMap segxrescam_layer(const LayerDump& dump, PoolSpec pool);

// Sum over channels of mean(G_c) * A_c, before the ReLU.
RawMap seg_gradcam_accumulator(const LayerDump& dump);
RawMap seg_gradcam_layer(const LayerDump& dump);

RawMap layer_map(const LayerDump& dump, const MethodSpec& spec);

// Corner-aligned bilinear resampling to a grid at least as large as the input.
RawMap upsample_bilinear(const RawMap& map, std::size_t height, std::size_t width);

inline constexpr double kFlatRange = 1e-12;

// (v - min) / (max - min); a range below kFlatRange yields all zeros.
Heatmap normalize_minmax(const RawMap& map, std::string slice_id = {},
                         HeatmapProvenance provenance = HeatmapProvenance::PerLayer);

// Pointwise mean of one normalized map per layer.
Heatmap aggregate_layers(std::span<const Heatmap> maps, const LayerSet& layers);

struct SliceSaliency {
    std::string slice_id;
    Heatmap aggregated;
    std::vector<std::pair<std::string, Heatmap>> per_layer;  // filled on request
};

// Raw map -> upsample to the input shape -> normalize, per layer, then the
// layer mean. Dumps must be given in LayerSet order.
SliceSaliency compute_slice(std::span<const LayerDump> dumps,
                            std::array<std::size_t, 2> input_shape, const MethodSpec& spec,
                            const LayerSet& layers, const std::string& slice_id,
                            bool keep_per_layer = false);

// Loads the manifest's dumps for exactly the configured layers. The exported
// gradients must target the model's own prediction mask.
SliceSaliency compute_pipeline(const Manifest& manifest, const MethodSpec& spec,
                               const LayerSet& layers, bool keep_per_layer = false);

// Writes <dir>/<slice>.heatmap.npy plus a JSON sidecar describing how the map
// was produced, and per-layer maps when present.
void write_slice(const std::filesystem::path& dir, const SliceSaliency& result,
                 const MethodSpec& spec, const LayerSet& layers);

} // namespace shiftlens::saliency
