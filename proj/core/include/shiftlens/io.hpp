#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shiftlens/types.hpp"

namespace shiftlens {

namespace fs = std::filesystem;

// Volume arrays travel with a JSON sidecar: {"spacing_mm": [x, y, z], "id": "..."}.
Volume load_volume(const fs::path& data_path, const fs::path& sidecar_path);
void save_volume(const fs::path& data_path, const fs::path& sidecar_path, const Volume& volume);

// Accepts uint8 or float payloads; every value must be exactly 0 or 1.
Mask load_mask(const fs::path& path, MaskRole role);
void save_mask(const fs::path& path, const Mask& mask);

Heatmap load_heatmap(const fs::path& path, std::string slice_id = {});
void save_heatmap(const fs::path& path, const Heatmap& heatmap);

LayerDump load_layer_dump(const std::string& layer_name, const fs::path& features_path,
                          const fs::path& grads_path, const std::string& slice_id = {});

// Throws ValidationError naming both shapes when they differ.
void validate_pair(const Volume& volume, const Mask& mask);

struct ManifestLayer {
    std::string name;
    fs::path features_path;
    fs::path grads_path;
};

// Describes one exported slice. Paths are stored resolved against the
// manifest's directory.
struct Manifest {
    std::string slice_id;
    std::array<std::size_t, 2> input_shape{};
    std::vector<ManifestLayer> layers;
    fs::path prediction_mask_path;
    std::optional<fs::path> ground_truth_mask_path;
    // What the exported gradients were taken with respect to.
    std::string gradient_target = "prediction_mask";
    // True when the prediction was all background and the gradients are zero.
    bool target_empty = false;
};

Manifest load_manifest(const fs::path& path);
void save_manifest(const fs::path& path, const Manifest& manifest);

} // namespace shiftlens
