#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "shiftlens/grid.hpp"

namespace shiftlens {

using Spacing = std::array<double, 3>;

// 3D intensity grid in Hounsfield Units. Axis i of the grid pairs with
// spacing_mm[i]; axes 0 and 1 are in-plane, axis 2 is the slice axis.
class Volume {
public:
    Volume(FloatGrid data, Spacing spacing_mm, std::string id = {});

    const FloatGrid& data() const noexcept { return data_; }
    const Spacing& spacing_mm() const noexcept { return spacing_; }
    const std::string& id() const noexcept { return id_; }
    const Shape& shape() const noexcept { return data_.shape(); }

private:
    FloatGrid data_;
    Spacing spacing_;
    std::string id_;
};

enum class MaskRole { GroundTruth, Prediction, BinarizedAttention };

std::string_view to_string(MaskRole role) noexcept;

class Mask {
public:
    Mask(ByteGrid data, MaskRole role);

    const ByteGrid& data() const noexcept { return data_; }
    MaskRole role() const noexcept { return role_; }
    const Shape& shape() const noexcept { return data_.shape(); }
    std::size_t count() const noexcept;

private:
    ByteGrid data_;
    MaskRole role_;
};

enum class HeatmapProvenance { PerLayer, Aggregated };

// Attention map with every value finite and inside [0, 1].
class Heatmap {
public:
    Heatmap(FloatGrid data, std::string slice_id = {},
            HeatmapProvenance provenance = HeatmapProvenance::Aggregated);

    const FloatGrid& data() const noexcept { return data_; }
    const std::string& slice_id() const noexcept { return slice_id_; }
    HeatmapProvenance provenance() const noexcept { return provenance_; }
    const Shape& shape() const noexcept { return data_.shape(); }

private:
    FloatGrid data_;
    std::string slice_id_;
    HeatmapProvenance provenance_;
};

// Activations and their gradients for one layer of one slice, laid out C x H x W.
class LayerDump {
public:
    LayerDump(std::string layer_name, FloatGrid features, FloatGrid grads,
              std::string slice_id = {});

    const std::string& layer_name() const noexcept { return layer_name_; }
    const FloatGrid& features() const noexcept { return features_; }
    const FloatGrid& grads() const noexcept { return grads_; }
    const std::string& slice_id() const noexcept { return slice_id_; }
    std::size_t channels() const { return features_.dim(0); }
    std::size_t height() const { return features_.dim(1); }
    std::size_t width() const { return features_.dim(2); }

private:
    std::string layer_name_;
    FloatGrid features_;
    FloatGrid grads_;
    std::string slice_id_;
};

} // namespace shiftlens
