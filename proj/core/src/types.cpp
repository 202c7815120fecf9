#include "shiftlens/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace shiftlens {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Format: return "FormatError";
        case ErrorKind::UnsupportedDtype: return "UnsupportedDtype";
        case ErrorKind::Validation: return "ValidationError";
        case ErrorKind::Sidecar: return "SidecarError";
        case ErrorKind::Shape: return "ShapeError";
        case ErrorKind::EmptyWindow: return "EmptyWindow";
        case ErrorKind::InsufficientBackground: return "InsufficientBackground";
        case ErrorKind::EmptyMask: return "EmptyMask";
        case ErrorKind::Manifest: return "ManifestError";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::Construction: return "ConstructionError";
        case ErrorKind::Section: return "SectionError";
        case ErrorKind::Pairing: return "PairingError";
        case ErrorKind::Io: return "IoError";
    }
    return "Error";
}

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ", ";
        out << shape[i];
    }
    if (shape.size() == 1) out << ',';
    out << ')';
    return out.str();
}

Volume::Volume(FloatGrid data, Spacing spacing_mm, std::string id)
    : data_(std::move(data)), spacing_(spacing_mm), id_(std::move(id)) {
    if (data_.rank() != 3) {
        fail(ErrorKind::Shape, "volume '" + id_ + "' must be 3D, got shape " +
                                   shape_string(data_.shape()));
    }
    for (std::size_t axis = 0; axis < 3; ++axis) {
        if (data_.dim(axis) < 1) {
            fail(ErrorKind::Shape, "volume '" + id_ + "' has an empty axis");
        }
        if (!(spacing_[axis] > 0.0) || !std::isfinite(spacing_[axis])) {
            fail(ErrorKind::Validation, "volume '" + id_ + "' spacing must be positive");
        }
    }
    if (std::any_of(data_.values().begin(), data_.values().end(),
                    [](float v) { return std::isnan(v); })) {
        fail(ErrorKind::Validation, "volume '" + id_ + "' contains NaN");
    }
}

std::string_view to_string(MaskRole role) noexcept {
    switch (role) {
        case MaskRole::GroundTruth: return "ground_truth";
        case MaskRole::Prediction: return "prediction";
        case MaskRole::BinarizedAttention: return "binarized_attention";
    }
    return "unknown";
}

Mask::Mask(ByteGrid data, MaskRole role) : data_(std::move(data)), role_(role) {
    for (auto v : data_.values()) {
        if (v > 1) {
            fail(ErrorKind::Validation, std::string("mask (") + std::string(to_string(role_)) +
                                            ") contains value " + std::to_string(int(v)) +
                                            ", expected 0 or 1");
        }
    }
}

std::size_t Mask::count() const noexcept {
    std::size_t n = 0;
    for (auto v : data_.values()) n += v;
    return n;
}

Heatmap::Heatmap(FloatGrid data, std::string slice_id, HeatmapProvenance provenance)
    : data_(std::move(data)), slice_id_(std::move(slice_id)), provenance_(provenance) {
    if (data_.rank() != 2) {
        fail(ErrorKind::Shape, "heatmap must be 2D, got " + shape_string(data_.shape()));
    }
    for (float v : data_.values()) {
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
            fail(ErrorKind::Validation,
                 "heatmap '" + slice_id_ + "' has value outside [0,1]: " + std::to_string(v));
        }
    }
}

LayerDump::LayerDump(std::string layer_name, FloatGrid features, FloatGrid grads,
                     std::string slice_id)
    : layer_name_(std::move(layer_name)),
      features_(std::move(features)),
      grads_(std::move(grads)),
      slice_id_(std::move(slice_id)) {
    if (features_.rank() != 3) {
        fail(ErrorKind::Shape, "layer '" + layer_name_ + "' features must be C x H x W, got " +
                                   shape_string(features_.shape()));
    }
    require_same_shape(features_.shape(), grads_.shape(), "layer '" + layer_name_ + "'");
    for (std::size_t axis = 0; axis < 3; ++axis) {
        if (features_.dim(axis) < 1) {
            fail(ErrorKind::Shape, "layer '" + layer_name_ + "' has an empty axis");
        }
    }
    auto finite = [](float v) { return std::isfinite(v); };
    if (!std::all_of(features_.values().begin(), features_.values().end(), finite) ||
        !std::all_of(grads_.values().begin(), grads_.values().end(), finite)) {
        fail(ErrorKind::Validation, "layer '" + layer_name_ + "' has non-finite values");
    }
}

} // namespace shiftlens
