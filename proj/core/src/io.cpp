#include "shiftlens/io.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "shiftlens/npy.hpp"

namespace shiftlens {
namespace {

using nlohmann::json;

json read_json(const fs::path& path, ErrorKind kind) {
    std::ifstream in(path);
    if (!in) fail(kind, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(kind, path.string() + ": invalid JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << text;
}

fs::path relative_or_same(const fs::path& target, const fs::path& base) {
    auto rel = target.lexically_relative(base);
    return rel.empty() ? target : rel;
}

} // namespace

Volume load_volume(const fs::path& data_path, const fs::path& sidecar_path) {
    if (!fs::exists(sidecar_path)) {
        fail(ErrorKind::Sidecar, "missing sidecar " + sidecar_path.string());
    }
    const json sidecar = read_json(sidecar_path, ErrorKind::Sidecar);
    if (!sidecar.is_object() || !sidecar.contains("spacing_mm") ||
        !sidecar["spacing_mm"].is_array() || sidecar["spacing_mm"].size() != 3) {
        fail(ErrorKind::Sidecar, sidecar_path.string() + ": spacing_mm must be 3 numbers");
    }
    Spacing spacing{};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& v = sidecar["spacing_mm"][i];
        if (!v.is_number() || !(v.get<double>() > 0.0) || !std::isfinite(v.get<double>())) {
            fail(ErrorKind::Sidecar, sidecar_path.string() + ": spacing_mm must be positive");
        }
        spacing[i] = v.get<double>();
    }
    std::string id = sidecar.value("id", data_path.stem().string());

    auto grid = npy::to_float_grid(npy::load_array(data_path));
    if (grid.rank() != 3) {
        fail(ErrorKind::Shape, data_path.string() + ": volume must be 3D, got " +
                                   shape_string(grid.shape()));
    }
    return Volume(std::move(grid), spacing, std::move(id));
}

void save_volume(const fs::path& data_path, const fs::path& sidecar_path, const Volume& volume) {
    npy::save_array(data_path, npy::from_grid(volume.data()));
    json sidecar;
    sidecar["id"] = volume.id();
    sidecar["spacing_mm"] = volume.spacing_mm();
    write_text(sidecar_path, sidecar.dump(2) + "\n");
}

Mask load_mask(const fs::path& path, MaskRole role) {
    const auto array = npy::load_array(path);
    if (array.dtype == npy::Dtype::UInt8) {
        std::vector<std::uint8_t> values(array.element_count());
        for (std::size_t i = 0; i < values.size(); ++i) {
            values[i] = std::to_integer<std::uint8_t>(array.bytes[i]);
        }
        try {
            return Mask(ByteGrid(array.shape, std::move(values)), role);
        } catch (const Error& e) {
            throw Error(e.kind(), path.string() + ": " + e.what());
        }
    }
    const auto grid = npy::to_float_grid(array);
    std::vector<std::uint8_t> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const float v = grid[i];
        if (std::isnan(v)) fail(ErrorKind::Validation, path.string() + ": mask contains NaN");
        if (v != 0.0f && v != 1.0f) {
            fail(ErrorKind::Validation,
                 path.string() + ": mask value " + std::to_string(v) + " is not 0 or 1");
        }
        values[i] = static_cast<std::uint8_t>(v);
    }
    return Mask(ByteGrid(grid.shape(), std::move(values)), role);
}

void save_mask(const fs::path& path, const Mask& mask) {
    npy::save_array(path, npy::from_grid(mask.data()));
}

Heatmap load_heatmap(const fs::path& path, std::string slice_id) {
    auto grid = npy::to_float_grid(npy::load_array(path));
    try {
        return Heatmap(std::move(grid), std::move(slice_id));
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

void save_heatmap(const fs::path& path, const Heatmap& heatmap) {
    npy::save_array(path, npy::from_grid(heatmap.data()));
}

LayerDump load_layer_dump(const std::string& layer_name, const fs::path& features_path,
                          const fs::path& grads_path, const std::string& slice_id) {
    return LayerDump(layer_name, npy::to_float_grid(npy::load_array(features_path)),
                     npy::to_float_grid(npy::load_array(grads_path)), slice_id);
}

void validate_pair(const Volume& volume, const Mask& mask) {
    if (volume.shape() != mask.shape()) {
        fail(ErrorKind::Validation, "volume '" + volume.id() + "' shape " +
                                        shape_string(volume.shape()) + " does not match mask shape " +
                                        shape_string(mask.shape()));
    }
    // Mask construction already guarantees {0,1}; re-check in case of a
    // hand-assembled grid passing through another path.
    for (auto v : mask.data().values()) {
        if (v > 1) fail(ErrorKind::Validation, "mask value outside {0,1}");
    }
}

Manifest load_manifest(const fs::path& path) {
    const json doc = read_json(path, ErrorKind::Manifest);
    const fs::path base = path.parent_path();
    Manifest m;
    auto resolve = [&](const json& value, const std::string& what) {
        if (!value.is_string()) fail(ErrorKind::Manifest, path.string() + ": " + what + " must be a path");
        fs::path p = value.get<std::string>();
        if (p.is_relative()) p = base / p;
        if (!fs::exists(p)) {
            fail(ErrorKind::Manifest, path.string() + ": " + what + " not found: " + p.string());
        }
        return p;
    };
    try {
        m.slice_id = doc.at("slice_id").get<std::string>();
        const auto& shape = doc.at("input_shape");
        if (!shape.is_array() || shape.size() != 2) {
            fail(ErrorKind::Manifest, path.string() + ": input_shape must be [H, W]");
        }
        m.input_shape = {shape[0].get<std::size_t>(), shape[1].get<std::size_t>()};
        if (m.input_shape[0] == 0 || m.input_shape[1] == 0) {
            fail(ErrorKind::Manifest, path.string() + ": input_shape must be positive");
        }
        std::set<std::string> seen;
        for (const auto& layer : doc.at("layers")) {
            ManifestLayer entry;
            entry.name = layer.at("name").get<std::string>();
            if (!seen.insert(entry.name).second) {
                fail(ErrorKind::Manifest, path.string() + ": duplicate layer " + entry.name);
            }
            entry.features_path = resolve(layer.at("features"), entry.name + " features");
            entry.grads_path = resolve(layer.at("grads"), entry.name + " grads");
            m.layers.push_back(std::move(entry));
        }
        m.prediction_mask_path = resolve(doc.at("prediction_mask"), "prediction_mask");
        if (doc.contains("ground_truth_mask") && !doc["ground_truth_mask"].is_null()) {
            m.ground_truth_mask_path = resolve(doc["ground_truth_mask"], "ground_truth_mask");
        }
        m.gradient_target = doc.value("gradient_target", std::string("prediction_mask"));
        m.target_empty = doc.value("target_empty", false);
    } catch (const json::exception& e) {
        fail(ErrorKind::Manifest, path.string() + ": " + e.what());
    }
    return m;
}

void save_manifest(const fs::path& path, const Manifest& m) {
    const fs::path base = path.parent_path();
    json doc;
    doc["slice_id"] = m.slice_id;
    doc["input_shape"] = m.input_shape;
    doc["gradient_target"] = m.gradient_target;
    doc["target_empty"] = m.target_empty;
    json layers = json::array();
    for (const auto& layer : m.layers) {
        layers.push_back({{"name", layer.name},
                          {"features", relative_or_same(layer.features_path, base).generic_string()},
                          {"grads", relative_or_same(layer.grads_path, base).generic_string()}});
    }
    doc["layers"] = std::move(layers);
    doc["prediction_mask"] = relative_or_same(m.prediction_mask_path, base).generic_string();
    if (m.ground_truth_mask_path) {
        doc["ground_truth_mask"] = relative_or_same(*m.ground_truth_mask_path, base).generic_string();
    }
    write_text(path, doc.dump(2) + "\n");
}

} // namespace shiftlens
