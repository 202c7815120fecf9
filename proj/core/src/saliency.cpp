#include "shiftlens/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace shiftlens::saliency {
namespace {

RawMap channel_plane(const FloatGrid& grid, std::size_t c) {
    const std::size_t h = grid.dim(1), w = grid.dim(2);
    RawMap plane({h, w});
    const std::size_t offset = c * h * w;
    for (std::size_t i = 0; i < h * w; ++i) plane[i] = grid[offset + i];
    return plane;
}

RawMap relu(RawMap map) {
    for (auto& v : map.values()) v = std::max(v, 0.0);
    return map;
}

} // namespace

LayerSet::LayerSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) fail(ErrorKind::Validation, "layer set is empty");
    std::set<std::string> seen;
    for (const auto& n : names_) {
        if (!seen.insert(n).second) fail(ErrorKind::Validation, "duplicate layer " + n);
    }
}

bool LayerSet::contains(std::string_view name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const LayerSet& default_layer_set() {
    static const LayerSet layers({"encoder.4", "encoder.5", "decoder.0", "decoder.1", "decoder.2",
                                  "decoder.3", "decoder.4"});
    return layers;
}

std::string_view to_string(Method method) noexcept {
    return method == Method::SegXResCam ? "segxrescam" : "seg-gradcam";
}

Method parse_method(std::string_view text) {
    if (text == "segxrescam") return Method::SegXResCam;
    if (text == "seg-gradcam") return Method::SegGradCam;
    fail(ErrorKind::Validation, "unknown method '" + std::string(text) +
                                    "', expected segxrescam or seg-gradcam");
}

RawMap max_pool(const RawMap& plane, std::size_t window) {
    if (window == 0) fail(ErrorKind::Validation, "pool window must be >= 1");
    if (window == 1) return plane;
    const auto h = static_cast<std::ptrdiff_t>(plane.dim(0));
    const auto w = static_cast<std::ptrdiff_t>(plane.dim(1));
    const auto before = static_cast<std::ptrdiff_t>((window - 1) / 2);
    const auto after = static_cast<std::ptrdiff_t>(window / 2);
    RawMap out(plane.shape());
    for (std::ptrdiff_t i = 0; i < h; ++i) {
        for (std::ptrdiff_t j = 0; j < w; ++j) {
            double best = plane.at(i, j);
            for (auto di = -before; di <= after; ++di) {
                const auto r = std::clamp<std::ptrdiff_t>(i + di, 0, h - 1);
                for (auto dj = -before; dj <= after; ++dj) {
                    const auto c = std::clamp<std::ptrdiff_t>(j + dj, 0, w - 1);
                    best = std::max(best, plane.at(r, c));
                }
            }
            out.at(i, j) = best;
        }
    }
    return out;
}

RawMap segxrescam_accumulator(const LayerDump& dump, PoolSpec pool) {
    const std::size_t h = dump.height(), w = dump.width();
    RawMap acc({h, w}, 0.0);
    for (std::size_t c = 0; c < dump.channels(); ++c) {
        const RawMap pooled = max_pool(channel_plane(dump.grads(), c), pool.window);
        const std::size_t offset = c * h * w;
        for (std::size_t i = 0; i < h * w; ++i) {
            acc[i] += pooled[i] * static_cast<double>(dump.features()[offset + i]);
        }
    }
    return acc;
}

RawMap segxrescam_layer(const LayerDump& dump, PoolSpec pool) {
    return relu(segxrescam_accumulator(dump, pool));
}

RawMap seg_gradcam_accumulator(const LayerDump& dump) {
    const std::size_t h = dump.height(), w = dump.width(), hw = h * w;
    RawMap acc({h, w}, 0.0);
    for (std::size_t c = 0; c < dump.channels(); ++c) {
        const std::size_t offset = c * hw;
        double sum = 0.0;
        for (std::size_t i = 0; i < hw; ++i) sum += dump.grads()[offset + i];
        const double weight = sum / static_cast<double>(hw);
        for (std::size_t i = 0; i < hw; ++i) {
            acc[i] += weight * static_cast<double>(dump.features()[offset + i]);
        }
    }
    return acc;
}

RawMap seg_gradcam_layer(const LayerDump& dump) { return relu(seg_gradcam_accumulator(dump)); }

RawMap layer_map(const LayerDump& dump, const MethodSpec& spec) {
    return spec.method == Method::SegXResCam ? segxrescam_layer(dump, spec.pool)
                                             : seg_gradcam_layer(dump);
}

RawMap upsample_bilinear(const RawMap& map, std::size_t height, std::size_t width) {
    if (map.rank() != 2) fail(ErrorKind::Shape, "upsampling needs a 2D map");
    const std::size_t h = map.dim(0), w = map.dim(1);
    if (height < h || width < w) {
        fail(ErrorKind::Shape, "cannot upsample " + shape_string(map.shape()) + " to (" +
                                   std::to_string(height) + ", " + std::to_string(width) + ")");
    }
    if (height == h && width == w) return map;
    auto source_coord = [](std::size_t i, std::size_t out, std::size_t in) {
        return out > 1 ? static_cast<double>(i) * static_cast<double>(in - 1) /
                             static_cast<double>(out - 1)
                       : 0.0;
    };
    RawMap out({height, width});
    for (std::size_t i = 0; i < height; ++i) {
        const double y = source_coord(i, height, h);
        const auto y0 = static_cast<std::size_t>(std::floor(y));
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double fy = y - static_cast<double>(y0);
        for (std::size_t j = 0; j < width; ++j) {
            const double x = source_coord(j, width, w);
            const auto x0 = static_cast<std::size_t>(std::floor(x));
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double fx = x - static_cast<double>(x0);
            const double top = map.at(y0, x0) * (1.0 - fx) + map.at(y0, x1) * fx;
            const double bottom = map.at(y1, x0) * (1.0 - fx) + map.at(y1, x1) * fx;
            out.at(i, j) = top * (1.0 - fy) + bottom * fy;
        }
    }
    return out;
}

Heatmap normalize_minmax(const RawMap& map, std::string slice_id, HeatmapProvenance provenance) {
    if (map.empty()) fail(ErrorKind::Shape, "cannot normalize an empty map");
    for (double v : map.values()) {
        if (std::isnan(v)) fail(ErrorKind::Validation, "map contains NaN");
        if (!std::isfinite(v)) fail(ErrorKind::Validation, "map contains a non-finite value");
    }
    const auto [lo_it, hi_it] = std::minmax_element(map.values().begin(), map.values().end());
    const double lo = *lo_it, range = *hi_it - *lo_it;
    FloatGrid out(map.shape(), 0.0f);
    if (range >= kFlatRange) {
        for (std::size_t i = 0; i < map.size(); ++i) {
            out[i] = static_cast<float>(std::clamp((map[i] - lo) / range, 0.0, 1.0));
        }
    }
    return Heatmap(std::move(out), std::move(slice_id), provenance);
}

Heatmap aggregate_layers(std::span<const Heatmap> maps, const LayerSet& layers) {
    if (maps.size() != layers.size()) {
        fail(ErrorKind::Shape, "expected " + std::to_string(layers.size()) + " layer maps, got " +
                                   std::to_string(maps.size()));
    }
    const Shape& shape = maps.front().shape();
    std::vector<double> sum(element_count(shape), 0.0);
    for (const auto& m : maps) {
        require_same_shape(shape, m.shape(), "aggregate_layers");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += m.data()[i];
    }
    FloatGrid out(shape);
    const double n = static_cast<double>(maps.size());
    for (std::size_t i = 0; i < sum.size(); ++i) {
        out[i] = static_cast<float>(std::clamp(sum[i] / n, 0.0, 1.0));
    }
    return Heatmap(std::move(out), maps.front().slice_id(), HeatmapProvenance::Aggregated);
}

SliceSaliency compute_slice(std::span<const LayerDump> dumps,
                            std::array<std::size_t, 2> input_shape, const MethodSpec& spec,
                            const LayerSet& layers, const std::string& slice_id,
                            bool keep_per_layer) {
    if (dumps.size() != layers.size()) {
        fail(ErrorKind::Shape, "slice '" + slice_id + "': " + std::to_string(dumps.size()) +
                                   " dumps for " + std::to_string(layers.size()) + " layers");
    }
    std::vector<Heatmap> normalized;
    normalized.reserve(dumps.size());
    for (std::size_t l = 0; l < dumps.size(); ++l) {
        if (dumps[l].layer_name() != layers.names()[l]) {
            fail(ErrorKind::Manifest, "slice '" + slice_id + "': dump " +
                                          std::to_string(l) + " is '" + dumps[l].layer_name() +
                                          "', expected '" + layers.names()[l] + "'");
        }
        const RawMap raw = layer_map(dumps[l], spec);
        normalized.push_back(normalize_minmax(upsample_bilinear(raw, input_shape[0], input_shape[1]),
                                              slice_id, HeatmapProvenance::PerLayer));
    }
    SliceSaliency out{slice_id, aggregate_layers(normalized, layers), {}};
    if (keep_per_layer) {
        for (std::size_t l = 0; l < normalized.size(); ++l) {
            out.per_layer.emplace_back(layers.names()[l], std::move(normalized[l]));
        }
    }
    return out;
}

SliceSaliency compute_pipeline(const Manifest& manifest, const MethodSpec& spec,
                               const LayerSet& layers, bool keep_per_layer) {
    if (manifest.gradient_target != "prediction_mask") {
        fail(ErrorKind::Manifest, "slice '" + manifest.slice_id + "': gradients target '" +
                                      manifest.gradient_target +
                                      "', expected the prediction mask");
    }
    for (const auto& entry : manifest.layers) {
        if (!layers.contains(entry.name)) {
            fail(ErrorKind::Manifest, "slice '" + manifest.slice_id + "': unexpected layer " +
                                          entry.name);
        }
    }
    std::vector<LayerDump> dumps;
    dumps.reserve(layers.size());
    for (const auto& name : layers.names()) {
        auto it = std::find_if(manifest.layers.begin(), manifest.layers.end(),
                               [&](const ManifestLayer& l) { return l.name == name; });
        if (it == manifest.layers.end()) {
            fail(ErrorKind::Manifest, "slice '" + manifest.slice_id + "': missing layer " + name);
        }
        try {
            dumps.push_back(load_layer_dump(name, it->features_path, it->grads_path,
                                            manifest.slice_id));
        } catch (const Error& e) {
            fail(ErrorKind::Manifest, "slice '" + manifest.slice_id + "': " + e.what());
        }
    }
    return compute_slice(dumps, manifest.input_shape, spec, layers, manifest.slice_id,
                         keep_per_layer);
}

void write_slice(const std::filesystem::path& dir, const SliceSaliency& result,
                 const MethodSpec& spec, const LayerSet& layers) {
    std::filesystem::create_directories(dir);
    save_heatmap(dir / (result.slice_id + ".heatmap.npy"), result.aggregated);
    nlohmann::json meta;
    meta["slice_id"] = result.slice_id;
    meta["method"] = std::string(to_string(spec.method));
    meta["pool_window"] = spec.method == Method::SegXResCam ? spec.pool.window : 0;
    meta["layers"] = layers.names();
    meta["normalization"] = "per-layer min-max before mean; flat maps -> 0";
    meta["upsampling"] = "bilinear, corner-aligned";
    meta["shape"] = result.aggregated.shape();
    std::ofstream out(dir / (result.slice_id + ".heatmap.json"), std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write heatmap sidecar in " + dir.string());
    out << meta.dump(2) << "\n";
    for (const auto& [name, map] : result.per_layer) {
        save_heatmap(dir / (result.slice_id + "." + name + ".npy"), map);
    }
}

} // namespace shiftlens::saliency
