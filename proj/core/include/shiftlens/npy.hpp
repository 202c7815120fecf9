#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "shiftlens/grid.hpp"

namespace shiftlens::npy {

enum class Dtype { Float32, Float64, UInt8 };

std::string_view descr(Dtype dtype) noexcept;
std::size_t item_size(Dtype dtype) noexcept;

// Raw NPY 1.0 payload: little-endian, C order. The bytes are kept verbatim so
// a save after a load reproduces the file exactly.
struct Array {
    Dtype dtype = Dtype::Float32;
    Shape shape;
    std::vector<std::byte> bytes;

    std::size_t element_count() const { return shiftlens::element_count(shape); }
};

Array parse(std::span<const std::byte> file_bytes);
std::vector<std::byte> serialize(const Array& array);

Array load_array(const std::filesystem::path& path);
void save_array(const std::filesystem::path& path, const Array& array);

// Conversions to the internal storage types. Float64 narrows to float32.
FloatGrid to_float_grid(const Array& array);
Array from_grid(const FloatGrid& grid);
Array from_grid(const ByteGrid& grid);
Array from_grid(const Grid<double>& grid);

} // namespace shiftlens::npy
