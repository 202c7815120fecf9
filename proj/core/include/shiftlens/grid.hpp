#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "shiftlens/error.hpp"

namespace shiftlens {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

inline std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::size_t b) { return a * b; });
}

// Dense row-major N-d array. Element (i, j, k) lives at i*(J*K) + j*K + k.
template <typename T>
class Grid {
public:
    Grid() = default;

    explicit Grid(Shape shape, T fill = T{})
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

    Grid(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != element_count(shape_)) {
            fail(ErrorKind::Shape, "grid data has " + std::to_string(data_.size()) +
                                       " elements, shape " + shape_string(shape_) + " needs " +
                                       std::to_string(element_count(shape_)));
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    T& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const T& at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

using FloatGrid = Grid<float>;
using ByteGrid = Grid<std::uint8_t>;

inline void require_same_shape(const Shape& a, const Shape& b, std::string_view what) {
    if (a != b) {
        fail(ErrorKind::Shape, std::string(what) + ": shape mismatch " + shape_string(a) +
                                   " vs " + shape_string(b));
    }
}

} // namespace shiftlens
