#include "shiftlens/npy.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace shiftlens::npy {
namespace {

constexpr std::string_view kMagic = "\x93NUMPY";
constexpr std::size_t kAlignment = 64;

static_assert(std::endian::native == std::endian::little,
              "npy payloads are read in place; big-endian hosts are not supported");

[[noreturn]] void format_error(const std::string& what) {
    fail(ErrorKind::Format, "npy: " + what);
}

std::string_view skip_space(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    return s;
}

// Returns the text following "'key':" in the header dict.
std::string_view find_value(std::string_view header, std::string_view key) {
    const std::string quoted = "'" + std::string(key) + "'";
    auto pos = header.find(quoted);
    if (pos == std::string_view::npos) format_error("header is missing key " + quoted);
    auto rest = skip_space(header.substr(pos + quoted.size()));
    if (rest.empty() || rest.front() != ':') format_error("malformed header near " + quoted);
    return skip_space(rest.substr(1));
}

Dtype parse_descr(std::string_view header) {
    auto value = find_value(header, "descr");
    if (value.empty() || (value.front() != '\'' && value.front() != '"')) {
        format_error("descr is not a string");
    }
    const char quote = value.front();
    auto end = value.find(quote, 1);
    if (end == std::string_view::npos) format_error("unterminated descr");
    auto d = value.substr(1, end - 1);
    if (d == "<f4") return Dtype::Float32;
    if (d == "<f8") return Dtype::Float64;
    if (d == "|u1" || d == "<u1" || d == "u1") return Dtype::UInt8;
    fail(ErrorKind::UnsupportedDtype, "npy: dtype '" + std::string(d) +
                                          "' is not one of float32, float64, uint8");
}

bool parse_fortran(std::string_view header) {
    auto value = find_value(header, "fortran_order");
    if (value.starts_with("False")) return false;
    if (value.starts_with("True")) return true;
    format_error("fortran_order is not a bool");
}

Shape parse_shape(std::string_view header) {
    auto value = find_value(header, "shape");
    if (value.empty() || value.front() != '(') format_error("shape is not a tuple");
    auto close = value.find(')');
    if (close == std::string_view::npos) format_error("unterminated shape tuple");
    auto body = value.substr(1, close - 1);
    Shape shape;
    while (true) {
        body = skip_space(body);
        if (body.empty()) break;
        std::size_t n = 0;
        std::size_t digits = 0;
        while (digits < body.size() && std::isdigit(static_cast<unsigned char>(body[digits]))) {
            n = n * 10 + static_cast<std::size_t>(body[digits] - '0');
            ++digits;
        }
        if (digits == 0) format_error("shape entry is not a non-negative integer");
        shape.push_back(n);
        body = skip_space(body.substr(digits));
        if (body.empty()) break;
        if (body.front() != ',') format_error("shape entries must be comma separated");
        body.remove_prefix(1);
    }
    return shape;
}

std::string header_text(const Array& array) {
    std::string dict = "{'descr': '";
    dict += descr(array.dtype);
    dict += "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < array.shape.size(); ++i) {
        if (i) dict += ", ";
        dict += std::to_string(array.shape[i]);
    }
    if (array.shape.size() == 1) dict += ",";
    dict += "), }";
    // magic(6) + version(2) + length(2) + dict + padding + '\n' is a multiple of 64.
    const std::size_t unpadded = kMagic.size() + 4 + dict.size() + 1;
    const std::size_t padded = (unpadded + kAlignment - 1) / kAlignment * kAlignment;
    dict.append(padded - unpadded, ' ');
    dict += '\n';
    return dict;
}

template <typename T>
Array pack(const Grid<T>& grid, Dtype dtype) {
    Array out;
    out.dtype = dtype;
    out.shape = grid.shape();
    out.bytes.resize(grid.size() * sizeof(T));
    if (!grid.empty()) std::memcpy(out.bytes.data(), grid.values().data(), out.bytes.size());
    return out;
}

} // namespace

std::string_view descr(Dtype dtype) noexcept {
    switch (dtype) {
        case Dtype::Float32: return "<f4";
        case Dtype::Float64: return "<f8";
        case Dtype::UInt8: return "|u1";
    }
    return "";
}

std::size_t item_size(Dtype dtype) noexcept {
    switch (dtype) {
        case Dtype::Float32: return 4;
        case Dtype::Float64: return 8;
        case Dtype::UInt8: return 1;
    }
    return 0;
}

Array parse(std::span<const std::byte> file) {
    if (file.size() < 10 ||
        std::memcmp(file.data(), kMagic.data(), kMagic.size()) != 0) {
        format_error("missing \\x93NUMPY magic");
    }
    const auto major = static_cast<unsigned>(file[6]);
    std::size_t header_len = 0;
    std::size_t prefix = 0;
    if (major == 1) {
        header_len = static_cast<std::size_t>(file[8]) | (static_cast<std::size_t>(file[9]) << 8);
        prefix = 10;
    } else if (major == 2 || major == 3) {
        if (file.size() < 12) format_error("truncated version 2 header");
        for (int i = 0; i < 4; ++i) {
            header_len |= static_cast<std::size_t>(file[8 + i]) << (8 * i);
        }
        prefix = 12;
    } else {
        format_error("unsupported format version " + std::to_string(major));
    }
    if (file.size() < prefix + header_len) format_error("truncated header");
    std::string_view header(reinterpret_cast<const char*>(file.data() + prefix), header_len);

    Array out;
    out.dtype = parse_descr(header);
    if (parse_fortran(header)) format_error("fortran_order arrays are not supported");
    out.shape = parse_shape(header);

    const std::size_t payload = out.element_count() * item_size(out.dtype);
    const std::size_t offset = prefix + header_len;
    if (file.size() - offset < payload) {
        format_error("payload holds " + std::to_string(file.size() - offset) + " bytes, shape " +
                     shape_string(out.shape) + " needs " + std::to_string(payload));
    }
    out.bytes.assign(file.begin() + static_cast<std::ptrdiff_t>(offset),
                     file.begin() + static_cast<std::ptrdiff_t>(offset + payload));
    return out;
}

std::vector<std::byte> serialize(const Array& array) {
    if (array.bytes.size() != array.element_count() * item_size(array.dtype)) {
        fail(ErrorKind::Shape, "npy: byte count does not match shape " + shape_string(array.shape));
    }
    const std::string header = header_text(array);
    std::vector<std::byte> out;
    out.reserve(10 + header.size() + array.bytes.size());
    for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
    out.push_back(std::byte{1});
    out.push_back(std::byte{0});
    out.push_back(static_cast<std::byte>(header.size() & 0xff));
    out.push_back(static_cast<std::byte>((header.size() >> 8) & 0xff));
    for (char c : header) out.push_back(static_cast<std::byte>(c));
    out.insert(out.end(), array.bytes.begin(), array.bytes.end());
    return out;
}

Array load_array(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse(std::as_bytes(std::span(raw)));
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

void save_array(const std::filesystem::path& path, const Array& array) {
    const auto bytes = serialize(array);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "short write to " + path.string());
}

FloatGrid to_float_grid(const Array& array) {
    const std::size_t n = array.element_count();
    std::vector<float> values(n);
    switch (array.dtype) {
        case Dtype::Float32:
            if (n) std::memcpy(values.data(), array.bytes.data(), n * sizeof(float));
            break;
        case Dtype::Float64:
            for (std::size_t i = 0; i < n; ++i) {
                double v;
                std::memcpy(&v, array.bytes.data() + i * sizeof(double), sizeof(double));
                values[i] = static_cast<float>(v);
            }
            break;
        case Dtype::UInt8:
            for (std::size_t i = 0; i < n; ++i) {
                values[i] = static_cast<float>(std::to_integer<unsigned>(array.bytes[i]));
            }
            break;
    }
    return FloatGrid(array.shape, std::move(values));
}

Array from_grid(const FloatGrid& grid) { return pack(grid, Dtype::Float32); }
Array from_grid(const ByteGrid& grid) { return pack(grid, Dtype::UInt8); }
Array from_grid(const Grid<double>& grid) { return pack(grid, Dtype::Float64); }

} // namespace shiftlens::npy
