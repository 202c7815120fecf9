#include "shiftlens/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "shiftlens/domain_gap.hpp"

namespace shiftlens::phantom {
namespace {

std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

double axis_extent(const PhantomSpec& spec, std::size_t axis) {
    return static_cast<double>(spec.shape[axis] - 1) * spec.spacing_mm[axis];
}

bool inside_cylinder(const Cylinder& c, const std::array<double, 3>& p) {
    double radial = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double d = p[a] - c.center_mm[a];
        if (a == c.axis) {
            if (std::abs(d) > c.length_mm / 2.0) return false;
        } else {
            radial += d * d;
        }
    }
    return radial <= c.radius_mm * c.radius_mm;
}

// Float value on the requested side of tau after rounding to float.
float above(double value, double tau) {
    auto f = static_cast<float>(std::min(value, 1.0));
    while (static_cast<double>(f) < tau) f = std::nextafter(f, 2.0f);
    return f;
}

float below(double value, double tau) {
    auto f = static_cast<float>(std::max(value, 0.0));
    while (static_cast<double>(f) >= tau) f = std::nextafter(f, -1.0f);
    return std::max(f, 0.0f);
}

} // namespace

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
    for (auto& word : s_) word = splitmix64(seed);
}

std::uint64_t Rng::next() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() noexcept {
    if (spare_) {
        const double z = *spare_;
        spare_.reset();
        return z;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
}

void PhantomSpec::validate() const {
    if (shape.size() != 3 || std::any_of(shape.begin(), shape.end(), [](auto n) { return n == 0; })) {
        fail(ErrorKind::Validation, "phantom shape must have three positive extents");
    }
    for (double s : spacing_mm) {
        if (!(s > 0.0)) fail(ErrorKind::Validation, "phantom spacing must be positive");
    }
    if (!(noise_std >= 0.0)) fail(ErrorKind::Validation, "noise_std must be >= 0");
    if (tissue_radius_mm && !(*tissue_radius_mm >= 0.0)) {
        fail(ErrorKind::Validation, "tissue radius must be >= 0");
    }
    for (std::size_t v = 0; v < vessels.size(); ++v) {
        const auto& c = vessels[v];
        const std::string name = "vessel " + std::to_string(v);
        if (c.axis < 0 || c.axis > 2) fail(ErrorKind::Validation, name + ": axis must be 0, 1 or 2");
        if (!(c.radius_mm > 0.0) || !(c.length_mm > 0.0)) {
            fail(ErrorKind::Validation, name + ": radius and length must be positive");
        }
        for (std::size_t a = 0; a < 3; ++a) {
            const double half =
                static_cast<int>(a) == c.axis ? c.length_mm / 2.0 : c.radius_mm;
            if (c.center_mm[a] - half < 0.0 || c.center_mm[a] + half > axis_extent(*this, a)) {
                fail(ErrorKind::Validation, name + " extends outside the grid on axis " +
                                                std::to_string(a));
            }
        }
    }
}

double PhantomSpec::effective_tissue_radius() const {
    if (tissue_radius_mm) return *tissue_radius_mm;
    return 0.35 * std::min(axis_extent(*this, 0), axis_extent(*this, 1));
}

std::pair<Volume, Mask> generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    const std::size_t ni = spec.shape[0], nj = spec.shape[1], nk = spec.shape[2];
    FloatGrid hu(spec.shape, static_cast<float>(spec.background_hu));
    ByteGrid mask(spec.shape, 0);
    const double tissue_r = spec.effective_tissue_radius();
    const double ci = axis_extent(spec, 0) / 2.0, cj = axis_extent(spec, 1) / 2.0;

    for (std::size_t i = 0; i < ni; ++i) {
        for (std::size_t j = 0; j < nj; ++j) {
            const double x = static_cast<double>(i) * spec.spacing_mm[0];
            const double y = static_cast<double>(j) * spec.spacing_mm[1];
            const bool tissue = (x - ci) * (x - ci) + (y - cj) * (y - cj) <= tissue_r * tissue_r &&
                                tissue_r > 0.0;
            for (std::size_t k = 0; k < nk; ++k) {
                const std::array<double, 3> p{x, y, static_cast<double>(k) * spec.spacing_mm[2]};
                float value = tissue ? static_cast<float>(spec.tissue_hu) : hu.at(i, j, k);
                for (const auto& c : spec.vessels) {
                    if (inside_cylinder(c, p)) {
                        value = static_cast<float>(spec.vessel_hu);
                        mask.at(i, j, k) = 1;
                        break;
                    }
                }
                hu.at(i, j, k) = value;
            }
        }
    }

    if (spec.noise_std > 0.0) {
        Rng rng(spec.seed);
        for (auto& v : hu.values()) {
            v = static_cast<float>(static_cast<double>(v) + spec.noise_std * rng.normal());
        }
    }
    return {Volume(std::move(hu), spec.spacing_mm, spec.id),
            Mask(std::move(mask), MaskRole::GroundTruth)};
}

std::uint64_t count_cylinder_voxels(const Cylinder& c, const Shape& shape, const Spacing& spacing) {
    // Count in the cylinder's own frame: along-axis positions times the
    // number of in-plane voxel centres within the radius.
    const int a = c.axis;
    const int u = (a + 1) % 3, v = (a + 2) % 3;
    std::uint64_t along = 0;
    for (std::size_t t = 0; t < shape[a]; ++t) {
        if (std::abs(static_cast<double>(t) * spacing[a] - c.center_mm[a]) <= c.length_mm / 2.0) {
            ++along;
        }
    }
    std::uint64_t disc = 0;
    for (std::size_t p = 0; p < shape[u]; ++p) {
        const double du = static_cast<double>(p) * spacing[u] - c.center_mm[u];
        for (std::size_t q = 0; q < shape[v]; ++q) {
            const double dv = static_cast<double>(q) * spacing[v] - c.center_mm[v];
            if (du * du + dv * dv <= c.radius_mm * c.radius_mm) ++disc;
        }
    }
    return along * disc;
}

Heatmap generate_attention(const AttentionSpec& spec) {
    const auto& base = spec.base.data();
    if (base.rank() != 2) fail(ErrorKind::Construction, "attention base mask must be 2D");
    if (!(spec.tau > 0.0 && spec.tau < 1.0)) {
        fail(ErrorKind::Construction, "threshold must lie in (0,1)");
    }
    const double t = spec.target_iou;
    if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::Construction, "target IoU must lie in [0,1]");
    const std::size_t h = base.dim(0), w = base.dim(1);
    const std::uint64_t n = spec.base.count();
    if (n == 0) fail(ErrorKind::Construction, "attention base mask is empty");
    const std::uint64_t outside_total = base.size() - n;

    // Depth of base pixels (erosion order).
    const std::array<double, 2> unit{1.0, 1.0};
    const auto depth = gap::squared_distance_transform(base, unit);
    // Distance of outside pixels to the base (dilation order). The
    // complement is embedded in a wide margin so the grid border does not act
    // as a base pixel.
    const std::size_t margin = h + w;
    ByteGrid complement({h + 2 * margin, w + 2 * margin}, 1);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) complement.at(i + margin, j + margin) = !base.at(i, j);
    }
    const auto reach = gap::squared_distance_transform(complement, unit);

    Rng rng(spec.seed);
    std::vector<std::uint64_t> key(base.size());
    for (auto& k : key) k = rng.next();

    std::vector<std::size_t> inside, outside;
    for (std::size_t p = 0; p < base.size(); ++p) (base[p] ? inside : outside).push_back(p);
    std::sort(inside.begin(), inside.end(), [&](std::size_t a, std::size_t b) {
        if (depth[a] != depth[b]) return depth[a] > depth[b];
        return key[a] < key[b];
    });
    auto reach_of = [&](std::size_t p) { return reach.at(p / w + margin, p % w + margin); };
    std::sort(outside.begin(), outside.end(), [&](std::size_t a, std::size_t b) {
        const double ra = reach_of(a), rb = reach_of(b);
        if (ra != rb) return ra < rb;
        return key[a] < key[b];
    });

    std::uint64_t keep = n, extra = 0;
    const double nd = static_cast<double>(n);
    if (t == 0.0) {
        if (outside_total == 0) {
            fail(ErrorKind::Construction, "IoU 0 needs pixels outside the base mask");
        }
        keep = 0;
        extra = std::min(n, outside_total);
    } else if (t < 1.0) {
        keep = std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::llround(std::sqrt(t) * nd)),
                                         1, n);
        const double e = std::round(static_cast<double>(keep) / t - nd);
        extra = e > 0.0 ? static_cast<std::uint64_t>(e) : 0;
        if (extra > outside_total) {
            // Not enough room to dilate: erode only.
            extra = 0;
            keep = std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::llround(t * nd)), 1, n);
        }
    }
    const double achieved = static_cast<double>(keep) / static_cast<double>(n + extra);
    if (std::abs(achieved - t) > kAttentionTolerance) {
        fail(ErrorKind::Construction, "IoU " + std::to_string(t) + " is not reachable within " +
                                          std::to_string(kAttentionTolerance) + " on a base of " +
                                          std::to_string(n) + " pixels");
    }

    std::vector<std::uint8_t> selected(base.size(), 0);
    for (std::uint64_t k = 0; k < keep; ++k) selected[inside[k]] = 1;
    for (std::uint64_t k = 0; k < extra; ++k) selected[outside[k]] = 1;

    FloatGrid values(base.shape(), 0.0f);
    for (std::size_t p = 0; p < base.size(); ++p) {
        const double u = rng.uniform();
        values[p] = selected[p] ? above(spec.tau + (1.0 - spec.tau) * u, spec.tau)
                                : below(spec.tau * u, spec.tau);
    }
    return Heatmap(std::move(values), {}, HeatmapProvenance::Aggregated);
}

} // namespace shiftlens::phantom
