#include "shiftlens/domain_gap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shiftlens/io.hpp"
#include "shiftlens/parallel.hpp"

namespace shiftlens::gap {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

// Linear interpolation between closest ranks on sorted data.
double percentile_sorted(const std::vector<double>& sorted, double pct) {
    const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) on one line.
// `f` holds squared distances (kInf for "no site"); results overwrite `f`.
void transform_line(std::vector<double>& f, double w, std::vector<std::ptrdiff_t>& v,
                    std::vector<double>& z, std::vector<double>& out) {
    const auto n = static_cast<std::ptrdiff_t>(f.size());
    auto pos = [w](std::ptrdiff_t q) { return static_cast<double>(q) * w; };
    std::ptrdiff_t k = -1;
    for (std::ptrdiff_t q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        auto intersect = [&](std::ptrdiff_t site) {
            const double pq = pos(q);
            const double pv = pos(site);
            return ((f[q] + pq * pq) - (f[site] + pv * pv)) / (2.0 * (pq - pv));
        };
        // z[0] is -inf, so k never drops below zero.
        double s = intersect(v[k]);
        while (s <= z[k]) {
            --k;
            s = intersect(v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        std::fill(out.begin(), out.end(), kInf);
    } else {
        auto eval = [&](std::ptrdiff_t site, std::ptrdiff_t q) {
            const double d = static_cast<double>(q - site) * w;
            return f[site] + d * d;
        };
        std::ptrdiff_t j = 0;
        for (std::ptrdiff_t q = 0; q < n; ++q) {
            while (j < k && z[j + 1] < pos(q)) ++j;
            double best = eval(v[j], q);
            // Rounding in the breakpoints can pick a neighbour of the true
            // minimiser on near-ties.
            if (j > 0) best = std::min(best, eval(v[j - 1], q));
            if (j < k) best = std::min(best, eval(v[j + 1], q));
            out[q] = best;
        }
    }
    f.swap(out);
}

} // namespace

void RunningStats::push(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
}

void RunningStats::merge(const RunningStats& other) noexcept {
    if (other.count_ == 0) return;
    if (count_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const double delta = other.mean_ - mean_;
    mean_ += delta * nb / n;
    m2_ += other.m2_ + delta * delta * na * nb / n;
    count_ += other.count_;
}

double RunningStats::population_variance() const noexcept {
    return count_ ? std::max(0.0, m2_ / static_cast<double>(count_)) : 0.0;
}

double RunningStats::population_std() const noexcept { return std::sqrt(population_variance()); }

RunningStats accumulate_window(const Volume& volume, IntensityWindow window) {
    if (!(window.lo < window.hi)) {
        fail(ErrorKind::Validation, "intensity window requires lo < hi");
    }
    RunningStats acc;
    for (float v : volume.data().values()) {
        if (v >= window.lo && v <= window.hi) acc.push(v);
    }
    return acc;
}

IntensityStats intensity_stats(const RunningStats& acc, IntensityWindow window) {
    if (acc.count() == 0) {
        fail(ErrorKind::EmptyWindow, "no voxels inside the [" + std::to_string(window.lo) + ", " +
                                         std::to_string(window.hi) + "] HU window");
    }
    return {window.lo, window.hi, acc.mean(), acc.population_std(), acc.count()};
}

IntensityStats intensity_stats(const Volume& volume, IntensityWindow window) {
    return intensity_stats(accumulate_window(volume, window), window);
}

ResolutionDelta resolution_compare(const Spacing& source, const Spacing& target) {
    ResolutionDelta out{source, target, {}};
    for (std::size_t axis = 0; axis < 3; ++axis) {
        if (!(source[axis] > 0.0) || !(target[axis] > 0.0)) {
            fail(ErrorKind::Validation, "spacing must be positive on every axis");
        }
        out.percent_difference[axis] = (target[axis] - source[axis]) / source[axis] * 100.0;
    }
    return out;
}

NoiseStats estimate_background_noise(const Volume& volume, std::size_t patch_edge) {
    const auto& grid = volume.data();
    if (patch_edge == 0 || grid.dim(0) < 2 * patch_edge || grid.dim(1) < 2 * patch_edge) {
        fail(ErrorKind::Validation, "volume '" + volume.id() + "' in-plane size " +
                                        shape_string(grid.shape()) +
                                        " is smaller than two patches of edge " +
                                        std::to_string(patch_edge));
    }
    NoiseStats out;
    out.method = "corner-patch median std, air < -500 HU, edge " + std::to_string(patch_edge);
    std::vector<double> stds;
    for (int corner = 0; corner < 8; ++corner) {
        PatchNoise patch;
        std::array<std::size_t, 3> lo{}, hi{};
        for (std::size_t axis = 0; axis < 3; ++axis) {
            const std::size_t n = grid.dim(axis);
            const std::size_t edge = std::min(patch_edge, n);
            patch.high_corner[axis] = (corner >> axis) & 1;
            lo[axis] = patch.high_corner[axis] ? n - edge : 0;
            hi[axis] = lo[axis] + edge;
        }
        RunningStats acc;
        for (std::size_t i = lo[0]; i < hi[0]; ++i) {
            for (std::size_t j = lo[1]; j < hi[1]; ++j) {
                for (std::size_t k = lo[2]; k < hi[2]; ++k) {
                    const float v = grid.at(i, j, k);
                    if (v < kAirThresholdHu) acc.push(v);
                }
            }
        }
        patch.air_voxels = acc.count();
        if (acc.count() >= kMinAirVoxels) {
            patch.std = acc.population_std();
            stds.push_back(*patch.std);
        }
        out.patches.push_back(patch);
    }
    if (stds.empty()) {
        fail(ErrorKind::InsufficientBackground,
             "volume '" + volume.id() + "': no corner patch has " +
                 std::to_string(kMinAirVoxels) + " air voxels");
    }
    out.noise_std = median_of(std::move(stds));
    return out;
}

Grid<double> squared_distance_transform(const ByteGrid& mask, std::span<const double> spacing) {
    const std::size_t rank = mask.rank();
    if (rank < 1 || spacing.size() != rank) {
        fail(ErrorKind::Shape, "distance transform needs one spacing per axis");
    }
    // Pad with one layer of background on every side.
    Shape padded(rank);
    for (std::size_t a = 0; a < rank; ++a) padded[a] = mask.dim(a) + 2;
    std::vector<std::size_t> stride(rank, 1), mstride(rank, 1);
    for (std::size_t a = rank - 1; a > 0; --a) {
        stride[a - 1] = stride[a] * padded[a];
        mstride[a - 1] = mstride[a] * mask.dim(a);
    }
    const std::size_t total = element_count(padded);
    std::vector<double> dist(total, 0.0);
    std::vector<std::size_t> coord(rank);
    for (std::size_t flat = 0; flat < mask.size(); ++flat) {
        std::size_t rem = flat, p = 0;
        for (std::size_t a = 0; a < rank; ++a) {
            coord[a] = rem / mstride[a];
            rem %= mstride[a];
            p += (coord[a] + 1) * stride[a];
        }
        dist[p] = mask[flat] ? kInf : 0.0;
    }

    std::size_t longest = *std::max_element(padded.begin(), padded.end());
    std::vector<double> line, out(longest);
    std::vector<std::ptrdiff_t> v(longest);
    std::vector<double> z(longest + 1);
    for (std::size_t a = 0; a < rank; ++a) {
        const std::size_t n = padded[a];
        line.resize(n);
        out.resize(n);
        for (std::size_t base = 0; base < total; ++base) {
            if ((base / stride[a]) % n != 0) continue;
            for (std::size_t q = 0; q < n; ++q) line[q] = dist[base + q * stride[a]];
            transform_line(line, spacing[a], v, z, out);
            for (std::size_t q = 0; q < n; ++q) dist[base + q * stride[a]] = line[q];
        }
    }

    Grid<double> result(mask.shape(), 0.0);
    for (std::size_t flat = 0; flat < mask.size(); ++flat) {
        std::size_t rem = flat, p = 0;
        for (std::size_t a = 0; a < rank; ++a) {
            p += (rem / mstride[a] + 1) * stride[a];
            rem %= mstride[a];
        }
        result[flat] = dist[p];
    }
    return result;
}

std::vector<double> diameter_samples(const Mask& mask, const Spacing& spacing) {
    const auto& grid = mask.data();
    if (grid.rank() != 3) {
        fail(ErrorKind::Shape, "vessel diameters need a 3D mask, got " + shape_string(grid.shape()));
    }
    if (mask.count() == 0) fail(ErrorKind::EmptyMask, "vessel mask is empty");
    const auto sq = squared_distance_transform(grid, spacing);
    const auto ni = static_cast<std::ptrdiff_t>(grid.dim(0));
    const auto nj = static_cast<std::ptrdiff_t>(grid.dim(1));
    const auto nk = static_cast<std::ptrdiff_t>(grid.dim(2));
    std::vector<double> samples;
    for (std::ptrdiff_t i = 0; i < ni; ++i) {
        for (std::ptrdiff_t j = 0; j < nj; ++j) {
            for (std::ptrdiff_t k = 0; k < nk; ++k) {
                if (!grid.at(i, j, k)) continue;
                const double here = sq.at(i, j, k);
                bool ridge = true;
                for (std::ptrdiff_t di = -1; di <= 1 && ridge; ++di) {
                    for (std::ptrdiff_t dj = -1; dj <= 1 && ridge; ++dj) {
                        for (std::ptrdiff_t dk = -1; dk <= 1; ++dk) {
                            const auto a = i + di, b = j + dj, c = k + dk;
                            if ((di | dj | dk) == 0 || a < 0 || b < 0 || c < 0 || a >= ni ||
                                b >= nj || c >= nk) {
                                continue;
                            }
                            if (sq.at(a, b, c) > here) {
                                ridge = false;
                                break;
                            }
                        }
                    }
                }
                if (ridge) samples.push_back(2.0 * std::sqrt(here));
            }
        }
    }
    return samples;
}

DiameterStats summarize_diameters(std::vector<double> samples) {
    if (samples.empty()) fail(ErrorKind::EmptyMask, "no diameter samples");
    std::sort(samples.begin(), samples.end());
    DiameterStats out;
    out.sample_count = samples.size();
    const double n = static_cast<double>(samples.size());
    double sum = 0.0;
    for (double s : samples) sum += s;
    out.mean = sum / n;
    double ss = 0.0;
    for (double s : samples) ss += (s - out.mean) * (s - out.mean);
    out.std = std::sqrt(ss / n);
    out.min = samples.front();
    out.max = samples.back();
    out.median = median_of(samples);
    out.p99 = percentile_sorted(samples, 99.0);
    return out;
}

DiameterStats vessel_diameters(const Mask& mask, const Spacing& spacing) {
    return summarize_diameters(diameter_samples(mask, spacing));
}

DomainGapReport domain_gap_report(const DatasetSummary& source, const DatasetSummary& target) {
    DomainGapReport out;
    out.source_intensity = source.intensity;
    out.target_intensity = target.intensity;
    out.resolution = resolution_compare(source.mean_spacing, target.mean_spacing);
    out.source_noise = source.noise;
    out.target_noise = target.noise;
    if (source.noise.noise_std > 0.0) {
        out.noise_ratio = target.noise.noise_std / source.noise.noise_std;
    }
    out.source_diameters = source.diameters;
    out.target_diameters = target.diameters;
    return out;
}

DatasetSummary summarize_dataset(const std::vector<Volume>& volumes,
                                 const std::vector<std::optional<Mask>>& masks,
                                 const GapConfig& config) {
    if (volumes.empty()) fail(ErrorKind::EmptyInput, "dataset has no volumes");
    if (masks.size() != volumes.size()) {
        fail(ErrorKind::Validation, "mask list does not match volume list");
    }
    struct PerVolume {
        RunningStats intensity;
        NoiseStats noise;
        std::vector<double> diameters;
    };
    auto per = parallel_map(volumes.size(), config.workers, [&](std::size_t i) {
        PerVolume r;
        r.intensity = accumulate_window(volumes[i], config.window);
        r.noise = estimate_background_noise(volumes[i], config.patch_edge);
        if (masks[i]) {
            validate_pair(volumes[i], *masks[i]);
            r.diameters = diameter_samples(*masks[i], volumes[i].spacing_mm());
        }
        return r;
    });

    DatasetSummary out;
    out.volume_count = volumes.size();
    RunningStats intensity;
    std::vector<double> diameters;
    bool any_mask = false;
    double noise_sum = 0.0;
    for (std::size_t i = 0; i < per.size(); ++i) {
        intensity.merge(per[i].intensity);
        noise_sum += per[i].noise.noise_std;
        out.noise.patches.insert(out.noise.patches.end(), per[i].noise.patches.begin(),
                                 per[i].noise.patches.end());
        for (std::size_t a = 0; a < 3; ++a) out.mean_spacing[a] += volumes[i].spacing_mm()[a];
        if (masks[i]) {
            any_mask = true;
            diameters.insert(diameters.end(), per[i].diameters.begin(), per[i].diameters.end());
        }
    }
    const double n = static_cast<double>(volumes.size());
    for (auto& s : out.mean_spacing) s /= n;
    out.intensity = intensity_stats(intensity, config.window);
    out.noise.noise_std = noise_sum / n;
    out.noise.method = per.front().noise.method + ", mean over volumes";
    if (any_mask) out.diameters = summarize_diameters(std::move(diameters));
    return out;
}

} // namespace shiftlens::gap
