#include "mtctl/volume.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace mtctl {

void PhantomSpec::validate() const {
    if (grid_shape.d < 4 || grid_shape.h < 4 || grid_shape.w < 4) {
        throw ShapeError("PhantomSpec: grid dims must be >= 4, got " + grid_shape.str());
    }
    if (n_lobes < 1) throw ContractError("PhantomSpec: n_lobes must be >= 1");
    if (!(radius_min > 0.0) || radius_max < radius_min) {
        throw ContractError("PhantomSpec: need 0 < radius_min <= radius_max");
    }
    const double min_dim = static_cast<double>(
        std::min(grid_shape.d, std::min(grid_shape.h, grid_shape.w)));
    if (!(radius_max < min_dim / 2.0)) {
        throw ContractError("PhantomSpec: radius_max must be < min(grid_shape)/2");
    }
    if (noise_sigma < 0.0) throw ContractError("PhantomSpec: noise_sigma must be >= 0");
    if (fg_intensity == bg_intensity) {
        throw ContractError("PhantomSpec: fg_intensity must differ from bg_intensity");
    }
}

Volume normalize(const Volume& v) {
    const std::int64_t n = v.data.size();
    if (n == 0) throw ShapeError("normalize: empty volume");

    const auto [mn, mx] = std::minmax_element(v.data.begin(), v.data.end());
    if (*mn == *mx) {
        throw ConstantVolumeError("normalize: volume '" + v.id + "' is constant-valued");
    }

    double sum = 0.0;
    for (float x : v.data) sum += x;
    const double mean = sum / static_cast<double>(n);

    double ss = 0.0;
    for (float x : v.data) {
        const double c = x - mean;
        ss += c * c;
    }
    const double sigma = std::sqrt(ss / static_cast<double>(n));

    Volume out{Grid3f(v.data.shape()), v.spacing, v.id};
    for (std::int64_t i = 0; i < n; ++i) {
        out.data[i] = static_cast<float>((v.data[i] - mean) / sigma);
    }
    return out;
}

namespace {

void check_resize_target(Shape3 target) {
    if (target.d < 4 || target.h < 4 || target.w < 4) {
        throw ShapeError("resize: target dims must be >= 4, got " + target.str());
    }
}

// Center-aligned source coordinate for output index i.
inline double src_coord(std::int64_t i, std::int64_t out_n, std::int64_t in_n) {
    const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
    return (static_cast<double>(i) + 0.5) * scale - 0.5;
}

inline std::int64_t clamp_idx(std::int64_t i, std::int64_t n) {
    return std::clamp<std::int64_t>(i, 0, n - 1);
}

} // namespace

Volume resize(const Volume& v, Shape3 target) {
    check_resize_target(target);
    const Shape3 s = v.data.shape();
    Volume out{Grid3f(target), v.spacing, v.id};
    out.spacing = {v.spacing[0] * static_cast<double>(s.d) / static_cast<double>(target.d),
                   v.spacing[1] * static_cast<double>(s.h) / static_cast<double>(target.h),
                   v.spacing[2] * static_cast<double>(s.w) / static_cast<double>(target.w)};

    for (std::int64_t z = 0; z < target.d; ++z) {
        const double fz = src_coord(z, target.d, s.d);
        const std::int64_t z0 = static_cast<std::int64_t>(std::floor(fz));
        const double wz = fz - static_cast<double>(z0);
        const std::int64_t za = clamp_idx(z0, s.d), zb = clamp_idx(z0 + 1, s.d);
        for (std::int64_t y = 0; y < target.h; ++y) {
            const double fy = src_coord(y, target.h, s.h);
            const std::int64_t y0 = static_cast<std::int64_t>(std::floor(fy));
            const double wy = fy - static_cast<double>(y0);
            const std::int64_t ya = clamp_idx(y0, s.h), yb = clamp_idx(y0 + 1, s.h);
            for (std::int64_t x = 0; x < target.w; ++x) {
                const double fx = src_coord(x, target.w, s.w);
                const std::int64_t x0 = static_cast<std::int64_t>(std::floor(fx));
                const double wx = fx - static_cast<double>(x0);
                const std::int64_t xa = clamp_idx(x0, s.w), xb = clamp_idx(x0 + 1, s.w);

                const double c00 = v.data(za, ya, xa) * (1 - wx) + v.data(za, ya, xb) * wx;
                const double c01 = v.data(za, yb, xa) * (1 - wx) + v.data(za, yb, xb) * wx;
                const double c10 = v.data(zb, ya, xa) * (1 - wx) + v.data(zb, ya, xb) * wx;
                const double c11 = v.data(zb, yb, xa) * (1 - wx) + v.data(zb, yb, xb) * wx;
                const double c0 = c00 * (1 - wy) + c01 * wy;
                const double c1 = c10 * (1 - wy) + c11 * wy;
                out.data(z, y, x) = static_cast<float>(c0 * (1 - wz) + c1 * wz);
            }
        }
    }
    return out;
}

BinaryMask resize(const BinaryMask& m, Shape3 target) {
    check_resize_target(target);
    const Shape3 s = m.data.shape();
    BinaryMask out{Grid3u8(target)};
    for (std::int64_t z = 0; z < target.d; ++z) {
        const std::int64_t zi = clamp_idx(
            static_cast<std::int64_t>(std::llround(src_coord(z, target.d, s.d))), s.d);
        for (std::int64_t y = 0; y < target.h; ++y) {
            const std::int64_t yi = clamp_idx(
                static_cast<std::int64_t>(std::llround(src_coord(y, target.h, s.h))), s.h);
            for (std::int64_t x = 0; x < target.w; ++x) {
                const std::int64_t xi = clamp_idx(
                    static_cast<std::int64_t>(std::llround(src_coord(x, target.w, s.w))), s.w);
                out.data(z, y, x) = m.data(zi, yi, xi);
            }
        }
    }
    return out;
}

std::pair<Volume, BinaryMask> make_phantom(const PhantomSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const Shape3 s = spec.grid_shape;

    struct Lobe {
        double cz, cy, cx, rz, ry, rx;
    };
    std::vector<Lobe> lobes;
    lobes.reserve(static_cast<std::size_t>(spec.n_lobes));

    auto clamp_center = [](double c, double r, std::int64_t dim) {
        const double lo = r, hi = static_cast<double>(dim - 1) - r;
        return lo <= hi ? std::clamp(c, lo, hi) : static_cast<double>(dim - 1) / 2.0;
    };

    for (int i = 0; i < spec.n_lobes; ++i) {
        Lobe lb;
        lb.rz = rng.uniform(spec.radius_min, spec.radius_max);
        lb.ry = rng.uniform(spec.radius_min, spec.radius_max);
        lb.rx = rng.uniform(spec.radius_min, spec.radius_max);
        if (i == 0) {
            lb.cz = static_cast<double>(s.d - 1) / 2.0 + rng.uniform(-1.0, 1.0);
            lb.cy = static_cast<double>(s.h - 1) / 2.0 + rng.uniform(-1.0, 1.0);
            lb.cx = static_cast<double>(s.w - 1) / 2.0 + rng.uniform(-1.0, 1.0);
        } else {
            // New center inside the previous lobe, so the union stays connected.
            const Lobe& p = lobes.back();
            const double step = 0.8 * std::min(p.rz, std::min(p.ry, p.rx));
            lb.cz = p.cz + rng.uniform(-step, step);
            lb.cy = p.cy + rng.uniform(-step, step);
            lb.cx = p.cx + rng.uniform(-step, step);
        }
        lb.cz = clamp_center(lb.cz, lb.rz, s.d);
        lb.cy = clamp_center(lb.cy, lb.ry, s.h);
        lb.cx = clamp_center(lb.cx, lb.rx, s.w);
        lobes.push_back(lb);
    }

    BinaryMask mask{Grid3u8(s)};
    for (std::int64_t z = 0; z < s.d; ++z) {
        for (std::int64_t y = 0; y < s.h; ++y) {
            for (std::int64_t x = 0; x < s.w; ++x) {
                bool inside = false;
                for (const Lobe& lb : lobes) {
                    const double dz = (static_cast<double>(z) - lb.cz) / lb.rz;
                    const double dy = (static_cast<double>(y) - lb.cy) / lb.ry;
                    const double dx = (static_cast<double>(x) - lb.cx) / lb.rx;
                    if (dz * dz + dy * dy + dx * dx <= 1.0) {
                        inside = true;
                        break;
                    }
                }
                mask.data(z, y, x) = inside ? 1 : 0;
            }
        }
    }

    Volume vol{Grid3f(s), {1.0, 1.0, 1.0}, "phantom-" + std::to_string(spec.seed)};
    for (std::int64_t i = 0; i < vol.data.size(); ++i) {
        double val = spec.bg_intensity +
                     (spec.fg_intensity - spec.bg_intensity) * static_cast<double>(mask.data[i]);
        if (spec.noise_sigma > 0.0) val += rng.normal(0.0, spec.noise_sigma);
        vol.data[i] = static_cast<float>(val);
    }
    return {std::move(vol), std::move(mask)};
}

DatasetSplit split_dataset(const std::vector<LabeledCase>& cases,
                           double labeled_fraction, std::uint64_t seed) {
    if (cases.empty()) throw EmptyDatasetError("split_dataset: no cases");
    if (!(labeled_fraction > 0.0) || labeled_fraction > 1.0) {
        throw ContractError("split_dataset: labeled_fraction must be in (0, 1]");
    }
    std::vector<std::size_t> order(cases.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    const auto n_labeled = static_cast<std::size_t>(std::ceil(
        labeled_fraction * static_cast<double>(cases.size())));

    DatasetSplit split;
    split.seed = seed;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < n_labeled) {
            split.labeled.push_back(cases[order[i]]);
        } else {
            split.unlabeled.push_back(cases[order[i]].image);
        }
    }
    return split;
}

bool mask_is_connected(const BinaryMask& m) {
    const Shape3 s = m.data.shape();
    std::int64_t total = m.foreground_count();
    if (total == 0) return true;

    Grid3u8 seen(s);
    std::deque<std::array<std::int64_t, 3>> queue;
    for (std::int64_t z = 0; z < s.d && queue.empty(); ++z) {
        for (std::int64_t y = 0; y < s.h && queue.empty(); ++y) {
            for (std::int64_t x = 0; x < s.w && queue.empty(); ++x) {
                if (m.data(z, y, x)) {
                    queue.push_back({z, y, x});
                    seen(z, y, x) = 1;
                }
            }
        }
    }

    std::int64_t reached = 0;
    static constexpr std::int64_t kNbr[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                                {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
    while (!queue.empty()) {
        const auto [z, y, x] = queue.front();
        queue.pop_front();
        ++reached;
        for (const auto& n : kNbr) {
            const std::int64_t nz = z + n[0], ny = y + n[1], nx = x + n[2];
            if (nz < 0 || ny < 0 || nx < 0 || nz >= s.d || ny >= s.h || nx >= s.w) continue;
            if (m.data(nz, ny, nx) && !seen(nz, ny, nx)) {
                seen(nz, ny, nx) = 1;
                queue.push_back({nz, ny, nx});
            }
        }
    }
    return reached == total;
}

BinaryMask threshold_prob_map(const Grid3f& prob, float thr) {
    BinaryMask out{Grid3u8(prob.shape())};
    for (std::int64_t i = 0; i < prob.size(); ++i) {
        out.data[i] = prob[i] >= thr ? 1 : 0; // ties map to foreground
    }
    return out;
}

} // namespace mtctl
