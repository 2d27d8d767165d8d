#include "mtctl/transforms.hpp"

#include <vector>

namespace mtctl {

namespace {

constexpr double kFar = 1e30;

// 1D squared-distance transform over samples at positions i*step
// (lower envelope of parabolas).
void dt1d(const double* f, double* d, std::int64_t n, double step,
          std::vector<std::int64_t>& v, std::vector<double>& z) {
    v.resize(static_cast<std::size_t>(n));
    z.resize(static_cast<std::size_t>(n) + 1);
    std::int64_t k = 0;
    v[0] = 0;
    z[0] = -kFar;
    z[1] = kFar;
    for (std::int64_t q = 1; q < n; ++q) {
        const double xq = static_cast<double>(q) * step;
        double s = 0.0;
        while (true) {
            const double xv = static_cast<double>(v[static_cast<std::size_t>(k)]) * step;
            s = ((f[q] + xq * xq) - (f[v[static_cast<std::size_t>(k)]] + xv * xv)) /
                (2.0 * xq - 2.0 * xv);
            if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = kFar;
    }
    k = 0;
    for (std::int64_t q = 0; q < n; ++q) {
        const double xq = static_cast<double>(q) * step;
        while (z[static_cast<std::size_t>(k) + 1] < xq) ++k;
        const double dx = xq - static_cast<double>(v[static_cast<std::size_t>(k)]) * step;
        d[q] = dx * dx + f[v[static_cast<std::size_t>(k)]];
    }
}

} // namespace

Grid3d edt_squared(const Grid3u8& sites, const std::array<double, 3>& spacing) {
    const Shape3 s = sites.shape();
    Grid3d dist(s);
    for (std::int64_t i = 0; i < sites.size(); ++i) {
        dist[i] = sites[i] ? 0.0 : kFar;
    }

    std::vector<double> f, d;
    std::vector<std::int64_t> v;
    std::vector<double> z;

    // Pass along w (contiguous).
    f.resize(static_cast<std::size_t>(s.w));
    d.resize(static_cast<std::size_t>(s.w));
    for (std::int64_t zz = 0; zz < s.d; ++zz) {
        for (std::int64_t yy = 0; yy < s.h; ++yy) {
            double* row = &dist(zz, yy, 0);
            dt1d(row, d.data(), s.w, spacing[2], v, z);
            std::copy(d.begin(), d.end(), row);
        }
    }

    // Pass along h.
    f.resize(static_cast<std::size_t>(s.h));
    d.resize(static_cast<std::size_t>(s.h));
    for (std::int64_t zz = 0; zz < s.d; ++zz) {
        for (std::int64_t xx = 0; xx < s.w; ++xx) {
            for (std::int64_t yy = 0; yy < s.h; ++yy) f[static_cast<std::size_t>(yy)] = dist(zz, yy, xx);
            dt1d(f.data(), d.data(), s.h, spacing[1], v, z);
            for (std::int64_t yy = 0; yy < s.h; ++yy) dist(zz, yy, xx) = d[static_cast<std::size_t>(yy)];
        }
    }

    // Pass along d.
    f.resize(static_cast<std::size_t>(s.d));
    d.resize(static_cast<std::size_t>(s.d));
    for (std::int64_t yy = 0; yy < s.h; ++yy) {
        for (std::int64_t xx = 0; xx < s.w; ++xx) {
            for (std::int64_t zz = 0; zz < s.d; ++zz) f[static_cast<std::size_t>(zz)] = dist(zz, yy, xx);
            dt1d(f.data(), d.data(), s.d, spacing[0], v, z);
            for (std::int64_t zz = 0; zz < s.d; ++zz) dist(zz, yy, xx) = d[static_cast<std::size_t>(zz)];
        }
    }
    return dist;
}

SignedDistanceMap sdm(const BinaryMask& mask) {
    const std::int64_t fg = mask.foreground_count();
    if (fg == 0 || fg == mask.data.size()) {
        throw DegenerateMaskError("sdm: mask must contain both classes (foreground count " +
                                  std::to_string(fg) + " of " +
                                  std::to_string(mask.data.size()) + ")");
    }

    Grid3u8 background(mask.data.shape());
    for (std::int64_t i = 0; i < mask.data.size(); ++i) background[i] = mask.data[i] ? 0 : 1;

    const Grid3d to_bg = edt_squared(background); // distance off the foreground
    const Grid3d to_fg = edt_squared(mask.data);  // distance off the background

    SignedDistanceMap out{Grid3d(mask.data.shape())};
    double max_abs = 0.0;
    for (std::int64_t i = 0; i < mask.data.size(); ++i) {
        const double v = mask.data[i] ? std::sqrt(to_bg[i]) : -std::sqrt(to_fg[i]);
        out.data[i] = v;
        max_abs = std::max(max_abs, std::abs(v));
    }
    for (auto& v : out.data) v /= max_abs;
    return out;
}

} // namespace mtctl
