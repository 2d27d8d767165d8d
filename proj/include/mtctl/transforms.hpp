#ifndef MTCTL_TRANSFORMS_HPP
#define MTCTL_TRANSFORMS_HPP

#include <array>
#include <cmath>

#include "mtctl/volume.hpp"

namespace mtctl {

// Signed distance map: positive inside the foreground, negative outside,
// magnitude = Euclidean voxel distance to the nearest opposite-class voxel,
// normalized by the maximum absolute value to [-1, 1].
struct SignedDistanceMap {
    Grid3d data;
};

// Sigmoid sharpness for the smooth distance-to-probability inverse.
struct Steepness {
    double k = 1500.0;

    void validate() const {
        if (!(k > 0.0) || !std::isfinite(k)) {
            throw ContractError("Steepness: k must be positive and finite");
        }
    }
};

// Exact squared Euclidean distance to the nearest site voxel (site = nonzero),
// per-axis grid step given by `spacing`. Voxels on sites get 0.
Grid3d edt_squared(const Grid3u8& sites, const std::array<double, 3>& spacing = {1, 1, 1});

SignedDistanceMap sdm(const BinaryMask& mask);

// Elementwise logistic 1/(1 + exp(-k*z)); saturates instead of overflowing.
template <typename T>
Grid3<T> inverse_sdm(const Grid3<T>& z, Steepness k) {
    k.validate();
    Grid3<T> out(z.shape());
    for (std::int64_t i = 0; i < z.size(); ++i) {
        double a = -k.k * static_cast<double>(z[i]);
        a = std::clamp(a, -500.0, 500.0);
        out[i] = static_cast<T>(1.0 / (1.0 + std::exp(a)));
    }
    return out;
}

} // namespace mtctl

#endif
