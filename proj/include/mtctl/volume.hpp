#ifndef MTCTL_VOLUME_HPP
#define MTCTL_VOLUME_HPP

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "mtctl/grid.hpp"
#include "mtctl/rng.hpp"

namespace mtctl {

// 3D scalar image. Spacing is mm per voxel along (d, h, w).
struct Volume {
    Grid3f data;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::string id;
};

// Binary label field over {0, 1}, same shape as its Volume.
struct BinaryMask {
    Grid3u8 data;

    std::int64_t foreground_count() const {
        std::int64_t n = 0;
        for (auto v : data) n += v;
        return n;
    }
};

struct LabeledCase {
    Volume image;
    BinaryMask mask;
};

struct DatasetSplit {
    std::vector<LabeledCase> labeled;
    std::vector<Volume> unlabeled;
    std::uint64_t seed = 0;
};

// Synthetic phantom: a union of overlapping ellipsoid lobes on a noisy
// two-intensity background, a stand-in for a smooth closed anatomical shape.
struct PhantomSpec {
    Shape3 grid_shape{32, 32, 32};
    int n_lobes = 1;
    double radius_min = 5.0;
    double radius_max = 9.0;
    double noise_sigma = 0.1;
    double fg_intensity = 1.0;
    double bg_intensity = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Z-score standardization (per volume): zero mean, unit (population) std.
Volume normalize(const Volume& v);

// Trilinear resampling to `target`; center-aligned, edge-clamped.
Volume resize(const Volume& v, Shape3 target);

// Nearest-neighbor resampling; preserves binarity.
BinaryMask resize(const BinaryMask& m, Shape3 target);

std::pair<Volume, BinaryMask> make_phantom(const PhantomSpec& spec);

// Seeded shuffle then split: ceil(fraction*n) labeled, remainder unlabeled
// (their labels are dropped).
DatasetSplit split_dataset(const std::vector<LabeledCase>& cases,
                           double labeled_fraction, std::uint64_t seed);

// True when every foreground voxel is 6-connected to every other.
bool mask_is_connected(const BinaryMask& m);

BinaryMask threshold_prob_map(const Grid3f& prob, float thr = 0.5f);

} // namespace mtctl

#endif
