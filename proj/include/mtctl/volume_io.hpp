#ifndef MTCTL_VOLUME_IO_HPP
#define MTCTL_VOLUME_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "mtctl/volume.hpp"

namespace mtctl {

// Supported volumetric formats, chosen by extension:
//   .mtv         raw: 16-byte header (magic "MTV1", 3x uint32 shape LE),
//                then float32 voxels in D-major order
//   .nii/.nii.gz single-file NIfTI-1 (uint8/int16/int32/float32/float64)
Volume load_volume(const std::filesystem::path& path);
BinaryMask load_mask(const std::filesystem::path& path);

void save_volume(const Volume& v, const std::filesystem::path& path);
void save_mask(const BinaryMask& m, const std::filesystem::path& path,
               const std::array<double, 3>& spacing = {1.0, 1.0, 1.0});
void save_map(const Grid3f& field, const std::filesystem::path& path,
              const std::array<double, 3>& spacing = {1.0, 1.0, 1.0});
void save_map(const Grid3d& field, const std::filesystem::path& path,
              const std::array<double, 3>& spacing = {1.0, 1.0, 1.0});

struct ManifestEntry {
    std::string case_id;
    std::string image_path;
    std::string mask_path; // empty for unlabeled cases
};

// CSV manifest, header "case_id,image,mask". Relative paths are resolved
// against the manifest's directory on read.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries);

// Loads every entry; entries without a mask land in `unlabeled`.
struct LoadedDataset {
    std::vector<LabeledCase> labeled;
    std::vector<Volume> unlabeled;
};
LoadedDataset load_dataset(const std::vector<ManifestEntry>& entries);

} // namespace mtctl

#endif
