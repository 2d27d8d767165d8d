#include "mtctl/volume_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mtctl {

namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& path) {
    std::string name = path.filename().string();
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (name.size() > 7 && name.ends_with(".nii.gz")) return ".nii.gz";
    const auto dot = name.find_last_of('.');
    return dot == std::string::npos ? "" : name.substr(dot);
}

// ---- raw .mtv ------------------------------------------------------------

constexpr char kMtvMagic[4] = {'M', 'T', 'V', '1'};

void save_mtv(const Grid3f& g, const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path.string());
    os.write(kMtvMagic, 4);
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(g.shape().d),
                                   static_cast<std::uint32_t>(g.shape().h),
                                   static_cast<std::uint32_t>(g.shape().w)};
    os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    os.write(reinterpret_cast<const char*>(g.data()),
             static_cast<std::streamsize>(sizeof(float)) * g.size());
    if (!os) throw FormatError("write failed: " + path.string());
}

Grid3f load_mtv(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path.string());
    char magic[4];
    std::uint32_t dims[3];
    is.read(magic, 4);
    is.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!is || std::memcmp(magic, kMtvMagic, 4) != 0) {
        throw FormatError("not an MTV1 file: " + path.string());
    }
    if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) {
        throw MetadataError("MTV shape has a zero dimension: " + path.string());
    }
    Shape3 shape{static_cast<std::int64_t>(dims[0]), static_cast<std::int64_t>(dims[1]),
                 static_cast<std::int64_t>(dims[2])};
    Grid3f g(shape);
    is.read(reinterpret_cast<char*>(g.data()),
            static_cast<std::streamsize>(sizeof(float)) * g.size());
    if (!is || is.gcount() != static_cast<std::streamsize>(sizeof(float)) * g.size()) {
        throw FormatError("truncated MTV payload: " + path.string());
    }
    return g;
}

// ---- NIfTI-1 ---------------------------------------------------------------

#pragma pack(push, 1)
struct Nifti1Header {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code, sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4], srow_y[4], srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

enum NiftiDatatype : std::int16_t {
    kDtUint8 = 2,
    kDtInt16 = 4,
    kDtInt32 = 8,
    kDtFloat32 = 16,
    kDtFloat64 = 64,
};

template <typename T>
T byteswap_scalar(T v) {
    auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

void swap_header(Nifti1Header& h) {
    h.sizeof_hdr = byteswap_scalar(h.sizeof_hdr);
    for (auto& d : h.dim) d = byteswap_scalar(d);
    h.datatype = byteswap_scalar(h.datatype);
    h.bitpix = byteswap_scalar(h.bitpix);
    for (auto& p : h.pixdim) p = byteswap_scalar(p);
    h.vox_offset = byteswap_scalar(h.vox_offset);
    h.scl_slope = byteswap_scalar(h.scl_slope);
    h.scl_inter = byteswap_scalar(h.scl_inter);
}

class GzFile {
public:
    GzFile(const fs::path& path, const char* mode) : f_(gzopen(path.string().c_str(), mode)) {
        if (!f_) throw FormatError("cannot open: " + path.string());
    }
    ~GzFile() {
        if (f_) gzclose(f_);
    }
    GzFile(const GzFile&) = delete;
    GzFile& operator=(const GzFile&) = delete;

    void read(void* buf, std::size_t n, const fs::path& path) {
        if (gzread(f_, buf, static_cast<unsigned>(n)) != static_cast<int>(n)) {
            throw FormatError("truncated NIfTI file: " + path.string());
        }
    }
    void write(const void* buf, std::size_t n, const fs::path& path) {
        if (gzwrite(f_, buf, static_cast<unsigned>(n)) != static_cast<int>(n)) {
            throw FormatError("write failed: " + path.string());
        }
    }
    void skip(std::size_t n, const fs::path& path) {
        if (gzseek(f_, static_cast<z_off_t>(n), SEEK_CUR) < 0) {
            throw FormatError("truncated NIfTI file: " + path.string());
        }
    }

private:
    gzFile f_;
};

template <typename Src>
void convert_payload(GzFile& f, Grid3f& out, bool swap, double slope, double inter,
                     const fs::path& path) {
    std::vector<Src> raw(static_cast<std::size_t>(out.size()));
    f.read(raw.data(), raw.size() * sizeof(Src), path);
    for (std::int64_t i = 0; i < out.size(); ++i) {
        Src v = raw[static_cast<std::size_t>(i)];
        if (swap && sizeof(Src) > 1) v = byteswap_scalar(v);
        out[i] = static_cast<float>(static_cast<double>(v) * slope + inter);
    }
}

Volume load_nifti(const fs::path& path) {
    GzFile f(path, "rb");
    Nifti1Header hdr{};
    f.read(&hdr, sizeof(hdr), path);

    bool swap = false;
    if (hdr.sizeof_hdr != 348) {
        swap_header(hdr);
        swap = true;
        if (hdr.sizeof_hdr != 348) throw FormatError("not a NIfTI-1 file: " + path.string());
    }
    if (std::memcmp(hdr.magic, "n+1", 3) != 0) {
        throw FormatError("unsupported NIfTI variant (need single-file n+1): " + path.string());
    }

    int ndim = hdr.dim[0];
    // Accept trailing singleton dims (e.g. a 4th time axis of length 1).
    while (ndim > 3 && hdr.dim[ndim] <= 1) --ndim;
    if (ndim != 3) {
        throw FormatError("expected 3D payload, got " + std::to_string(ndim) + "D: " +
                          path.string());
    }
    const std::int64_t nx = hdr.dim[1], ny = hdr.dim[2], nz = hdr.dim[3];
    if (nx < 1 || ny < 1 || nz < 1) {
        throw MetadataError("invalid NIfTI shape: " + path.string());
    }
    for (int a = 1; a <= 3; ++a) {
        if (!(hdr.pixdim[a] > 0.0f) || !std::isfinite(hdr.pixdim[a])) {
            throw MetadataError("missing or invalid voxel spacing: " + path.string());
        }
    }

    const double slope = (hdr.scl_slope == 0.0f) ? 1.0 : static_cast<double>(hdr.scl_slope);
    const double inter = (hdr.scl_slope == 0.0f) ? 0.0 : static_cast<double>(hdr.scl_inter);

    Volume vol;
    vol.data = Grid3f(Shape3{nz, ny, nx}); // x fastest in file, matches w fastest in memory
    vol.spacing = {static_cast<double>(hdr.pixdim[3]), static_cast<double>(hdr.pixdim[2]),
                   static_cast<double>(hdr.pixdim[1])};
    vol.id = path.stem().stem().string();

    const auto offset = static_cast<std::size_t>(hdr.vox_offset);
    if (offset < sizeof(hdr)) throw MetadataError("bad vox_offset: " + path.string());
    f.skip(offset - sizeof(hdr), path);

    switch (hdr.datatype) {
        case kDtUint8: convert_payload<std::uint8_t>(f, vol.data, swap, slope, inter, path); break;
        case kDtInt16: convert_payload<std::int16_t>(f, vol.data, swap, slope, inter, path); break;
        case kDtInt32: convert_payload<std::int32_t>(f, vol.data, swap, slope, inter, path); break;
        case kDtFloat32: convert_payload<float>(f, vol.data, swap, slope, inter, path); break;
        case kDtFloat64: convert_payload<double>(f, vol.data, swap, slope, inter, path); break;
        default:
            throw FormatError("unsupported NIfTI datatype " + std::to_string(hdr.datatype) +
                              ": " + path.string());
    }
    return vol;
}

Nifti1Header make_header(Shape3 s, const std::array<double, 3>& spacing,
                         std::int16_t datatype, std::int16_t bitpix) {
    Nifti1Header hdr{};
    hdr.sizeof_hdr = 348;
    hdr.regular = 'r';
    hdr.dim[0] = 3;
    hdr.dim[1] = static_cast<std::int16_t>(s.w);
    hdr.dim[2] = static_cast<std::int16_t>(s.h);
    hdr.dim[3] = static_cast<std::int16_t>(s.d);
    for (int a = 4; a < 8; ++a) hdr.dim[a] = 1;
    hdr.datatype = datatype;
    hdr.bitpix = bitpix;
    hdr.pixdim[0] = 1.0f;
    hdr.pixdim[1] = static_cast<float>(spacing[2]);
    hdr.pixdim[2] = static_cast<float>(spacing[1]);
    hdr.pixdim[3] = static_cast<float>(spacing[0]);
    hdr.vox_offset = 352.0f;
    hdr.scl_slope = 1.0f;
    hdr.xyzt_units = 2; // millimetres
    std::memcpy(hdr.magic, "n+1", 4);
    return hdr;
}

// Write mode: compress only for .nii.gz ("wT" = transparent/no gzip wrapper).
const char* write_mode(const fs::path& path) {
    return lower_ext(path) == ".nii.gz" ? "wb6" : "wbT";
}

void save_nifti_f32(const Grid3f& g, const std::array<double, 3>& spacing,
                    const fs::path& path) {
    GzFile f(path, write_mode(path));
    const Nifti1Header hdr = make_header(g.shape(), spacing, kDtFloat32, 32);
    const char pad[4] = {0, 0, 0, 0};
    f.write(&hdr, sizeof(hdr), path);
    f.write(pad, 4, path);
    f.write(g.data(), sizeof(float) * static_cast<std::size_t>(g.size()), path);
}

void save_nifti_u8(const Grid3u8& g, const std::array<double, 3>& spacing,
                   const fs::path& path) {
    GzFile f(path, write_mode(path));
    const Nifti1Header hdr = make_header(g.shape(), spacing, kDtUint8, 8);
    const char pad[4] = {0, 0, 0, 0};
    f.write(&hdr, sizeof(hdr), path);
    f.write(pad, 4, path);
    f.write(g.data(), static_cast<std::size_t>(g.size()), path);
}

bool is_nifti_ext(const std::string& ext) { return ext == ".nii" || ext == ".nii.gz"; }

} // namespace

Volume load_volume(const fs::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".mtv") {
        Volume v;
        v.data = load_mtv(path);
        v.id = path.stem().string();
        return v;
    }
    if (is_nifti_ext(ext)) return load_nifti(path);
    throw FormatError("unknown volume format '" + ext + "': " + path.string());
}

BinaryMask load_mask(const fs::path& path) {
    const Volume v = load_volume(path);
    BinaryMask m{Grid3u8(v.data.shape())};
    for (std::int64_t i = 0; i < v.data.size(); ++i) {
        const float x = v.data[i];
        if (x != 0.0f && x != 1.0f) {
            throw FormatError("mask has non-binary value " + std::to_string(x) + ": " +
                              path.string());
        }
        m.data[i] = x != 0.0f ? 1 : 0;
    }
    return m;
}

void save_volume(const Volume& v, const fs::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".mtv") {
        save_mtv(v.data, path);
    } else if (is_nifti_ext(ext)) {
        save_nifti_f32(v.data, v.spacing, path);
    } else {
        throw FormatError("unknown volume format '" + ext + "': " + path.string());
    }
}

void save_mask(const BinaryMask& m, const fs::path& path,
               const std::array<double, 3>& spacing) {
    const std::string ext = lower_ext(path);
    if (ext == ".mtv") {
        save_mtv(m.data.cast<float>(), path);
    } else if (is_nifti_ext(ext)) {
        save_nifti_u8(m.data, spacing, path);
    } else {
        throw FormatError("unknown mask format '" + ext + "': " + path.string());
    }
}

void save_map(const Grid3f& field, const fs::path& path,
              const std::array<double, 3>& spacing) {
    const std::string ext = lower_ext(path);
    if (ext == ".mtv") {
        save_mtv(field, path);
    } else if (is_nifti_ext(ext)) {
        save_nifti_f32(field, spacing, path);
    } else {
        throw FormatError("unknown map format '" + ext + "': " + path.string());
    }
}

void save_map(const Grid3d& field, const fs::path& path,
              const std::array<double, 3>& spacing) {
    save_map(field.cast<float>(), path, spacing);
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open manifest: " + path.string());
    const fs::path base = path.parent_path();

    auto resolve = [&base](const std::string& p) -> std::string {
        if (p.empty()) return p;
        const fs::path q(p);
        return q.is_absolute() ? q.string() : (base / q).string();
    };

    std::vector<ManifestEntry> entries;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (first && line.rfind("case_id,", 0) == 0) {
            first = false;
            continue;
        }
        first = false;
        std::array<std::string, 3> cols;
        std::size_t col = 0, start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (col < 3) cols[col] = line.substr(start, i - start);
                ++col;
                start = i + 1;
            }
        }
        if (col < 2 || col > 3 || cols[0].empty() || cols[1].empty()) {
            throw FormatError("malformed manifest line: '" + line + "'");
        }
        entries.push_back({cols[0], resolve(cols[1]), resolve(cols[2])});
    }
    return entries;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open manifest for writing: " + path.string());
    os << "case_id,image,mask\n";
    for (const auto& e : entries) {
        os << e.case_id << ',' << e.image_path << ',' << e.mask_path << '\n';
    }
    if (!os) throw FormatError("manifest write failed: " + path.string());
}

LoadedDataset load_dataset(const std::vector<ManifestEntry>& entries) {
    LoadedDataset ds;
    for (const auto& e : entries) {
        Volume v = load_volume(e.image_path);
        v.id = e.case_id;
        if (e.mask_path.empty()) {
            ds.unlabeled.push_back(std::move(v));
            continue;
        }
        BinaryMask m = load_mask(e.mask_path);
        if (!(m.data.shape() == v.data.shape())) {
            throw ShapeError("case '" + e.case_id + "': mask shape " + m.data.shape().str() +
                             " does not match image shape " + v.data.shape().str());
        }
        ds.labeled.push_back({std::move(v), std::move(m)});
    }
    return ds;
}

} // namespace mtctl
