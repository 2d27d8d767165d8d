#ifndef MTCTL_GRID_HPP
#define MTCTL_GRID_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mtctl/errors.hpp"

namespace mtctl {

struct Shape3 {
    std::int64_t d = 0, h = 0, w = 0;

    std::int64_t voxels() const { return d * h * w; }
    bool operator==(const Shape3&) const = default;

    std::string str() const {
        return std::to_string(d) + "x" + std::to_string(h) + "x" + std::to_string(w);
    }
};

// Dense 3D array, z-major (w fastest in memory).
template <typename T>
class Grid3 {
public:
    Grid3() = default;

    explicit Grid3(Shape3 s, T fill = T{}) : shape_(s), data_(check_size(s), fill) {}

    Grid3(Shape3 s, std::vector<T> values) : shape_(s), data_(std::move(values)) {
        if (static_cast<std::int64_t>(data_.size()) != s.voxels()) {
            throw ShapeError("Grid3: value count " + std::to_string(data_.size()) +
                             " does not match shape " + s.str());
        }
    }

    const Shape3& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    T& operator()(std::int64_t z, std::int64_t y, std::int64_t x) {
        return data_[(z * shape_.h + y) * shape_.w + x];
    }
    const T& operator()(std::int64_t z, std::int64_t y, std::int64_t x) const {
        return data_[(z * shape_.h + y) * shape_.w + x];
    }

    T& operator[](std::int64_t i) { return data_[i]; }
    const T& operator[](std::int64_t i) const { return data_[i]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    bool same_shape(const Grid3& other) const { return shape_ == other.shape_; }

    template <typename U>
    Grid3<U> cast() const {
        Grid3<U> out(shape_);
        for (std::int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool operator==(const Grid3&) const = default;

private:
    static std::size_t check_size(Shape3 s) {
        if (s.d <= 0 || s.h <= 0 || s.w <= 0) {
            throw ShapeError("Grid3: shape dims must be positive, got " + s.str());
        }
        return static_cast<std::size_t>(s.voxels());
    }

    Shape3 shape_{};
    std::vector<T> data_;
};

using Grid3f = Grid3<float>;
using Grid3d = Grid3<double>;
using Grid3u8 = Grid3<std::uint8_t>;

template <typename T>
void require_same_shape(const Grid3<T>& a, const Grid3<T>& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() +
                         " vs " + b.shape().str());
    }
}

template <typename A, typename B>
void require_same_shape2(const Grid3<A>& a, const Grid3<B>& b, const char* what) {
    if (!(a.shape() == b.shape())) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() +
                         " vs " + b.shape().str());
    }
}

template <typename T>
bool all_finite(const Grid3<T>& g) {
    for (const T& v : g) {
        if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
}

} // namespace mtctl

#endif
