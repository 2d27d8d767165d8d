#ifndef MTCTL_NET_LAYERS_HPP
#define MTCTL_NET_LAYERS_HPP

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "mtctl/grid.hpp"
#include "mtctl/rng.hpp"

namespace mtctl {

enum class Mode { Train, Eval, Mc };

inline bool dropout_active(Mode m) { return m != Mode::Eval; }

// (C, D, H, W) feature map for one sample, w fastest in memory.
template <typename T>
struct Tensor4 {
    std::int64_t c = 0, d = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor4() = default;
    Tensor4(std::int64_t c_, std::int64_t d_, std::int64_t h_, std::int64_t w_)
        : c(c_), d(d_), h(h_), w(w_), v(static_cast<std::size_t>(c_ * d_ * h_ * w_)) {}

    std::int64_t size() const { return c * d * h * w; }
    std::int64_t spatial_size() const { return d * h * w; }

    T& at(std::int64_t ci, std::int64_t z, std::int64_t y, std::int64_t x) {
        return v[static_cast<std::size_t>(((ci * d + z) * h + y) * w + x)];
    }
    const T& at(std::int64_t ci, std::int64_t z, std::int64_t y, std::int64_t x) const {
        return v[static_cast<std::size_t>(((ci * d + z) * h + y) * w + x)];
    }

    T* channel(std::int64_t ci) { return v.data() + ci * spatial_size(); }
    const T* channel(std::int64_t ci) const { return v.data() + ci * spatial_size(); }

    bool same_dims(const Tensor4& o) const {
        return c == o.c && d == o.d && h == o.h && w == o.w;
    }
};

template <typename T>
Tensor4<T> from_grid(const Grid3<T>& g) {
    Tensor4<T> t(1, g.shape().d, g.shape().h, g.shape().w);
    std::copy(g.begin(), g.end(), t.v.begin());
    return t;
}

template <typename T>
Grid3<T> to_grid(const Tensor4<T>& t) {
    if (t.c != 1) throw ShapeError("to_grid: expected single-channel tensor");
    Grid3<T> g(Shape3{t.d, t.h, t.w});
    std::copy(t.v.begin(), t.v.end(), g.begin());
    return g;
}

template <typename T>
struct Param {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<T> value;
    std::vector<T> grad;

    Param() = default;
    Param(std::string n, std::vector<std::int64_t> s) : name(std::move(n)), shape(std::move(s)) {
        std::int64_t n_elems = 1;
        for (auto dim : shape) n_elems *= dim;
        value.assign(static_cast<std::size_t>(n_elems), T{});
        grad.assign(static_cast<std::size_t>(n_elems), T{});
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(value.size()); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T{}); }
};

namespace detail {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

} // namespace detail

// General dense 3D convolution (cubic kernel, uniform stride/pad), backed by
// im2col + GEMM. Stores its input; backward() must follow the forward() it
// differentiates.
template <typename T>
class Conv3d {
public:
    Conv3d() = default;
    Conv3d(std::string name, std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel,
           std::int64_t stride, std::int64_t pad)
        : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad),
          weight_(name + ".weight", {out_ch, in_ch, kernel, kernel, kernel}),
          bias_(name + ".bias", {out_ch}) {}

    void init_kaiming(Rng& rng) {
        const double fan_in = static_cast<double>(in_ch_ * k_ * k_ * k_);
        const double std_dev = std::sqrt(2.0 / fan_in);
        for (auto& w : weight_.value) w = static_cast<T>(rng.normal(0.0, std_dev));
        std::fill(bias_.value.begin(), bias_.value.end(), T{});
    }

    void init_zero() {
        std::fill(weight_.value.begin(), weight_.value.end(), T{});
        std::fill(bias_.value.begin(), bias_.value.end(), T{});
    }

    std::int64_t out_dim(std::int64_t n) const { return (n + 2 * pad_ - k_) / stride_ + 1; }

    Tensor4<T> forward(const Tensor4<T>& x) {
        if (x.c != in_ch_) {
            throw ShapeError(weight_.name + ": expected " + std::to_string(in_ch_) +
                             " input channels, got " + std::to_string(x.c));
        }
        const std::int64_t od = out_dim(x.d), oh = out_dim(x.h), ow = out_dim(x.w);
        if (od < 1 || oh < 1 || ow < 1) {
            throw ShapeError(weight_.name + ": input too small for kernel/stride");
        }
        input_ = x;
        Tensor4<T> out(out_ch_, od, oh, ow);
        const std::int64_t n_cols = out.spatial_size();
        const std::int64_t k_rows = in_ch_ * k_ * k_ * k_;
        im2col(x, od, oh, ow);

        detail::ConstMatMap<T> w_mat(weight_.value.data(), out_ch_, k_rows);
        detail::ConstMatMap<T> col_mat(col_.data(), k_rows, n_cols);
        detail::MatMap<T> out_mat(out.v.data(), out_ch_, n_cols);
        gemm_cols(out_mat, w_mat, col_mat);
        for (std::int64_t co = 0; co < out_ch_; ++co) {
            out_mat.row(co).array() += bias_.value[static_cast<std::size_t>(co)];
        }
        return out;
    }

    Tensor4<T> backward(const Tensor4<T>& gy, bool accumulate_params = true) {
        const std::int64_t n_cols = gy.spatial_size();
        const std::int64_t k_rows = in_ch_ * k_ * k_ * k_;
        im2col(input_, gy.d, gy.h, gy.w);

        detail::ConstMatMap<T> gy_mat(gy.v.data(), out_ch_, n_cols);
        if (accumulate_params) {
            detail::ConstMatMap<T> col_mat(col_.data(), k_rows, n_cols);
            detail::MatMap<T> gw_mat(weight_.grad.data(), out_ch_, k_rows);
            gemm_accumulate_cols(gw_mat, gy_mat, col_mat);
            for (std::int64_t co = 0; co < out_ch_; ++co) {
                bias_.grad[static_cast<std::size_t>(co)] += gy_mat.row(co).sum();
            }
        }

        dcol_.assign(static_cast<std::size_t>(k_rows * n_cols), T{});
        detail::ConstMatMap<T> w_mat(weight_.value.data(), out_ch_, k_rows);
        detail::MatMap<T> dcol_mat(dcol_.data(), k_rows, n_cols);
        gemm_cols_tA(dcol_mat, w_mat, gy_mat);

        Tensor4<T> gx(in_ch_, input_.d, input_.h, input_.w);
        col2im(gx, gy.d, gy.h, gy.w);
        return gx;
    }

    void collect_params(std::vector<Param<T>*>& out) {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    void release_state() {
        input_ = Tensor4<T>{};
        col_.clear();
        col_.shrink_to_fit();
        dcol_.clear();
        dcol_.shrink_to_fit();
    }

private:
    // C = A * B, split over columns of C across threads.
    static void gemm_cols(detail::MatMap<T>& c, const detail::ConstMatMap<T>& a,
                          const detail::ConstMatMap<T>& b) {
#pragma omp parallel for schedule(static)
        for (int chunk = 0; chunk < n_chunks(b.cols()); ++chunk) {
            const auto [lo, len] = chunk_range(b.cols(), chunk);
            c.middleCols(lo, len).noalias() = a * b.middleCols(lo, len);
        }
    }

    // C += A * B over column chunks of B (the K dimension of the weight grad).
    static void gemm_accumulate_cols(detail::MatMap<T>& c, const detail::ConstMatMap<T>& a,
                                     const detail::ConstMatMap<T>& b) {
#pragma omp parallel for schedule(static)
        for (int chunk = 0; chunk < n_chunks(b.rows()); ++chunk) {
            const auto [lo, len] = chunk_range(b.rows(), chunk);
            c.middleCols(lo, len).noalias() += a * b.transpose().middleCols(lo, len);
        }
    }

    // C = A^T * B, split over columns.
    static void gemm_cols_tA(detail::MatMap<T>& c, const detail::ConstMatMap<T>& a,
                             const detail::ConstMatMap<T>& b) {
#pragma omp parallel for schedule(static)
        for (int chunk = 0; chunk < n_chunks(b.cols()); ++chunk) {
            const auto [lo, len] = chunk_range(b.cols(), chunk);
            c.middleCols(lo, len).noalias() = a.transpose() * b.middleCols(lo, len);
        }
    }

    static int n_chunks(std::int64_t n);
    static std::pair<std::int64_t, std::int64_t> chunk_range(std::int64_t n, int chunk);

    void im2col(const Tensor4<T>& x, std::int64_t od, std::int64_t oh, std::int64_t ow) {
        const std::int64_t k_rows = in_ch_ * k_ * k_ * k_;
        const std::int64_t n_cols = od * oh * ow;
        col_.assign(static_cast<std::size_t>(k_rows * n_cols), T{});
#pragma omp parallel for schedule(static)
        for (std::int64_t r = 0; r < k_rows; ++r) {
            const std::int64_t kx = r % k_;
            const std::int64_t ky = (r / k_) % k_;
            const std::int64_t kz = (r / (k_ * k_)) % k_;
            const std::int64_t ci = r / (k_ * k_ * k_);
            T* dst = col_.data() + r * n_cols;
            const T* src = x.channel(ci);
            for (std::int64_t zo = 0; zo < od; ++zo) {
                const std::int64_t zi = zo * stride_ + kz - pad_;
                for (std::int64_t yo = 0; yo < oh; ++yo) {
                    const std::int64_t yi = yo * stride_ + ky - pad_;
                    T* out_row = dst + (zo * oh + yo) * ow;
                    if (zi < 0 || zi >= x.d || yi < 0 || yi >= x.h) continue; // stays zero
                    const T* in_row = src + (zi * x.h + yi) * x.w;
                    for (std::int64_t xo = 0; xo < ow; ++xo) {
                        const std::int64_t xi = xo * stride_ + kx - pad_;
                        if (xi >= 0 && xi < x.w) out_row[xo] = in_row[xi];
                    }
                }
            }
        }
    }

    void col2im(Tensor4<T>& gx, std::int64_t od, std::int64_t oh, std::int64_t ow) const {
        const std::int64_t n_cols = od * oh * ow;
        const std::int64_t k3 = k_ * k_ * k_;
        // Rows of one input channel overlap each other but not other channels.
#pragma omp parallel for schedule(static)
        for (std::int64_t ci = 0; ci < in_ch_; ++ci) {
            T* dst = gx.channel(ci);
            for (std::int64_t kidx = 0; kidx < k3; ++kidx) {
                const std::int64_t r = ci * k3 + kidx;
                const std::int64_t kx = kidx % k_;
                const std::int64_t ky = (kidx / k_) % k_;
                const std::int64_t kz = kidx / (k_ * k_);
                const T* src = dcol_.data() + r * n_cols;
                for (std::int64_t zo = 0; zo < od; ++zo) {
                    const std::int64_t zi = zo * stride_ + kz - pad_;
                    if (zi < 0 || zi >= gx.d) continue;
                    for (std::int64_t yo = 0; yo < oh; ++yo) {
                        const std::int64_t yi = yo * stride_ + ky - pad_;
                        if (yi < 0 || yi >= gx.h) continue;
                        const T* src_row = src + (zo * oh + yo) * ow;
                        T* dst_row = dst + (zi * gx.h + yi) * gx.w;
                        for (std::int64_t xo = 0; xo < ow; ++xo) {
                            const std::int64_t xi = xo * stride_ + kx - pad_;
                            if (xi >= 0 && xi < gx.w) dst_row[xi] += src_row[xo];
                        }
                    }
                }
            }
        }
    }

    std::int64_t in_ch_ = 0, out_ch_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
    Param<T> weight_;
    Param<T> bias_;
    Tensor4<T> input_;
    std::vector<T> col_;
    std::vector<T> dcol_;
};

int conv_thread_count();

template <typename T>
int Conv3d<T>::n_chunks(std::int64_t n) {
    return static_cast<int>(std::min<std::int64_t>(n, conv_thread_count()));
}

template <typename T>
std::pair<std::int64_t, std::int64_t> Conv3d<T>::chunk_range(std::int64_t n, int chunk) {
    const int chunks = n_chunks(n);
    const std::int64_t base = n / chunks, rem = n % chunks;
    const std::int64_t lo = chunk * base + std::min<std::int64_t>(chunk, rem);
    const std::int64_t len = base + (chunk < rem ? 1 : 0);
    return {lo, len};
}

// Transposed conv with kernel 2, stride 2: each input voxel maps to a
// disjoint 2x2x2 output block (no overlap).
template <typename T>
class ConvTranspose3d {
public:
    ConvTranspose3d() = default;
    ConvTranspose3d(std::string name, std::int64_t in_ch, std::int64_t out_ch)
        : in_ch_(in_ch), out_ch_(out_ch),
          weight_(name + ".weight", {in_ch, out_ch, 2, 2, 2}),
          bias_(name + ".bias", {out_ch}) {}

    void init_kaiming(Rng& rng) {
        const double std_dev = std::sqrt(2.0 / static_cast<double>(in_ch_ * 8));
        for (auto& w : weight_.value) w = static_cast<T>(rng.normal(0.0, std_dev));
        std::fill(bias_.value.begin(), bias_.value.end(), T{});
    }

    Tensor4<T> forward(const Tensor4<T>& x) {
        if (x.c != in_ch_) throw ShapeError(weight_.name + ": channel mismatch");
        input_ = x;
        Tensor4<T> out(out_ch_, x.d * 2, x.h * 2, x.w * 2);
#pragma omp parallel for schedule(static)
        for (std::int64_t co = 0; co < out_ch_; ++co) {
            T* oc = out.channel(co);
            std::fill(oc, oc + out.spatial_size(), bias_.value[static_cast<std::size_t>(co)]);
            for (std::int64_t ci = 0; ci < in_ch_; ++ci) {
                const T* ic = x.channel(ci);
                const T* wk = w_at(ci, co);
                for (std::int64_t z = 0; z < x.d; ++z) {
                    for (std::int64_t y = 0; y < x.h; ++y) {
                        const T* in_row = ic + (z * x.h + y) * x.w;
                        for (std::int64_t a = 0; a < 2; ++a) {
                            for (std::int64_t b = 0; b < 2; ++b) {
                                T* out_row = oc + ((2 * z + a) * out.h + (2 * y + b)) * out.w;
                                const T w0 = wk[a * 4 + b * 2 + 0], w1 = wk[a * 4 + b * 2 + 1];
                                for (std::int64_t x_i = 0; x_i < x.w; ++x_i) {
                                    out_row[2 * x_i] += w0 * in_row[x_i];
                                    out_row[2 * x_i + 1] += w1 * in_row[x_i];
                                }
                            }
                        }
                    }
                }
            }
        }
        return out;
    }

    Tensor4<T> backward(const Tensor4<T>& gy, bool accumulate_params = true) {
        Tensor4<T> gx(in_ch_, input_.d, input_.h, input_.w);
#pragma omp parallel for schedule(static)
        for (std::int64_t ci = 0; ci < in_ch_; ++ci) {
            T* gc = gx.channel(ci);
            for (std::int64_t co = 0; co < out_ch_; ++co) {
                const T* gyc = gy.channel(co);
                const T* wk = w_at(ci, co);
                for (std::int64_t z = 0; z < gx.d; ++z) {
                    for (std::int64_t y = 0; y < gx.h; ++y) {
                        T* g_row = gc + (z * gx.h + y) * gx.w;
                        for (std::int64_t a = 0; a < 2; ++a) {
                            for (std::int64_t b = 0; b < 2; ++b) {
                                const T* gy_row =
                                    gyc + ((2 * z + a) * gy.h + (2 * y + b)) * gy.w;
                                const T w0 = wk[a * 4 + b * 2 + 0], w1 = wk[a * 4 + b * 2 + 1];
                                for (std::int64_t x_i = 0; x_i < gx.w; ++x_i) {
                                    g_row[x_i] += w0 * gy_row[2 * x_i] + w1 * gy_row[2 * x_i + 1];
                                }
                            }
                        }
                    }
                }
            }
        }
        if (accumulate_params) {
            for (std::int64_t ci = 0; ci < in_ch_; ++ci) {
                const T* ic = input_.channel(ci);
                for (std::int64_t co = 0; co < out_ch_; ++co) {
                    const T* gyc = gy.channel(co);
                    T* gw = gw_at(ci, co);
                    for (std::int64_t z = 0; z < input_.d; ++z) {
                        for (std::int64_t y = 0; y < input_.h; ++y) {
                            const T* in_row = ic + (z * input_.h + y) * input_.w;
                            for (std::int64_t a = 0; a < 2; ++a) {
                                for (std::int64_t b = 0; b < 2; ++b) {
                                    const T* gy_row =
                                        gyc + ((2 * z + a) * gy.h + (2 * y + b)) * gy.w;
                                    double s0 = 0.0, s1 = 0.0;
                                    for (std::int64_t x_i = 0; x_i < input_.w; ++x_i) {
                                        s0 += static_cast<double>(in_row[x_i]) * gy_row[2 * x_i];
                                        s1 += static_cast<double>(in_row[x_i]) * gy_row[2 * x_i + 1];
                                    }
                                    gw[a * 4 + b * 2 + 0] += static_cast<T>(s0);
                                    gw[a * 4 + b * 2 + 1] += static_cast<T>(s1);
                                }
                            }
                        }
                    }
                }
            }
            for (std::int64_t co = 0; co < out_ch_; ++co) {
                const T* gyc = gy.channel(co);
                double s = 0.0;
                for (std::int64_t i = 0; i < gy.spatial_size(); ++i) s += gyc[i];
                bias_.grad[static_cast<std::size_t>(co)] += static_cast<T>(s);
            }
        }
        return gx;
    }

    void collect_params(std::vector<Param<T>*>& out) {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

private:
    const T* w_at(std::int64_t ci, std::int64_t co) const {
        return weight_.value.data() + (ci * out_ch_ + co) * 8;
    }
    T* gw_at(std::int64_t ci, std::int64_t co) {
        return weight_.grad.data() + (ci * out_ch_ + co) * 8;
    }

    std::int64_t in_ch_ = 0, out_ch_ = 0;
    Param<T> weight_;
    Param<T> bias_;
    Tensor4<T> input_;
};

// Per-sample, per-channel normalization with affine parameters. Stateless
// across samples, so eval behaves exactly like train.
template <typename T>
class InstanceNorm3d {
public:
    InstanceNorm3d() = default;
    explicit InstanceNorm3d(std::string name, std::int64_t channels)
        : channels_(channels), gamma_(name + ".gamma", {channels}),
          beta_(name + ".beta", {channels}) {
        std::fill(gamma_.value.begin(), gamma_.value.end(), T{1});
    }

    Tensor4<T> forward(const Tensor4<T>& x) {
        if (x.c != channels_) throw ShapeError(gamma_.name + ": channel mismatch");
        const std::int64_t n = x.spatial_size();
        xhat_ = Tensor4<T>(x.c, x.d, x.h, x.w);
        inv_std_.assign(static_cast<std::size_t>(channels_), 0.0);
        Tensor4<T> out(x.c, x.d, x.h, x.w);
        for (std::int64_t ci = 0; ci < channels_; ++ci) {
            const T* in = x.channel(ci);
            double mean = 0.0;
            for (std::int64_t i = 0; i < n; ++i) mean += in[i];
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::int64_t i = 0; i < n; ++i) {
                const double c = in[i] - mean;
                var += c * c;
            }
            var /= static_cast<double>(n);
            const double inv = 1.0 / std::sqrt(var + kEps);
            inv_std_[static_cast<std::size_t>(ci)] = inv;
            const double g = gamma_.value[static_cast<std::size_t>(ci)];
            const double b = beta_.value[static_cast<std::size_t>(ci)];
            T* xh = xhat_.channel(ci);
            T* o = out.channel(ci);
            for (std::int64_t i = 0; i < n; ++i) {
                const double v = (in[i] - mean) * inv;
                xh[i] = static_cast<T>(v);
                o[i] = static_cast<T>(g * v + b);
            }
        }
        return out;
    }

    Tensor4<T> backward(const Tensor4<T>& gy, bool accumulate_params = true) {
        const std::int64_t n = gy.spatial_size();
        Tensor4<T> gx(gy.c, gy.d, gy.h, gy.w);
        for (std::int64_t ci = 0; ci < channels_; ++ci) {
            const T* g = gy.channel(ci);
            const T* xh = xhat_.channel(ci);
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::int64_t i = 0; i < n; ++i) {
                sum_g += g[i];
                sum_gx += static_cast<double>(g[i]) * xh[i];
            }
            if (accumulate_params) {
                gamma_.grad[static_cast<std::size_t>(ci)] += static_cast<T>(sum_gx);
                beta_.grad[static_cast<std::size_t>(ci)] += static_cast<T>(sum_g);
            }
            const double gam = gamma_.value[static_cast<std::size_t>(ci)];
            const double inv = inv_std_[static_cast<std::size_t>(ci)];
            const double scale = gam * inv / static_cast<double>(n);
            T* o = gx.channel(ci);
            for (std::int64_t i = 0; i < n; ++i) {
                o[i] = static_cast<T>(scale * (static_cast<double>(n) * g[i] - sum_g -
                                               static_cast<double>(xh[i]) * sum_gx));
            }
        }
        return gx;
    }

    void collect_params(std::vector<Param<T>*>& out) {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

private:
    static constexpr double kEps = 1e-5;

    std::int64_t channels_ = 0;
    Param<T> gamma_;
    Param<T> beta_;
    Tensor4<T> xhat_;
    std::vector<double> inv_std_;
};

template <typename T>
class ReLU {
public:
    Tensor4<T> forward(const Tensor4<T>& x) {
        mask_.assign(x.v.size(), 0);
        Tensor4<T> out(x.c, x.d, x.h, x.w);
        for (std::size_t i = 0; i < x.v.size(); ++i) {
            const bool pos = x.v[i] > T{};
            mask_[i] = pos;
            out.v[i] = pos ? x.v[i] : T{};
        }
        return out;
    }

    Tensor4<T> backward(const Tensor4<T>& gy) const {
        Tensor4<T> gx(gy.c, gy.d, gy.h, gy.w);
        for (std::size_t i = 0; i < gy.v.size(); ++i) gx.v[i] = mask_[i] ? gy.v[i] : T{};
        return gx;
    }

private:
    std::vector<std::uint8_t> mask_;
};

template <typename T>
class LeakyReLU {
public:
    explicit LeakyReLU(double alpha = 0.2) : alpha_(static_cast<T>(alpha)) {}

    Tensor4<T> forward(const Tensor4<T>& x) {
        mask_.assign(x.v.size(), 0);
        Tensor4<T> out(x.c, x.d, x.h, x.w);
        for (std::size_t i = 0; i < x.v.size(); ++i) {
            const bool pos = x.v[i] > T{};
            mask_[i] = pos;
            out.v[i] = pos ? x.v[i] : alpha_ * x.v[i];
        }
        return out;
    }

    Tensor4<T> backward(const Tensor4<T>& gy) const {
        Tensor4<T> gx(gy.c, gy.d, gy.h, gy.w);
        for (std::size_t i = 0; i < gy.v.size(); ++i) {
            gx.v[i] = mask_[i] ? gy.v[i] : alpha_ * gy.v[i];
        }
        return gx;
    }

private:
    T alpha_;
    std::vector<std::uint8_t> mask_;
};

// Inverted dropout: kept activations are scaled by 1/(1-p) so the expected
// sum is unchanged; identity in Eval mode or when rate is 0.
template <typename T>
class Dropout {
public:
    Dropout() = default;
    explicit Dropout(double rate) : rate_(rate) {}

    Tensor4<T> forward(const Tensor4<T>& x, Mode mode, Rng* rng) {
        if (rate_ <= 0.0 || !dropout_active(mode)) {
            active_ = false;
            return x;
        }
        if (rng == nullptr) throw ContractError("Dropout: active mode requires an RNG");
        active_ = true;
        keep_.assign(x.v.size(), 0);
        const T scale = static_cast<T>(1.0 / (1.0 - rate_));
        Tensor4<T> out(x.c, x.d, x.h, x.w);
        for (std::size_t i = 0; i < x.v.size(); ++i) {
            const bool keep = !rng->bernoulli(rate_);
            keep_[i] = keep;
            out.v[i] = keep ? x.v[i] * scale : T{};
        }
        return out;
    }

    Tensor4<T> backward(const Tensor4<T>& gy) const {
        if (!active_) return gy;
        const T scale = static_cast<T>(1.0 / (1.0 - rate_));
        Tensor4<T> gx(gy.c, gy.d, gy.h, gy.w);
        for (std::size_t i = 0; i < gy.v.size(); ++i) {
            gx.v[i] = keep_[i] ? gy.v[i] * scale : T{};
        }
        return gx;
    }

    double rate() const { return rate_; }

private:
    double rate_ = 0.0;
    bool active_ = false;
    std::vector<std::uint8_t> keep_;
};

} // namespace mtctl

#endif
