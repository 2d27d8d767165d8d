#ifndef MTCTL_NETWORK_HPP
#define MTCTL_NETWORK_HPP

#include <memory>
#include <string>
#include <vector>

#include "mtctl/net_layers.hpp"

namespace mtctl {

struct NetConfig {
    Shape3 in_shape{80, 112, 112};
    std::int64_t base_channels = 16; // desk-scale tests use 4
    std::int64_t depth = 4;          // encoder downsampling stages; desk-scale 2
    double dropout_rate = 0.5;       // at the bottleneck and decoder heads
    std::uint64_t seed = 0;

    void validate() const {
        if (base_channels < 1) throw ContractError("NetConfig: base_channels must be >= 1");
        if (depth < 1) throw ContractError("NetConfig: depth must be >= 1");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
            throw ContractError("NetConfig: dropout_rate must be in [0, 1)");
        }
        const std::int64_t div = std::int64_t{1} << depth;
        for (std::int64_t dim : {in_shape.d, in_shape.h, in_shape.w}) {
            if (dim < 4) throw ShapeError("NetConfig: in_shape dims must be >= 4");
            if (dim % div != 0) {
                throw ShapeError("NetConfig: in_shape " + in_shape.str() +
                                 " not divisible by 2^depth = " + std::to_string(div));
            }
        }
    }

    std::int64_t channels_at(std::int64_t level) const { return base_channels << level; }
};

template <typename T>
struct ModelOutputs {
    Grid3<T> seg;  // foreground probability, in (0, 1)
    Grid3<T> dist; // predicted signed distance field, in (-1, 1)
};

namespace blocks {

// conv -> instance norm -> relu
template <typename T>
struct ConvBlock {
    Conv3d<T> conv;
    InstanceNorm3d<T> norm;
    ReLU<T> act;

    ConvBlock() = default;
    ConvBlock(const std::string& name, std::int64_t in_ch, std::int64_t out_ch,
              std::int64_t k, std::int64_t stride, std::int64_t pad)
        : conv(name + ".conv", in_ch, out_ch, k, stride, pad),
          norm(name + ".norm", out_ch) {}

    Tensor4<T> forward(const Tensor4<T>& x) { return act.forward(norm.forward(conv.forward(x))); }
    Tensor4<T> backward(const Tensor4<T>& gy) {
        return conv.backward(norm.backward(act.backward(gy)));
    }
    void init(Rng& rng) { conv.init_kaiming(rng); }
    void collect_params(std::vector<Param<T>*>& out) {
        conv.collect_params(out);
        norm.collect_params(out);
    }
};

// y = relu(norm2(conv2(convblock(x))) + x)
template <typename T>
struct ResBlock {
    ConvBlock<T> a;
    Conv3d<T> conv2;
    InstanceNorm3d<T> norm2;
    ReLU<T> out_act;

    ResBlock() = default;
    ResBlock(const std::string& name, std::int64_t ch)
        : a(name + ".a", ch, ch, 3, 1, 1),
          conv2(name + ".b.conv", ch, ch, 3, 1, 1),
          norm2(name + ".b.norm", ch) {}

    Tensor4<T> forward(const Tensor4<T>& x) {
        Tensor4<T> h = norm2.forward(conv2.forward(a.forward(x)));
        for (std::size_t i = 0; i < h.v.size(); ++i) h.v[i] += x.v[i];
        return out_act.forward(h);
    }

    Tensor4<T> backward(const Tensor4<T>& gy) {
        const Tensor4<T> g = out_act.backward(gy);
        Tensor4<T> gx = a.backward(conv2.backward(norm2.backward(g)));
        for (std::size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += g.v[i];
        return gx;
    }

    void init(Rng& rng) {
        a.init(rng);
        conv2.init_kaiming(rng);
    }
    void collect_params(std::vector<Param<T>*>& out) {
        a.collect_params(out);
        conv2.collect_params(out);
        norm2.collect_params(out);
    }
};

// transposed conv (2x upsample) -> instance norm -> relu
template <typename T>
struct UpBlock {
    ConvTranspose3d<T> up;
    InstanceNorm3d<T> norm;
    ReLU<T> act;

    UpBlock() = default;
    UpBlock(const std::string& name, std::int64_t in_ch, std::int64_t out_ch)
        : up(name + ".up", in_ch, out_ch), norm(name + ".norm", out_ch) {}

    Tensor4<T> forward(const Tensor4<T>& x) { return act.forward(norm.forward(up.forward(x))); }
    Tensor4<T> backward(const Tensor4<T>& gy) {
        return up.backward(norm.backward(act.backward(gy)));
    }
    void init(Rng& rng) { up.init_kaiming(rng); }
    void collect_params(std::vector<Param<T>*>& out) {
        up.collect_params(out);
        norm.collect_params(out);
    }
};

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
    Tensor4<T> out(a.c + b.c, a.d, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

template <typename T>
void split_channels(const Tensor4<T>& cat, std::int64_t first_c, Tensor4<T>& a, Tensor4<T>& b) {
    a = Tensor4<T>(first_c, cat.d, cat.h, cat.w);
    b = Tensor4<T>(cat.c - first_c, cat.d, cat.h, cat.w);
    std::copy(cat.v.begin(), cat.v.begin() + a.v.size(), a.v.begin());
    std::copy(cat.v.begin() + a.v.size(), cat.v.end(), b.v.begin());
}

} // namespace blocks

enum class HeadKind { Segmentation, Distance };

// Shared V-Net-style encoder with two mirrored decoders: a sigmoid
// segmentation head and a tanh distance head. Dropout sits at the bottleneck
// and before each head; uncertainty comes from stochastic (Mc) passes of the
// segmentation head rather than a separate parametric decoder.
template <typename T>
class MultiTaskNet {
public:
    explicit MultiTaskNet(const NetConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        stem_ = blocks::ConvBlock<T>("stem", 1, cfg_.channels_at(0), 3, 1, 1);
        for (std::int64_t s = 0; s < cfg_.depth; ++s) {
            enc_.emplace_back("enc" + std::to_string(s), cfg_.channels_at(s));
            down_.emplace_back("down" + std::to_string(s), cfg_.channels_at(s),
                               cfg_.channels_at(s + 1), 2, 2, 0);
        }
        bottleneck_ = blocks::ResBlock<T>("bottleneck", cfg_.channels_at(cfg_.depth));
        bottleneck_dropout_ = Dropout<T>(cfg_.dropout_rate);
        seg_dec_ = Decoder("seg", cfg_);
        dist_dec_ = Decoder("dist", cfg_);
        init_params();
    }

    const NetConfig& config() const { return cfg_; }

    // Seeded deterministic initialization; task heads start at zero so the
    // initial outputs are exactly sigmoid(0) = 0.5 and tanh(0) = 0.
    void init_params() {
        Rng rng = Rng(cfg_.seed).child(0x1817);
        stem_.init(rng);
        for (std::int64_t s = 0; s < cfg_.depth; ++s) {
            enc_[static_cast<std::size_t>(s)].init(rng);
            down_[static_cast<std::size_t>(s)].init(rng);
        }
        bottleneck_.init(rng);
        seg_dec_.init(rng);
        dist_dec_.init(rng);
    }

    ModelOutputs<T> forward(const Grid3<T>& x, Mode mode, Rng* dropout_rng = nullptr) {
        run_forward(x, mode, dropout_rng, /*need_dist=*/true);
        return {to_grid(seg_out_), to_grid(dist_out_)};
    }

    // Segmentation head only; used by MC sampling where the distance head
    // output would be discarded.
    Grid3<T> forward_seg(const Grid3<T>& x, Mode mode, Rng* dropout_rng = nullptr) {
        run_forward(x, mode, dropout_rng, /*need_dist=*/false);
        return to_grid(seg_out_);
    }

    // Accumulates parameter gradients for the forward() that preceded it.
    void backward(const Grid3<T>& g_seg, const Grid3<T>& g_dist) {
        Tensor4<T> gs(1, g_seg.shape().d, g_seg.shape().h, g_seg.shape().w);
        Tensor4<T> gd(1, g_dist.shape().d, g_dist.shape().h, g_dist.shape().w);
        // chain through the output activations
        for (std::int64_t i = 0; i < g_seg.size(); ++i) {
            const double s = seg_out_.v[static_cast<std::size_t>(i)];
            gs.v[static_cast<std::size_t>(i)] = static_cast<T>(g_seg[i] * s * (1.0 - s));
            const double td = dist_out_.v[static_cast<std::size_t>(i)];
            gd.v[static_cast<std::size_t>(i)] = static_cast<T>(g_dist[i] * (1.0 - td * td));
        }

        std::vector<Tensor4<T>> g_skips(static_cast<std::size_t>(cfg_.depth));
        Tensor4<T> g_bott = seg_dec_.backward(gs, g_skips);
        {
            std::vector<Tensor4<T>> g_skips2(static_cast<std::size_t>(cfg_.depth));
            const Tensor4<T> g_bott2 = dist_dec_.backward(gd, g_skips2);
            for (std::size_t i = 0; i < g_bott.v.size(); ++i) g_bott.v[i] += g_bott2.v[i];
            for (std::int64_t s = 0; s < cfg_.depth; ++s) {
                auto& acc = g_skips[static_cast<std::size_t>(s)];
                const auto& add = g_skips2[static_cast<std::size_t>(s)];
                for (std::size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += add.v[i];
            }
        }

        Tensor4<T> g = bottleneck_.backward(bottleneck_dropout_.backward(g_bott));
        for (std::int64_t s = cfg_.depth - 1; s >= 0; --s) {
            Tensor4<T> g_stage = down_[static_cast<std::size_t>(s)].backward(g);
            const auto& g_skip = g_skips[static_cast<std::size_t>(s)];
            for (std::size_t i = 0; i < g_stage.v.size(); ++i) g_stage.v[i] += g_skip.v[i];
            g = enc_[static_cast<std::size_t>(s)].backward(g_stage);
        }
        stem_.backward(g);
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        stem_.collect_params(out);
        for (std::int64_t s = 0; s < cfg_.depth; ++s) {
            enc_[static_cast<std::size_t>(s)].collect_params(out);
            down_[static_cast<std::size_t>(s)].collect_params(out);
        }
        bottleneck_.collect_params(out);
        seg_dec_.collect_params(out);
        dist_dec_.collect_params(out);
        return out;
    }

    std::int64_t parameter_count() {
        std::int64_t n = 0;
        for (const auto* p : params()) n += p->numel();
        return n;
    }

    void zero_grad() {
        for (auto* p : params()) p->zero_grad();
    }

private:
    struct Decoder {
        std::vector<blocks::UpBlock<T>> up;      // level depth-1 .. 0, stored by level index
        std::vector<blocks::ConvBlock<T>> merge; // concat(up, skip) -> C_s
        std::vector<blocks::ResBlock<T>> res;
        Dropout<T> head_dropout;
        Conv3d<T> head; // 1x1x1 to a single channel, zero-initialized
        std::int64_t depth = 0;

        Decoder() = default;
        Decoder(const std::string& name, const NetConfig& cfg) : depth(cfg.depth) {
            for (std::int64_t s = 0; s < depth; ++s) {
                const std::string lvl = name + std::to_string(s);
                up.emplace_back(lvl + ".upblk", cfg.channels_at(s + 1), cfg.channels_at(s));
                merge.emplace_back(lvl + ".merge", 2 * cfg.channels_at(s), cfg.channels_at(s),
                                   3, 1, 1);
                res.emplace_back(lvl + ".res", cfg.channels_at(s));
            }
            head_dropout = Dropout<T>(cfg.dropout_rate);
            head = Conv3d<T>(name + ".head", cfg.channels_at(0), 1, 1, 1, 0);
        }

        Tensor4<T> forward(const Tensor4<T>& bottleneck, const std::vector<Tensor4<T>>& skips,
                           Mode mode, Rng* rng) {
            Tensor4<T> y = bottleneck;
            for (std::int64_t s = depth - 1; s >= 0; --s) {
                const auto si = static_cast<std::size_t>(s);
                y = up[si].forward(y);
                y = merge[si].forward(blocks::concat_channels(y, skips[si]));
                y = res[si].forward(y);
            }
            y = head_dropout.forward(y, mode, rng);
            return head.forward(y);
        }

        Tensor4<T> backward(const Tensor4<T>& g_out, std::vector<Tensor4<T>>& g_skips) {
            Tensor4<T> g = head_dropout.backward(head.backward(g_out));
            for (std::int64_t s = 0; s < depth; ++s) {
                const auto si = static_cast<std::size_t>(s);
                g = res[si].backward(g);
                const Tensor4<T> g_cat = merge[si].backward(g);
                Tensor4<T> g_up;
                blocks::split_channels(g_cat, g_cat.c / 2, g_up, g_skips[si]);
                g = up[si].backward(g_up);
            }
            return g;
        }

        void init(Rng& rng) {
            for (auto& b : up) b.init(rng);
            for (auto& b : merge) b.init(rng);
            for (auto& b : res) b.init(rng);
            head.init_zero();
        }

        void collect_params(std::vector<Param<T>*>& out) {
            for (std::int64_t s = 0; s < depth; ++s) {
                const auto si = static_cast<std::size_t>(s);
                up[si].collect_params(out);
                merge[si].collect_params(out);
                res[si].collect_params(out);
            }
            head.collect_params(out);
        }
    };

    void run_forward(const Grid3<T>& x, Mode mode, Rng* rng, bool need_dist) {
        if (!(x.shape() == cfg_.in_shape)) {
            throw ShapeError("MultiTaskNet: input shape " + x.shape().str() +
                             " does not match configured " + cfg_.in_shape.str());
        }
        Tensor4<T> t = stem_.forward(from_grid(x));
        skips_.resize(static_cast<std::size_t>(cfg_.depth));
        for (std::int64_t s = 0; s < cfg_.depth; ++s) {
            const auto si = static_cast<std::size_t>(s);
            skips_[si] = enc_[si].forward(t);
            t = down_[si].forward(skips_[si]);
        }
        t = bottleneck_dropout_.forward(bottleneck_.forward(t), mode, rng);

        seg_out_ = activate(seg_dec_.forward(t, skips_, mode, rng), /*sigmoid=*/true);
        if (need_dist) {
            dist_out_ = activate(dist_dec_.forward(t, skips_, mode, rng), /*sigmoid=*/false);
            check_finite(dist_out_, "distance head");
        }
        check_finite(seg_out_, "segmentation head");
    }

    static Tensor4<T> activate(const Tensor4<T>& pre, bool sigmoid) {
        Tensor4<T> out(pre.c, pre.d, pre.h, pre.w);
        for (std::size_t i = 0; i < pre.v.size(); ++i) {
            const double a = pre.v[i];
            out.v[i] = sigmoid ? static_cast<T>(1.0 / (1.0 + std::exp(-a)))
                               : static_cast<T>(std::tanh(a));
        }
        return out;
    }

    static void check_finite(const Tensor4<T>& t, const char* what) {
        for (const T v : t.v) {
            if (!std::isfinite(static_cast<double>(v))) {
                throw NumericsError(std::string("MultiTaskNet: non-finite activation in ") + what);
            }
        }
    }

    NetConfig cfg_;
    blocks::ConvBlock<T> stem_;
    std::vector<blocks::ResBlock<T>> enc_;
    std::vector<blocks::ConvBlock<T>> down_;
    blocks::ResBlock<T> bottleneck_;
    Dropout<T> bottleneck_dropout_;
    Decoder seg_dec_, dist_dec_;

    std::vector<Tensor4<T>> skips_;
    Tensor4<T> seg_out_, dist_out_;
};

// Small convolutional classifier over (volume, distance-field) pairs:
// four stride-2 convs with leaky ReLU, global average pooling, linear score.
// The final linear layer is zero-initialized, so a fresh discriminator
// scores 0 everywhere.
template <typename T>
class Discriminator {
public:
    explicit Discriminator(std::uint64_t seed = 0, std::int64_t base_channels = 8)
        : feat_ch_(base_channels * 8),
          fc_w_("disc.fc.weight", {base_channels * 8}), fc_b_("disc.fc.bias", {1}) {
        std::int64_t in_c = 2;
        for (int i = 0; i < 4; ++i) {
            const std::int64_t out_c = base_channels << i;
            convs_.emplace_back("disc" + std::to_string(i), in_c, out_c, 3, 2, 1);
            acts_.emplace_back(0.2);
            in_c = out_c;
        }
        Rng rng = Rng(seed).child(0xd15c);
        for (auto& c : convs_) c.init_kaiming(rng);
    }

    double forward(const Grid3<T>& volume, const Grid3<T>& dist) {
        require_same_shape(volume, dist, "Discriminator");
        Tensor4<T> t(2, volume.shape().d, volume.shape().h, volume.shape().w);
        std::copy(volume.begin(), volume.end(), t.v.begin());
        std::copy(dist.begin(), dist.end(), t.v.begin() + volume.size());
        for (std::size_t i = 0; i < convs_.size(); ++i) {
            t = acts_[i].forward(convs_[i].forward(t));
        }
        gap_spatial_ = t.spatial_size();
        feat_.assign(static_cast<std::size_t>(feat_ch_), T{});
        for (std::int64_t c = 0; c < feat_ch_; ++c) {
            double s = 0.0;
            const T* ch = t.channel(c);
            for (std::int64_t i = 0; i < gap_spatial_; ++i) s += ch[i];
            feat_[static_cast<std::size_t>(c)] =
                static_cast<T>(s / static_cast<double>(gap_spatial_));
        }
        double score = fc_b_.value[0];
        for (std::int64_t c = 0; c < feat_ch_; ++c) {
            score += static_cast<double>(fc_w_.value[static_cast<std::size_t>(c)]) *
                     feat_[static_cast<std::size_t>(c)];
        }
        last_dims_ = {t.d, t.h, t.w};
        if (!std::isfinite(score)) throw NumericsError("Discriminator: non-finite score");
        return score;
    }

    // Returns the gradient w.r.t. the distance-field input (the generated
    // channel); the volume channel's gradient is discarded.
    Grid3<T> backward(double g_score, bool accumulate_params = true) {
        if (accumulate_params) {
            for (std::int64_t c = 0; c < feat_ch_; ++c) {
                fc_w_.grad[static_cast<std::size_t>(c)] +=
                    static_cast<T>(g_score * feat_[static_cast<std::size_t>(c)]);
            }
            fc_b_.grad[0] += static_cast<T>(g_score);
        }
        Tensor4<T> g(feat_ch_, last_dims_[0], last_dims_[1], last_dims_[2]);
        const double inv = 1.0 / static_cast<double>(gap_spatial_);
        for (std::int64_t c = 0; c < feat_ch_; ++c) {
            const T gv = static_cast<T>(
                g_score * static_cast<double>(fc_w_.value[static_cast<std::size_t>(c)]) * inv);
            T* ch = g.channel(c);
            std::fill(ch, ch + gap_spatial_, gv);
        }
        for (std::size_t i = convs_.size(); i-- > 0;) {
            g = convs_[i].backward(acts_[i].backward(g), accumulate_params);
        }
        Grid3<T> g_dist(Shape3{g.d, g.h, g.w});
        std::copy(g.v.begin() + g.spatial_size(), g.v.end(), g_dist.begin());
        return g_dist;
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        for (auto& c : convs_) c.collect_params(out);
        out.push_back(&fc_w_);
        out.push_back(&fc_b_);
        return out;
    }

    void zero_grad() {
        for (auto* p : params()) p->zero_grad();
    }

private:
    std::int64_t feat_ch_;
    std::vector<Conv3d<T>> convs_;
    std::vector<LeakyReLU<T>> acts_;
    Param<T> fc_w_;
    Param<T> fc_b_;
    std::vector<T> feat_;
    std::int64_t gap_spatial_ = 0;
    std::array<std::int64_t, 3> last_dims_{};
};

} // namespace mtctl

#endif
