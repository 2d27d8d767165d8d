#ifndef MTCTL_LOSSES_HPP
#define MTCTL_LOSSES_HPP

#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mtctl/grid.hpp"
#include "mtctl/transforms.hpp"

namespace mtctl {

struct LossWeights {
    double lambda_dist = 0.3; // distance-map MSE weight
    double lambda_ct = 0.3;   // cross-task consistency weight
    double lambda_g = 0.3;    // uncertainty-guided consistency weight
    double gamma = 0.1;       // adversarial / unsupervised weight
    double beta = 0.5;        // Geman-McClure scale, in [0, 1]
    double epsilon = 1e-5;    // dice smoothing

    void validate() const {
        auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
        if (!nonneg(lambda_dist) || !nonneg(lambda_ct) || !nonneg(lambda_g) || !nonneg(gamma)) {
            throw ContractError("LossWeights: weights must be finite and >= 0");
        }
        if (!(beta >= 0.0 && beta <= 1.0)) throw ContractError("LossWeights: beta must be in [0,1]");
        if (!(epsilon > 0.0)) throw ContractError("LossWeights: epsilon must be > 0");
    }
};

// ---- per-sample losses -----------------------------------------------------

// 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps)
template <typename T>
double dice_loss(const Grid3<T>& pred, const Grid3<T>& gt, double eps = 1e-5) {
    require_same_shape(pred, gt, "dice_loss");
    double inter = 0.0, sp = 0.0, sg = 0.0;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        inter += static_cast<double>(pred[i]) * static_cast<double>(gt[i]);
        sp += pred[i];
        sg += gt[i];
    }
    return 1.0 - (2.0 * inter + eps) / (sp + sg + eps);
}

template <typename T>
Grid3<T> dice_loss_grad(const Grid3<T>& pred, const Grid3<T>& gt, double eps = 1e-5) {
    require_same_shape(pred, gt, "dice_loss_grad");
    double inter = 0.0, sp = 0.0, sg = 0.0;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        inter += static_cast<double>(pred[i]) * static_cast<double>(gt[i]);
        sp += pred[i];
        sg += gt[i];
    }
    const double den = sp + sg + eps;
    const double num = 2.0 * inter + eps;
    // d/dp_i [ -num/den ] = -(2*g_i*den - num) / den^2
    Grid3<T> grad(pred.shape());
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        grad[i] = static_cast<T>(-(2.0 * static_cast<double>(gt[i]) * den - num) / (den * den));
    }
    return grad;
}

template <typename T>
double distance_mse(const Grid3<T>& pred, const Grid3<T>& target) {
    require_same_shape(pred, target, "distance_mse");
    double ss = 0.0;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        const double dlt = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        ss += dlt * dlt;
    }
    return ss / static_cast<double>(pred.size());
}

// Gradient w.r.t. `pred`; w.r.t. `target` it is the negation.
template <typename T>
Grid3<T> distance_mse_grad(const Grid3<T>& pred, const Grid3<T>& target) {
    require_same_shape(pred, target, "distance_mse_grad");
    Grid3<T> grad(pred.shape());
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        grad[i] = static_cast<T>(2.0 * (static_cast<double>(pred[i]) - target[i]) * inv_n);
    }
    return grad;
}

// mean_i (seg_i - sigmoid(k*dist_i))^2, the pixel-vs-geometry consistency term.
template <typename T>
double cross_task_loss(const Grid3<T>& seg, const Grid3<T>& dist, Steepness k) {
    require_same_shape(seg, dist, "cross_task_loss");
    k.validate();
    double ss = 0.0;
    for (std::int64_t i = 0; i < seg.size(); ++i) {
        const double a = std::clamp(-k.k * static_cast<double>(dist[i]), -500.0, 500.0);
        const double q = 1.0 / (1.0 + std::exp(a));
        const double dlt = static_cast<double>(seg[i]) - q;
        ss += dlt * dlt;
    }
    return ss / static_cast<double>(seg.size());
}

template <typename T>
struct FieldPairGrad {
    Grid3<T> seg;
    Grid3<T> dist;
};

template <typename T>
FieldPairGrad<T> cross_task_grads(const Grid3<T>& seg, const Grid3<T>& dist, Steepness k) {
    require_same_shape(seg, dist, "cross_task_grads");
    k.validate();
    FieldPairGrad<T> g{Grid3<T>(seg.shape()), Grid3<T>(seg.shape())};
    const double inv_n = 1.0 / static_cast<double>(seg.size());
    for (std::int64_t i = 0; i < seg.size(); ++i) {
        const double a = std::clamp(-k.k * static_cast<double>(dist[i]), -500.0, 500.0);
        const double q = 1.0 / (1.0 + std::exp(a));
        const double dlt = static_cast<double>(seg[i]) - q;
        g.seg[i] = static_cast<T>(2.0 * dlt * inv_n);
        g.dist[i] = static_cast<T>(-2.0 * dlt * q * (1.0 - q) * k.k * inv_n);
    }
    return g;
}

struct GuidanceResult {
    double value = 0.0;
    double coverage = 0.0;        // fraction of voxels with U < t
    std::int64_t covered = 0;     // zero-coverage batches contribute 0, flagged here
};

// Cross-task penalty restricted to voxels whose uncertainty is below t.
template <typename T>
GuidanceResult guidance_loss(const Grid3<T>& seg, const Grid3<T>& dist, const Grid3d& unc,
                             double t, Steepness k) {
    require_same_shape(seg, dist, "guidance_loss");
    require_same_shape2(seg, unc, "guidance_loss");
    if (!(t > 0.0)) throw ContractError("guidance_loss: threshold t must be > 0");
    k.validate();
    double ss = 0.0;
    std::int64_t covered = 0;
    for (std::int64_t i = 0; i < seg.size(); ++i) {
        if (!(unc[i] < t)) continue;
        const double a = std::clamp(-k.k * static_cast<double>(dist[i]), -500.0, 500.0);
        const double q = 1.0 / (1.0 + std::exp(a));
        const double dlt = static_cast<double>(seg[i]) - q;
        ss += dlt * dlt;
        ++covered;
    }
    GuidanceResult r;
    r.covered = covered;
    r.coverage = static_cast<double>(covered) / static_cast<double>(seg.size());
    r.value = covered == 0 ? 0.0 : ss / static_cast<double>(covered);
    return r;
}

template <typename T>
FieldPairGrad<T> guidance_grads(const Grid3<T>& seg, const Grid3<T>& dist, const Grid3d& unc,
                                double t, Steepness k) {
    require_same_shape(seg, dist, "guidance_grads");
    require_same_shape2(seg, unc, "guidance_grads");
    if (!(t > 0.0)) throw ContractError("guidance_grads: threshold t must be > 0");
    k.validate();
    std::int64_t covered = 0;
    for (std::int64_t i = 0; i < seg.size(); ++i) covered += unc[i] < t;

    FieldPairGrad<T> g{Grid3<T>(seg.shape()), Grid3<T>(seg.shape())};
    if (covered == 0) return g;
    const double inv_n = 1.0 / static_cast<double>(covered);
    for (std::int64_t i = 0; i < seg.size(); ++i) {
        if (!(unc[i] < t)) continue;
        const double a = std::clamp(-k.k * static_cast<double>(dist[i]), -500.0, 500.0);
        const double q = 1.0 / (1.0 + std::exp(a));
        const double dlt = static_cast<double>(seg[i]) - q;
        g.seg[i] = static_cast<T>(2.0 * dlt * inv_n);
        g.dist[i] = static_cast<T>(-2.0 * dlt * q * (1.0 - q) * k.k * inv_n);
    }
    return g;
}

// ---- adversarial terms -----------------------------------------------------

// Geman-McClure robust form r/(2*beta + r), r = s_l^2 + (s_ul - 1)^2.
// As printed this drives D toward 0 on labeled pairs and 1 on unlabeled ones.
inline double adv_gm_loss(double score_l, double score_ul, double beta) {
    const double r = score_l * score_l + (score_ul - 1.0) * (score_ul - 1.0);
    return r / (2.0 * beta + r);
}

// (d/d score_l, d/d score_ul)
inline std::pair<double, double> adv_gm_grads(double score_l, double score_ul, double beta) {
    const double r = score_l * score_l + (score_ul - 1.0) * (score_ul - 1.0);
    const double den = 2.0 * beta + r;
    const double dr = 2.0 * beta / (den * den); // d/dr of r/(2b+r)
    return {dr * 2.0 * score_l, dr * 2.0 * (score_ul - 1.0)};
}

// Least-squares complement: labeled distance maps are the "real" class.
inline double discriminator_loss(double score_l, double score_ul) {
    return (score_l - 1.0) * (score_l - 1.0) + score_ul * score_ul;
}

inline std::pair<double, double> discriminator_loss_grads(double score_l, double score_ul) {
    return {2.0 * (score_l - 1.0), 2.0 * score_ul};
}

// ---- composite objective ---------------------------------------------------

// One sample's fields as seen by the composite objective. Label fields are
// null for unlabeled samples; `uncertainty` is required when lambda_g > 0.
template <typename T>
struct SampleTerms {
    const Grid3<T>* seg = nullptr;
    const Grid3<T>* dist = nullptr;
    const Grid3<T>* mask = nullptr;
    const Grid3<T>* sdm = nullptr;
    const Grid3d* uncertainty = nullptr;

    bool labeled() const { return mask != nullptr; }
};

struct LossBreakdown {
    double dice = 0.0;
    double dist_mse = 0.0;
    double cross_task = 0.0;
    double guidance = 0.0;
    double adv_gm = 0.0;
    double total = 0.0;
    double guidance_coverage = 0.0;
    double score_labeled = 0.0;
    double score_unlabeled = 0.0;
};

// Weighted composite: dice + lambda_dist*mse over labeled samples,
// lambda_ct*cross-task + lambda_g*guidance over all samples, and
// gamma * mean_i adv_gm(score_l, score_ul_i) when scores are present.
// Per-term values are batch means; `weights.gamma` is the effective
// (already ramped) adversarial weight.
template <typename T>
LossBreakdown total_loss(std::span<const SampleTerms<T>> batch, const LossWeights& weights,
                         double t, Steepness k, std::optional<double> score_l = std::nullopt,
                         std::span<const double> scores_ul = {}) {
    weights.validate();
    std::size_t n_labeled = 0;
    for (const auto& s : batch) {
        if (s.seg == nullptr || s.dist == nullptr) {
            throw ContractError("total_loss: every sample needs seg and dist fields");
        }
        if (s.labeled()) {
            if (s.sdm == nullptr) {
                throw ContractError("total_loss: labeled sample missing distance-map target");
            }
            ++n_labeled;
        }
        if (weights.lambda_g > 0.0 && s.uncertainty == nullptr) {
            throw ContractError("total_loss: guidance term requires uncertainty maps");
        }
    }
    if (n_labeled == 0) {
        throw ContractError("total_loss: supervised terms require at least one labeled sample");
    }

    LossBreakdown out;
    for (const auto& s : batch) {
        if (s.labeled()) {
            out.dice += dice_loss(*s.seg, *s.mask, weights.epsilon);
            out.dist_mse += distance_mse(*s.dist, *s.sdm);
        }
        out.cross_task += cross_task_loss(*s.seg, *s.dist, k);
        if (weights.lambda_g > 0.0) {
            const auto g = guidance_loss(*s.seg, *s.dist, *s.uncertainty, t, k);
            out.guidance += g.value;
            out.guidance_coverage += g.coverage;
        }
    }
    const auto nl = static_cast<double>(n_labeled);
    const auto nb = static_cast<double>(batch.size());
    out.dice /= nl;
    out.dist_mse /= nl;
    out.cross_task /= nb;
    out.guidance /= nb;
    out.guidance_coverage /= nb;

    if (score_l.has_value() && !scores_ul.empty()) {
        out.score_labeled = *score_l;
        double sum = 0.0, ssum = 0.0;
        for (double su : scores_ul) {
            sum += adv_gm_loss(*score_l, su, weights.beta);
            ssum += su;
        }
        out.adv_gm = sum / static_cast<double>(scores_ul.size());
        out.score_unlabeled = ssum / static_cast<double>(scores_ul.size());
    }

    out.total = out.dice + weights.lambda_dist * out.dist_mse +
                weights.lambda_ct * out.cross_task + weights.lambda_g * out.guidance +
                weights.gamma * out.adv_gm;
    return out;
}

} // namespace mtctl

#endif
