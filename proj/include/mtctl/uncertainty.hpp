#ifndef MTCTL_UNCERTAINTY_HPP
#define MTCTL_UNCERTAINTY_HPP

#include <vector>

#include "mtctl/network.hpp"
#include "mtctl/volume.hpp"

namespace mtctl {

// Per-voxel predictive entropy of the mean MC probability, in [0, ln 2].
struct UncertaintyMap {
    Grid3d data;
    int n_samples = 0;
};

struct McConfig {
    int n_samples = 8;
    double t_fraction = 1.0; // threshold as a fraction of ln 2
    std::uint64_t seed = 0;

    void validate() const {
        if (n_samples < 2) throw ContractError("McConfig: n_samples must be >= 2");
        if (!(t_fraction > 0.0 && t_fraction <= 1.0)) {
            throw ContractError("McConfig: t_fraction must be in (0, 1]");
        }
    }
};

// N stochastic forward passes with dropout active. Each pass draws its
// dropout masks from an independent child stream keyed by the pass index,
// so the sample set is reproducible regardless of evaluation order.
template <typename T>
std::vector<Grid3<T>> mc_sample(MultiTaskNet<T>& model, const Grid3<T>& x, const McConfig& cfg) {
    cfg.validate();
    if (model.config().dropout_rate <= 0.0) {
        throw UselessSamplingError("mc_sample: dropout_rate is 0, all samples would be equal");
    }
    std::vector<Grid3<T>> samples;
    samples.reserve(static_cast<std::size_t>(cfg.n_samples));
    const Rng base(cfg.seed);
    for (int i = 0; i < cfg.n_samples; ++i) {
        Rng pass_rng = base.child(static_cast<std::uint64_t>(i) + 1);
        samples.push_back(model.forward_seg(x, Mode::Mc, &pass_rng));
    }
    return samples;
}

// U = -[p ln p + (1-p) ln(1-p)] of the mean probability, with 0*ln(0) := 0.
template <typename T>
UncertaintyMap entropy_map(const std::vector<Grid3<T>>& samples) {
    if (samples.size() < 2) throw ContractError("entropy_map: need at least 2 samples");
    for (const auto& s : samples) require_same_shape(samples.front(), s, "entropy_map");

    const auto n = static_cast<double>(samples.size());
    UncertaintyMap u{Grid3d(samples.front().shape()), static_cast<int>(samples.size())};
    for (std::int64_t i = 0; i < u.data.size(); ++i) {
        double mean = 0.0;
        for (const auto& s : samples) mean += static_cast<double>(s[i]);
        mean /= n;
        double ent = 0.0;
        if (mean > 0.0) ent -= mean * std::log(mean);
        if (mean < 1.0) ent -= (1.0 - mean) * std::log(1.0 - mean);
        u.data[i] = ent;
    }
    return u;
}

// 1 where U < t, else 0.
BinaryMask certainty_mask(const UncertaintyMap& u, double t);

} // namespace mtctl

#endif
