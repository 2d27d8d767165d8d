#ifndef MTCTL_RNG_HPP
#define MTCTL_RNG_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtctl {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seeded generator with fully specified draw algorithms. The standard
// library distributions are implementation-defined, so every draw here is
// built directly on the (bit-exact) mt19937_64 output stream; traces are
// reproducible across compilers and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed)
        : eng_(splitmix64(seed)), seed_base_(seed) {}

    // Independent child stream; identical (seed, tag) pairs give identical streams.
    Rng child(std::uint64_t tag) const {
        return Rng(splitmix64(seed_base_ ^ splitmix64(tag ^ 0xa5a5a5a5a5a5a5a5ULL)));
    }

    double uniform() { // [0, 1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method; consumes a variable number of draws.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Uniform integer in [0, n); n > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_int(i)]);
        }
    }

    std::string save_state() const {
        std::ostringstream os;
        os << eng_ << ' ' << (have_spare_ ? 1 : 0) << ' '
           << std::bit_cast<std::uint64_t>(spare_) << ' ' << seed_base_;
        return os.str();
    }

    void load_state(const std::string& s) {
        std::istringstream is(s);
        int flag = 0;
        std::uint64_t spare_bits = 0;
        is >> eng_ >> flag >> spare_bits >> seed_base_;
        if (!is) throw std::invalid_argument("Rng::load_state: malformed state string");
        spare_ = std::bit_cast<double>(spare_bits);
        have_spare_ = (flag != 0);
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
    std::uint64_t seed_base_ = 0;
};

} // namespace mtctl

#endif
