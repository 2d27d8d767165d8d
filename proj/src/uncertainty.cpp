#include "mtctl/uncertainty.hpp"

namespace mtctl {

BinaryMask certainty_mask(const UncertaintyMap& u, double t) {
    if (!(t > 0.0)) throw ContractError("certainty_mask: threshold t must be > 0");
    BinaryMask out{Grid3u8(u.data.shape())};
    for (std::int64_t i = 0; i < u.data.size(); ++i) {
        out.data[i] = u.data[i] < t ? 1 : 0;
    }
    return out;
}

} // namespace mtctl
