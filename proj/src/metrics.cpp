#include "mtctl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "mtctl/rng.hpp"
#include "mtctl/transforms.hpp"

namespace mtctl {

const std::vector<std::string> kMetricNames = {"dice",    "jaccard",   "hd95",  "asd",
                                               "ravd",    "precision", "recall"};

OverlapMetrics overlap_metrics(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_shape(pred.data, gt.data, "overlap_metrics");
    std::int64_t np = 0, ng = 0, ni = 0;
    for (std::int64_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
        np += p;
        ng += g;
        ni += p && g;
    }
    if (np == 0 && ng == 0) return {100.0, 100.0, 100.0, 100.0};

    const auto nu = static_cast<double>(np + ng - ni);
    OverlapMetrics m;
    m.dice = 100.0 * 2.0 * static_cast<double>(ni) / static_cast<double>(np + ng);
    m.jaccard = 100.0 * static_cast<double>(ni) / nu;
    m.precision = np == 0 ? 0.0 : 100.0 * static_cast<double>(ni) / static_cast<double>(np);
    m.recall = ng == 0 ? 0.0 : 100.0 * static_cast<double>(ni) / static_cast<double>(ng);
    return m;
}

namespace {

Grid3u8 boundary_voxels(const BinaryMask& m) {
    const Shape3 s = m.data.shape();
    Grid3u8 b(s);
    for (std::int64_t z = 0; z < s.d; ++z) {
        for (std::int64_t y = 0; y < s.h; ++y) {
            for (std::int64_t x = 0; x < s.w; ++x) {
                if (!m.data(z, y, x)) continue;
                const bool edge =
                    z == 0 || z == s.d - 1 || y == 0 || y == s.h - 1 || x == 0 || x == s.w - 1;
                if (edge || !m.data(z - 1, y, x) || !m.data(z + 1, y, x) ||
                    !m.data(z, y - 1, x) || !m.data(z, y + 1, x) || !m.data(z, y, x - 1) ||
                    !m.data(z, y, x + 1)) {
                    b(z, y, x) = 1;
                }
            }
        }
    }
    return b;
}

void append_nearest_distances(const Grid3u8& from, const Grid3u8& to_sites,
                              const std::array<double, 3>& spacing,
                              std::vector<double>& out) {
    const Grid3d d2 = edt_squared(to_sites, spacing);
    for (std::int64_t i = 0; i < from.size(); ++i) {
        if (from[i]) out.push_back(std::sqrt(d2[i]));
    }
}

} // namespace

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ContractError("percentile: empty sample");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = static_cast<std::size_t>(std::ceil(rank));
    const double frac = rank - std::floor(rank);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

SurfaceDistances surface_distances(const BinaryMask& pred, const BinaryMask& gt,
                                   const std::array<double, 3>& spacing) {
    require_same_shape(pred.data, gt.data, "surface_distances");
    if (pred.foreground_count() == 0) throw EmptyMaskError("surface_distances: empty prediction");
    if (gt.foreground_count() == 0) throw EmptyMaskError("surface_distances: empty ground truth");

    const Grid3u8 bp = boundary_voxels(pred);
    const Grid3u8 bg = boundary_voxels(gt);

    std::vector<double> pooled;
    append_nearest_distances(bp, bg, spacing, pooled); // pred boundary -> gt boundary
    append_nearest_distances(bg, bp, spacing, pooled); // gt boundary -> pred boundary

    double sum = 0.0;
    for (double d : pooled) sum += d;

    SurfaceDistances out;
    out.asd = sum / static_cast<double>(pooled.size());
    out.hd95 = percentile(pooled, 95.0);
    return out;
}

double ravd(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_shape(pred.data, gt.data, "ravd");
    const std::int64_t ng = gt.foreground_count();
    if (ng == 0) throw EmptyMaskError("ravd: empty ground truth");
    const std::int64_t np = pred.foreground_count();
    return 100.0 * static_cast<double>(np - ng) / static_cast<double>(ng);
}

double paired_test(const std::vector<double>& a, const std::vector<double>& b,
                   std::uint64_t seed) {
    if (a.size() != b.size()) throw ContractError("paired_test: length mismatch");
    const std::size_t n = a.size();
    if (n < 5) throw ContractError("paired_test: need at least 5 pairs");

    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];

    double obs = 0.0;
    for (double x : d) obs += x;
    obs = std::abs(obs); // |sum| orders identically to |mean|

    double scale = 0.0;
    for (double x : d) scale += std::abs(x);
    const double tol = 1e-12 * std::max(1.0, scale);

    if (n <= 20) {
        const std::uint64_t total = 1ULL << n;
        std::uint64_t hits = 0;
        for (std::uint64_t bits = 0; bits < total; ++bits) {
            double t = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                t += (bits >> i) & 1ULL ? -d[i] : d[i];
            }
            if (std::abs(t) >= obs - tol) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(total);
    }

    constexpr std::uint64_t kResamples = 100000;
    Rng rng(seed);
    std::uint64_t hits = 0;
    for (std::uint64_t r = 0; r < kResamples; ++r) {
        double t = 0.0;
        for (std::size_t i = 0; i < n; ++i) t += rng.bernoulli(0.5) ? -d[i] : d[i];
        if (std::abs(t) >= obs - tol) ++hits;
    }
    return static_cast<double>(1 + hits) / static_cast<double>(1 + kResamples);
}

std::optional<double> MetricReport::value_of(const CaseMetrics& row, const std::string& metric) {
    if (metric == "dice") return row.dice;
    if (metric == "jaccard") return row.jaccard;
    if (metric == "hd95") return row.hd95;
    if (metric == "asd") return row.asd;
    if (metric == "ravd") return row.ravd;
    if (metric == "precision") return row.precision;
    if (metric == "recall") return row.recall;
    throw ContractError("unknown metric '" + metric + "'");
}

MetricAggregate MetricReport::aggregate(const std::string& metric) const {
    MetricAggregate agg;
    double sum = 0.0;
    for (const auto& row : rows) {
        if (const auto v = value_of(row, metric)) {
            sum += *v;
            ++agg.count;
        }
    }
    if (agg.count == 0) return agg;
    agg.mean = sum / static_cast<double>(agg.count);
    double ss = 0.0;
    for (const auto& row : rows) {
        if (const auto v = value_of(row, metric)) {
            const double c = *v - agg.mean;
            ss += c * c;
        }
    }
    agg.stddev = std::sqrt(ss / static_cast<double>(agg.count));
    return agg;
}

namespace {

std::string cell(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << *v;
    return os.str();
}

} // namespace

void MetricReport::to_csv(std::ostream& os) const {
    os << "case_id,dice,jaccard,hd95,asd,ravd,precision,recall\n";
    for (const auto& r : rows) {
        os << r.case_id << ',' << cell(r.dice) << ',' << cell(r.jaccard) << ',' << cell(r.hd95)
           << ',' << cell(r.asd) << ',' << cell(r.ravd) << ',' << cell(r.precision) << ','
           << cell(r.recall) << '\n';
    }
    os << "MEAN±STD";
    for (const auto& name : kMetricNames) {
        const MetricAggregate agg = aggregate(name);
        os << ',';
        if (agg.count > 0) {
            os << std::fixed << std::setprecision(2) << agg.mean << "±" << agg.stddev;
        }
    }
    os << '\n';
}

MetricReport MetricReport::from_csv(std::istream& is) {
    MetricReport report;
    std::string line;
    if (!std::getline(is, line)) throw FormatError("metric CSV: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "case_id,dice,jaccard,hd95,asd,ravd,precision,recall") {
        throw FormatError("metric CSV: unexpected header '" + line + "'");
    }
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.rfind("MEAN", 0) == 0) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                cols.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (cols.size() != 8) throw FormatError("metric CSV: malformed row '" + line + "'");
        auto opt = [](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return std::stod(s);
        };
        auto req = [&opt, &line](const std::string& s) {
            const auto v = opt(s);
            if (!v) throw FormatError("metric CSV: missing required cell in '" + line + "'");
            return *v;
        };
        CaseMetrics r;
        r.case_id = cols[0];
        r.dice = req(cols[1]);
        r.jaccard = req(cols[2]);
        r.hd95 = opt(cols[3]);
        r.asd = opt(cols[4]);
        r.ravd = opt(cols[5]);
        r.precision = req(cols[6]);
        r.recall = req(cols[7]);
        report.rows.push_back(std::move(r));
    }
    return report;
}

CaseMetrics compute_case_metrics(const std::string& case_id, const BinaryMask& pred,
                                 const BinaryMask& gt, const std::array<double, 3>& spacing) {
    CaseMetrics row;
    row.case_id = case_id;
    const OverlapMetrics om = overlap_metrics(pred, gt);
    row.dice = om.dice;
    row.jaccard = om.jaccard;
    row.precision = om.precision;
    row.recall = om.recall;
    try {
        const SurfaceDistances sd = surface_distances(pred, gt, spacing);
        row.hd95 = sd.hd95;
        row.asd = sd.asd;
    } catch (const EmptyMaskError&) {
        // reported as missing values
    }
    try {
        row.ravd = ravd(pred, gt);
    } catch (const EmptyMaskError&) {
    }
    return row;
}

} // namespace mtctl
