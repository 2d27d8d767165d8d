#ifndef MTCTL_METRICS_HPP
#define MTCTL_METRICS_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mtctl/volume.hpp"

namespace mtctl {

// Overlap scores in percent.
struct OverlapMetrics {
    double dice = 0.0;
    double jaccard = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

// Boundary distances in millimetres.
struct SurfaceDistances {
    double hd95 = 0.0;
    double asd = 0.0;
};

// Empty-vs-empty counts as perfect agreement (all four 100%).
OverlapMetrics overlap_metrics(const BinaryMask& pred, const BinaryMask& gt);

// Boundary voxels are foreground voxels with at least one background
// 6-neighbor (outside the grid counts as background). ASD is the mean of the
// pooled symmetric nearest-boundary distances; HD95 the 95th percentile
// (linear interpolation between order statistics).
SurfaceDistances surface_distances(const BinaryMask& pred, const BinaryMask& gt,
                                   const std::array<double, 3>& spacing = {1, 1, 1});

// Signed relative volume difference, percent: 100*(|P|-|G|)/|G|.
double ravd(const BinaryMask& pred, const BinaryMask& gt);

// Two-sided paired sign-flip permutation test on per-case differences.
// Exact enumeration for n <= 20, otherwise 1e5 seeded resamples.
double paired_test(const std::vector<double>& a, const std::vector<double>& b,
                   std::uint64_t seed = 0x7357);

// p-th percentile with linear interpolation between order statistics.
double percentile(std::vector<double> values, double p);

struct CaseMetrics {
    std::string case_id;
    double dice = 0.0;
    double jaccard = 0.0;
    std::optional<double> hd95; // missing when either mask is empty
    std::optional<double> asd;
    std::optional<double> ravd; // missing when ground truth is empty
    double precision = 0.0;
    double recall = 0.0;
};

struct MetricAggregate {
    double mean = 0.0;
    double stddev = 0.0; // population
    std::int64_t count = 0;
};

struct MetricReport {
    std::vector<CaseMetrics> rows;

    MetricAggregate aggregate(const std::string& metric) const;

    // Per-case value by metric name; nullopt when missing.
    static std::optional<double> value_of(const CaseMetrics& row, const std::string& metric);

    void to_csv(std::ostream& os) const;
    static MetricReport from_csv(std::istream& is);
};

CaseMetrics compute_case_metrics(const std::string& case_id, const BinaryMask& pred,
                                 const BinaryMask& gt, const std::array<double, 3>& spacing);

extern const std::vector<std::string> kMetricNames;

} // namespace mtctl

#endif
