#pragma once

#include <span>
#include <vector>

namespace tsmr {

struct DescriptiveStats {
    double mean = 0.0;
    double stddev = 0.0; // sample std (n-1)
    double min = 0.0;
    double max = 0.0;
    double median = 0.0;
    int count = 0;
};

DescriptiveStats describe(std::span<const double> values);

enum class RanksumMode { Auto, Exact, Normal };

// Two-sided Wilcoxon rank-sum test. Exact mode enumerates all rank
// assignments (used when both samples have at most 10 values, the regime of
// the 10-run comparisons); normal mode uses the tie-corrected Gaussian
// approximation without continuity correction.
double wilcoxon_ranksum_p(std::span<const double> x, std::span<const double> y,
                          RanksumMode mode = RanksumMode::Auto);

// One-sided sign test: probability of at least `wins` successes out of `n`
// fair coin flips.
double sign_test_p(int wins, int n);

} // namespace tsmr
