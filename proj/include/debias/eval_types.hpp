#pragma once

#include <cstdint>
#include <vector>

namespace debias {

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::int64_t count = 0;
    std::int64_t correct = 0;

    double correct_fraction() const { return count == 0 ? 0.0 : static_cast<double>(correct) / count; }
};

// Max-probability histogram over [1/K, 1].
struct ConfidenceHistogram {
    std::vector<HistogramBin> bins;
    double mean_confidence = 0.0;
    std::int64_t total = 0;
    std::int64_t total_correct = 0;
};

}  // namespace debias
