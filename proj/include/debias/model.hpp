#pragma once

#include <cstdint>

#include "debias/classifier.hpp"

namespace debias {

// A trained classifier together with the feature space it reads.
struct Classifier {
    FeatureSpace space;
    ModelParams params;
    std::int64_t step = 0;

    ProbVector predict(const Example& ex) const { return forward(params, featurize(ex, space)); }
    int num_labels() const { return params.shape().num_labels; }
};

}  // namespace debias
