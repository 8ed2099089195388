#pragma once

#include <string>

#include "synevo/backbone.hpp"

namespace synevo {

/// One domain's observations plus its windowed splits. `holdout` holds the
/// windows of a held-out temporal period when the dataset defines one; it is
/// never used for training.
struct DomainGroup {
    std::string group_id;
    std::string source;
    Matrix series;       // T × N
    Matrix series_mask;  // T × N, 1 observed / 0 missing
    WindowBatch train;
    WindowBatch val;
    WindowBatch test;
    WindowBatch holdout;
    std::string provenance;
};

} // namespace synevo
