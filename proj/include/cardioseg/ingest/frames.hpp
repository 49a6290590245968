#pragma once

#include <vector>

#include "cardioseg/core/sample.hpp"

namespace cardioseg::ingest {

/// Renumbers slice_index within each (dataset, patient, frame) group so that it is
/// 0-based, contiguous, and ordered by ascending SliceLocation, falling back to
/// InstanceNumber when a group has no SliceLocation, and to the existing slice_index
/// when neither is present. Input order is kept. Duplicate ordering keys
/// within a group raise AmbiguousOrdering.
std::vector<Sample> assemble_frames(std::vector<Sample> samples);

}  // namespace cardioseg::ingest
