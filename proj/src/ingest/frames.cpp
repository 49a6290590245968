#include "cardioseg/ingest/frames.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "cardioseg/core/bytes.hpp"

namespace cardioseg::ingest {

std::vector<Sample> assemble_frames(std::vector<Sample> samples) {
  using GroupKey = std::tuple<DatasetName, std::string, int>;
  std::map<GroupKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i)
    groups[{samples[i].dataset, samples[i].patient_id, samples[i].frame_index}].push_back(i);

  for (auto& [gk, idx] : groups) {
    const bool all_location =
        std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return samples[i].slice_location.has_value(); });
    const bool all_instance =
        std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return samples[i].instance_number.has_value(); });

    auto order_key = [&](std::size_t i) -> double {
      const auto& s = samples[i];
      if (all_location) return *s.slice_location;
      if (all_instance) return *s.instance_number;
      return s.slice_index;
    };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return order_key(a) < order_key(b); });
    for (std::size_t k = 1; k < idx.size(); ++k) {
      if (order_key(idx[k]) == order_key(idx[k - 1])) {
        throw Error(ErrorCode::AmbiguousOrdering,
                    std::string(to_string(std::get<0>(gk))) + "/" + std::get<1>(gk) + " frame " +
                        std::to_string(std::get<2>(gk)) + ": two slices share ordering key " +
                        format_real(order_key(idx[k])));
      }
    }
    for (std::size_t k = 0; k < idx.size(); ++k) samples[idx[k]].slice_index = static_cast<int>(k);
  }

  return samples;
}

}  // namespace cardioseg::ingest
