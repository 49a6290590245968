#pragma once

// Checkpoint container, little-endian:
//
//   offset 0   "CSEGCKPT"
//          8   u32 format version (= 1)
//         12   u32 header length L
//         16   L bytes of JSON: {"network": {levels, base_filters, classes, dropout_rate,
//              leaky_slope, deep_supervision_levels, input_size},
//              "params": [{"name": ..., "kind": ...}, ...]}
//         ..   one TNSR f64 rank-4 blob per parameter, in "params" order

#include <set>
#include <span>
#include <string>
#include <vector>

#include "cardioseg/core/bytes.hpp"
#include "cardioseg/core/sample.hpp"
#include "cardioseg/core/sample_store.hpp"
#include "cardioseg/core/storage.hpp"
#include "cardioseg/model/network.hpp"

namespace cardioseg::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Per-pixel argmax of element `n`; ties go to the smaller class id.
LabelMask2D argmax_mask(const Tensor& probs, int n, Spacing spacing);

LabelMask2D predict(const Network& net, const Sample& s);
std::vector<KeyedMask> predict_all(const Network& net, std::span<const Sample> samples);

Bytes encode_checkpoint(const Network& net);
/// Throws BadMagic, BadFormat, TruncatedData.
Network decode_checkpoint(ByteView bytes);

/// Reads a mask directory (index.jsonl + TNSR masks). A directory without an index
/// and without files yields an empty list. When `known` is given, any key outside it
/// raises UnknownKey.
std::vector<KeyedMask> load_external_predictions(const Storage& storage, const std::string& dir,
                                                 const std::set<SampleKey>* known = nullptr);

}  // namespace cardioseg::model
