#include "cardioseg/model/predict.hpp"

#include <cstring>

#include <json.hpp>

#include "cardioseg/core/tnsr.hpp"

namespace cardioseg::model {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};

std::string_view kind_name(ParamKind k) {
  switch (k) {
    case ParamKind::ConvWeight: return "conv_weight";
    case ParamKind::ConvBias: return "conv_bias";
    case ParamKind::NormScale: return "norm_scale";
    case ParamKind::NormShift: return "norm_shift";
  }
  return "?";
}

}  // namespace

LabelMask2D argmax_mask(const Tensor& probs, int n, Spacing spacing) {
  LabelMask2D out(probs.h, probs.w, spacing);
  const std::size_t P = probs.plane();
  const double* base = probs.v.data() + static_cast<std::size_t>(n) * probs.c * P;
  for (std::size_t i = 0; i < P; ++i) {
    int best = 0;
    for (int c = 1; c < probs.c; ++c)
      if (base[c * P + i] > base[best * P + i]) best = c;
    out.data()[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LabelMask2D predict(const Network& net, const Sample& s) {
  Tensor batch(1, 1, s.image.height(), s.image.width());
  std::copy(s.image.pixels().begin(), s.image.pixels().end(), batch.v.begin());
  try {
    return argmax_mask(forward(net, batch), 0, s.image.spacing());
  } catch (const Error& e) {
    rethrow_with_context(e, to_string(s.key()));
  }
}

std::vector<KeyedMask> predict_all(const Network& net, std::span<const Sample> samples) {
  std::vector<KeyedMask> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.key(), s.phase, predict(net, s)});
  return out;
}

Bytes encode_checkpoint(const Network& net) {
  const auto& c = net.cfg;
  nlohmann::json header;
  header["network"] = {{"levels", c.levels},
                       {"base_filters", c.base_filters},
                       {"classes", c.classes},
                       {"dropout_rate", c.dropout_rate},
                       {"leaky_slope", c.leaky_slope},
                       {"deep_supervision_levels", c.deep_supervision_levels},
                       {"input_size", c.input_size}};
  header["params"] = nlohmann::json::array();
  for (const auto& p : net.params) header["params"].push_back({{"name", p.name}, {"kind", kind_name(p.kind)}});
  const std::string text = header.dump();

  Bytes out(kMagic, kMagic + 8);
  append<std::uint32_t>(out, kCheckpointVersion);
  append<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& p : net.params) {
    tnsr::Array a{tnsr::DType::F64,
                  {static_cast<std::uint32_t>(p.value.n), static_cast<std::uint32_t>(p.value.c),
                   static_cast<std::uint32_t>(p.value.h), static_cast<std::uint32_t>(p.value.w)},
                  p.value.v};
    const Bytes blob = tnsr::encode(a);
    out.insert(out.end(), blob.begin(), blob.end());
  }
  return out;
}

Network decode_checkpoint(ByteView bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw Error(ErrorCode::BadMagic, "not a checkpoint file");
  const auto version = load<std::uint32_t>(bytes, 8, true);
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::BadFormat, "unsupported checkpoint version " + std::to_string(version));
  const auto len = load<std::uint32_t>(bytes, 12, true);
  if (bytes.size() < 16 + static_cast<std::size_t>(len)) throw Error(ErrorCode::TruncatedData, "checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + len);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadFormat, std::string("checkpoint header: ") + e.what());
  }

  NetworkConfig cfg;
  try {
    const auto& n = header.at("network");
    cfg.levels = n.at("levels").get<int>();
    cfg.base_filters = n.at("base_filters").get<int>();
    cfg.classes = n.at("classes").get<int>();
    cfg.dropout_rate = n.at("dropout_rate").get<double>();
    cfg.leaky_slope = n.at("leaky_slope").get<double>();
    cfg.deep_supervision_levels = n.at("deep_supervision_levels").get<int>();
    cfg.input_size = n.at("input_size").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadFormat, std::string("checkpoint network config: ") + e.what());
  }
  Network net = build_network(cfg, 0);
  const auto& names = header.at("params");
  if (names.size() != net.params.size())
    throw Error(ErrorCode::BadFormat, "checkpoint holds " + std::to_string(names.size()) + " parameters, expected " +
                                          std::to_string(net.params.size()));
  std::size_t off = 16 + len;
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    auto& p = net.params[i];
    if (names[i].at("name").get<std::string>() != p.name)
      throw Error(ErrorCode::BadFormat, "parameter " + std::to_string(i) + " is '" +
                                            names[i].at("name").get<std::string>() + "', expected '" + p.name + "'");
    std::size_t used = 0;
    auto a = tnsr::decode_prefix(bytes.subspan(off), used);
    off += used;
    const std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(p.value.n), static_cast<std::uint32_t>(p.value.c),
                                          static_cast<std::uint32_t>(p.value.h), static_cast<std::uint32_t>(p.value.w)};
    if (a.dims != dims) throw Error(ErrorCode::BadFormat, "shape mismatch for parameter '" + p.name + "'");
    p.value.v = std::move(a.values);
  }
  if (off != bytes.size()) throw Error(ErrorCode::BadFormat, "trailing bytes after checkpoint payload");
  return net;
}

std::vector<KeyedMask> load_external_predictions(const Storage& storage, const std::string& dir,
                                                 const std::set<SampleKey>* known) {
  const std::string index = dir.empty() ? kIndexFile : dir + "/" + kIndexFile;
  if (!storage.exists(index)) {
    if (storage.list(dir).empty()) return {};
  }
  auto masks = read_mask_set(storage, dir);
  if (known)
    for (const auto& m : masks)
      if (!known->count(m.key)) throw Error(ErrorCode::UnknownKey, "prediction " + to_string(m.key) + " matches no sample");
  return masks;
}

}  // namespace cardioseg::model
