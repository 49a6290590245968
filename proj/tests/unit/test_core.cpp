#include <doctest.h>

#include <random>

#include "cardioseg/core/bytes.hpp"
#include "cardioseg/core/config.hpp"
#include "cardioseg/core/sample_store.hpp"
#include "cardioseg/core/storage.hpp"
#include "cardioseg/core/tnsr.hpp"
#include "support/tempdir.hpp"

using namespace cardioseg;

TEST_CASE("grid rejects bad spacing and mismatched buffers") {
  CHECK_THROWS_AS(ScalarImage2D(2, 2, Spacing{0.0, 1.0}), Error);
  CHECK_THROWS_AS(ScalarImage2D(2, 2, Spacing{1, 1}, std::vector<double>(3)), Error);
  LabelMask2D m(2, 2);
  m(1, 1) = 4;
  CHECK_THROWS_AS(validate_mask(m), Error);
}

TEST_CASE("error codes map to exit codes") {
  CHECK(exit_code_for(ErrorCode::Usage) == 1);
  CHECK(exit_code_for(ErrorCode::InvalidConfig) == 1);
  CHECK(exit_code_for(ErrorCode::NonFiniteLoss) == 3);
  CHECK(exit_code_for(ErrorCode::BadMagic) == 2);
  CHECK(exit_code_for(ErrorCode::AuditMismatch) == 2);
  try {
    rethrow_with_context(Error(ErrorCode::TruncatedData, "short"), "a.nii");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TruncatedData);
    CHECK(std::string(e.what()).find("a.nii") != std::string::npos);
  }
}

TEST_CASE("gzip round trip and crc32") {
  Bytes b;
  for (int i = 0; i < 5000; ++i) b.push_back(static_cast<std::uint8_t>(i * 7));
  const Bytes z = gzip(b);
  CHECK(is_gzip(z));
  CHECK(gunzip(z) == b);
  const std::string s = "123456789";
  CHECK(crc32_hex(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())) == "cbf43926");
}

TEST_CASE("config parses sections, types and fallbacks") {
  const auto cfg = Config::parse("top = 1\n[train]\n# note\nlearning_rate = 0.01\nbatch_size = 8\naugment = false\n");
  CHECK(cfg.get_int("top", 0) == 1);
  CHECK(cfg.get_real("train.learning_rate", 0) == doctest::Approx(0.01));
  CHECK(cfg.get_int("train.batch_size", 1) == 8);
  CHECK_FALSE(cfg.get_bool("train.augment", true));
  CHECK(cfg.get_int("train.missing", 42) == 42);
  CHECK(cfg.keys("train") == std::vector<std::string>{"learning_rate", "batch_size", "augment"});
  CHECK_THROWS_AS(Config::parse("[train]\nbatch_size = eight\n").get_int("train.batch_size", 1), Error);
}

TEST_CASE("TNSR image and mask round trip") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> v(-2000, 2000);
  ScalarImage2D img(7, 5, Spacing{1.25, 0.75});
  for (auto& x : img.data()) x = v(rng) / 8.0;  // exactly representable in f32
  const auto back = tnsr::decode_image(tnsr::encode_image(img), img.spacing());
  CHECK(back == img);

  LabelMask2D m(3, 4, Spacing{2, 2});
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = static_cast<std::uint8_t>(i % 4);
  CHECK(tnsr::decode_mask(tnsr::encode_mask(m), m.spacing()) == m);

  Bytes bad = tnsr::encode_mask(m);
  bad[0] = 'X';
  CHECK_THROWS_AS(tnsr::decode(bad), Error);
  Bytes cut = tnsr::encode_image(img);
  cut.resize(cut.size() - 3);
  CHECK_THROWS_AS(tnsr::decode(cut), Error);
}

TEST_CASE("sample directories round trip through storage") {
  testing_support::TempDir dir;
  LocalStorage store(dir.path());
  Sample s;
  s.image = ScalarImage2D(4, 6, Spacing{1.5625, 1.5625}, 3.5);
  s.mask = LabelMask2D(4, 6, Spacing{1.5625, 1.5625}, 2);
  s.dataset = DatasetName::SB;
  s.patient_id = "SC-HF-I-01";
  s.slice_index = 2;
  s.frame_index = 1;
  s.phase = Phase::ES;
  Sample unlabeled = s;
  unlabeled.mask.reset();
  unlabeled.slice_index = 3;
  const std::vector<Sample> in{s, unlabeled};
  write_sample_set(store, "set", in, "khened");

  const auto out = read_sample_set(store, "set");
  CHECK(out.profile == "khened");
  REQUIRE(out.samples.size() == 2);
  CHECK(out.samples[0].image == s.image);
  CHECK(out.samples[0].mask == s.mask);
  CHECK(out.samples[0].key() == s.key());
  CHECK(out.samples[0].phase == Phase::ES);
  CHECK_FALSE(out.samples[1].mask.has_value());
  CHECK(out.samples[1].image.spacing() == s.image.spacing());

  CHECK_THROWS_AS(read_sample_set(store, "missing"), Error);
  CHECK(store.list("missing").empty());
}
