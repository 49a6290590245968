#include <doctest.h>

#include <random>

#include "cardioseg/core/bytes.hpp"
#include "cardioseg/ingest/contour.hpp"
#include "cardioseg/ingest/dataset.hpp"
#include "cardioseg/ingest/dicom.hpp"
#include "cardioseg/ingest/frames.hpp"
#include "cardioseg/ingest/nifti.hpp"
#include "cardioseg/pipeline/fixture.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace cardioseg;
using namespace cardioseg::ingest;
using namespace cardioseg::ingest::tags;

namespace {

// Explicit VR little endian element, assembled byte by byte.
void element(Bytes& out, std::uint16_t group, std::uint16_t elem, const char* vr, const Bytes& value) {
  auto u16 = [&](std::uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back(v >> 8);
  };
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
  };
  u16(group);
  u16(elem);
  out.push_back(vr[0]);
  out.push_back(vr[1]);
  const std::string v(vr);
  if (v == "OB" || v == "OW" || v == "SQ" || v == "UN" || v == "UT") {
    u16(0);
    u32(static_cast<std::uint32_t>(value.size()));
  } else {
    u16(static_cast<std::uint16_t>(value.size()));
  }
  out.insert(out.end(), value.begin(), value.end());
}

Bytes text(std::string s) {
  if (s.size() % 2) s += ' ';
  return Bytes(s.begin(), s.end());
}

Bytes uid(std::string s) {
  Bytes b(s.begin(), s.end());
  if (b.size() % 2) b.push_back(0);
  return b;
}

Bytes us(std::uint16_t v) { return {static_cast<std::uint8_t>(v & 0xff), static_cast<std::uint8_t>(v >> 8)}; }

struct DicomFixture {
  bool with_pixels = true;
  int payload_pixels = 16;
};

Bytes dicom_fixture(const DicomFixture& f) {
  Bytes b(128, 0);
  for (char c : std::string("DICM")) b.push_back(static_cast<std::uint8_t>(c));
  element(b, 0x0002, 0x0010, "UI", uid("1.2.840.10008.1.2.1"));
  element(b, 0x0008, 0x0018, "UI", uid("1.2.3.4.5"));
  element(b, 0x0010, 0x0020, "LO", text("SC-HF-I-01"));
  element(b, 0x0018, 0x0050, "DS", text("8.0"));
  element(b, 0x0020, 0x0013, "IS", text("12"));
  element(b, 0x0020, 0x1041, "DS", text("-42.5"));
  element(b, 0x0028, 0x0002, "US", us(1));
  element(b, 0x0028, 0x0010, "US", us(4));
  element(b, 0x0028, 0x0011, "US", us(4));
  element(b, 0x0028, 0x0030, "DS", text("1.3671875\\1.3671875"));
  element(b, 0x0028, 0x0100, "US", us(16));
  element(b, 0x0028, 0x0101, "US", us(12));
  element(b, 0x0028, 0x0103, "US", us(0));
  if (f.with_pixels) {
    Bytes px;
    for (int i = 0; i < f.payload_pixels; ++i) {
      px.push_back(static_cast<std::uint8_t>(i));
      px.push_back(0);
    }
    element(b, 0x7FE0, 0x0010, "OW", px);
  }
  return b;
}

}  // namespace

TEST_CASE("NIfTI 4-D volume splits into frame and slice images") {
  std::vector<ScalarImage2D> images;
  for (int f = 0; f < 2; ++f)
    for (int s = 0; s < 3; ++s) {
      ScalarImage2D img(8, 8, Spacing{1.5, 1.5});
      for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>(i) + 100 * s + 1000 * f;
      images.push_back(img);
    }
  const auto vol = volume_from_images(images, 3, 2, NiftiDatatype::Float32);
  const auto parsed = parse_nifti(encode_nifti(vol));
  REQUIRE(parsed.size() == 6);
  for (const auto& p : parsed) {
    CHECK(p.image.height() == 8);
    CHECK(p.image.width() == 8);
    CHECK(p.image.spacing() == Spacing{1.5, 1.5});
    CHECK(p.image == images[static_cast<std::size_t>(p.frame_index * 3 + p.slice_index)]);
  }
  std::set<std::pair<int, int>> idx;
  for (const auto& p : parsed) idx.insert({p.frame_index, p.slice_index});
  CHECK(idx.size() == 6);

  SUBCASE("gzip container") { CHECK(parse_nifti(gzip(encode_nifti(vol))).size() == 6); }
}

TEST_CASE("NIfTI round trip keeps anisotropic spacing and row/column layout") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> v(-30000, 30000);
  ScalarImage2D img(5, 9, Spacing{1.68, 1.37});
  for (auto& x : img.data()) x = v(rng) / 4.0;
  const std::vector<ScalarImage2D> one{img};
  const auto parsed = parse_nifti(encode_nifti(volume_from_images(one, 1, 1, NiftiDatatype::Float32)));
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].image.height() == 5);
  CHECK(parsed[0].image.width() == 9);
  CHECK(parsed[0].image.spacing().row_mm == doctest::Approx(1.68).epsilon(1e-7));
  CHECK(parsed[0].image.spacing().col_mm == doctest::Approx(1.37).epsilon(1e-7));
  CHECK(parsed[0].image.data() == img.data());
}

TEST_CASE("NIfTI contract errors") {
  ScalarImage2D img(4, 4, Spacing{1, 1}, 1.0);
  const std::vector<ScalarImage2D> one{img};
  const Bytes good = encode_nifti(volume_from_images(one, 1, 1));

  SUBCASE("2-D file yields one image at frame 0, slice 0") {
    const auto p = parse_nifti(good);
    REQUIRE(p.size() == 1);
    CHECK(p[0].frame_index == 0);
    CHECK(p[0].slice_index == 0);
  }
  SUBCASE("bad magic") {
    Bytes b = good;
    for (int i = 344; i < 348; ++i) b[i] = 'X';
    CHECK_THROWS_WITH_AS(parse_nifti(b), doctest::Contains("BadMagic"), Error);
  }
  SUBCASE("truncated payload") {
    Bytes b = good;
    b.resize(b.size() - 4);
    CHECK_THROWS_WITH_AS(parse_nifti(b), doctest::Contains("TruncatedData"), Error);
  }
  SUBCASE("unsupported datatype") {
    Bytes b = good;
    store<std::int16_t>(b, 70, 1024);
    CHECK_THROWS_WITH_AS(parse_nifti(b), doctest::Contains("UnsupportedDatatype"), Error);
  }
  SUBCASE("scl_slope and scl_inter are applied") {
    Bytes b = good;
    store<float>(b, 112, 2.0f);
    store<float>(b, 116, -3.0f);
    CHECK(parse_nifti(b)[0].image(0, 0) == -1.0);
  }
  SUBCASE("label volumes outside {0..3} are rejected") {
    ScalarImage2D lab(2, 2, Spacing{1, 1}, 5.0);
    const std::vector<ScalarImage2D> labs{lab};
    CHECK_THROWS_AS(parse_nifti_mask(encode_nifti(volume_from_images(labs, 1, 1, NiftiDatatype::UInt8))), Error);
  }
}

TEST_CASE("DICOM byte fixture parses to image and metadata") {
  const auto d = parse_dicom(dicom_fixture({}));
  CHECK(d.image.height() == 4);
  CHECK(d.image.width() == 4);
  CHECK(d.image.spacing() == Spacing{1.3671875, 1.3671875});
  for (int i = 0; i < 16; ++i) CHECK(d.image.data()[i] == i);
  CHECK(d.slice_location() == -42.5);
  CHECK(d.instance_number() == 12);
  CHECK(d.metadata.at(PatientID) == "SC-HF-I-01");
  CHECK(d.metadata.at(SOPInstanceUID) == "1.2.3.4.5");
  CHECK(d.metadata.at(BitsStored) == "12");
  CHECK(d.metadata.at(SliceThickness) == "8.0");

  CHECK_THROWS_WITH_AS(parse_dicom(dicom_fixture({.with_pixels = false})), doctest::Contains("MissingRequiredTag"),
                       Error);
  CHECK_THROWS_WITH_AS(parse_dicom(dicom_fixture({.payload_pixels = 10})), doctest::Contains("PixelDataSizeMismatch"),
                       Error);
  Bytes no_preamble = dicom_fixture({});
  no_preamble[129] = 'X';
  CHECK_THROWS_WITH_AS(parse_dicom(no_preamble), doctest::Contains("MissingPreamble"), Error);
}

TEST_CASE("DICOM writer output recovers every injected tag") {
  DicomWriter w;
  w.add_string(PatientID, "LO", "P07")
      .add_string(InstanceNumber, "IS", "3")
      .add_string(SliceLocation, "DS", "12.25")
      .add_string(SeriesNumber, "IS", "901")
      .add_string(TriggerTime, "DS", "345.5")
      .add_string(PixelSpacing, "DS", "0.5\\0.75")
      .add_string(RescaleSlope, "DS", "2")
      .add_string(RescaleIntercept, "DS", "-10")
      .add_us(Rows, 2)
      .add_us(Columns, 3)
      .add_us(BitsAllocated, 8)
      .add_us(SamplesPerPixel, 1);
  const std::uint8_t px[6] = {0, 1, 2, 3, 4, 5};
  w.add_pixels_u8(px);
  const auto d = parse_dicom(w.finish());
  CHECK(d.metadata.at(PatientID) == "P07");
  CHECK(d.metadata.at(SeriesNumber) == "901");
  CHECK(d.metadata.at(TriggerTime) == "345.5");
  CHECK(d.metadata.at(Rows) == "2");
  CHECK(d.metadata.at(SamplesPerPixel) == "1");
  CHECK(d.image.spacing() == Spacing{0.5, 0.75});
  CHECK(d.image(1, 2) == 5 * 2 - 10);

  CHECK_THROWS_WITH_AS(parse_dicom(w.finish("1.2.840.10008.1.2")), doctest::Contains("UnsupportedTransferSyntax"),
                       Error);
}

TEST_CASE("contour files") {
  const auto p = parse_contour_file("1.0 1.0\n1.0 3.0\n3.0 3.0\n3.0 1.0");
  CHECK(p.size() == 4);
  CHECK(p.vertices()[1].y == 3.0);
  CHECK_THROWS_WITH_AS(parse_contour_file("1 1\n2 2"), doctest::Contains("TooFewPoints"), Error);
  CHECK_THROWS_WITH_AS(parse_contour_file("1 1\n2 2\na b\n3 4\n"), doctest::Contains("line 3"), Error);
}

TEST_CASE("rasterization follows pixel centers") {
  const Polygon sq({{0.9, 0.9}, {3.1, 0.9}, {3.1, 3.1}, {0.9, 3.1}});
  const auto m = rasterize_polygon(sq, 5, 5, ClassId::LVC);
  int set = 0;
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      const bool in = r >= 1 && r <= 2 && c >= 1 && c <= 2;
      CHECK((m(r, c) == 3) == in);
      set += m(r, c) != 0;
    }
  CHECK(set == 4);

  const Polygon outside({{-10, -10}, {-5, -10}, {-5, -5}});
  const auto empty = rasterize_polygon(outside, 5, 5, ClassId::RV);
  CHECK(std::all_of(empty.data().begin(), empty.data().end(), [](auto v) { return v == 0; }));
}

TEST_CASE("nested contours: endocardium inside epicardium") {
  const Polygon epi({{2, 2}, {14, 2}, {14, 14}, {2, 14}});
  const Polygon endo({{5, 5}, {11, 5}, {11, 11}, {5, 11}});
  const auto a = rasterize_polygon(endo, 16, 16, ClassId::LVC);
  const auto b = rasterize_polygon(epi, 16, 16, ClassId::LVM);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data()[i]) CHECK(b.data()[i]);
  const auto lv = compose_lv_mask(&endo, &epi, 16, 16, {});
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      const oracle::Pt q{c + 0.5, r + 0.5};
      const bool in_endo = oracle::inside({{5, 5}, {11, 5}, {11, 11}, {5, 11}}, q);
      const bool in_epi = oracle::inside({{2, 2}, {14, 2}, {14, 14}, {2, 14}}, q);
      CHECK(lv(r, c) == (in_endo ? 3 : in_epi ? 2 : 0));
    }
}

TEST_CASE("rasterization matches the point-in-polygon oracle on random polygons") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    const auto pts = oracle::random_polygon(rng, 16, 16, 14, t % 2 == 1);
    std::vector<Point> v;
    for (const auto& p : pts) v.push_back({p.x, p.y});
    const auto m = rasterize_polygon(Polygon(v), 32, 32, ClassId::LVM);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) REQUIRE((m(r, c) == 2) == oracle::inside(pts, {c + 0.5, r + 0.5}));
  }
}

TEST_CASE("assemble_frames orders slices by location") {
  auto mk = [](std::optional<double> loc, std::optional<int> inst) {
    Sample s;
    s.image = ScalarImage2D(1, 1);
    s.dataset = DatasetName::SB;
    s.patient_id = "p";
    s.slice_location = loc;
    s.instance_number = inst;
    return s;
  };
  auto out = assemble_frames({mk(10.0, 1), mk(2.0, 2), mk(6.0, 3)});
  CHECK(out[0].slice_index == 2);
  CHECK(out[1].slice_index == 0);
  CHECK(out[2].slice_index == 1);

  out = assemble_frames({mk(std::nullopt, 7), mk(std::nullopt, 3)});
  CHECK(out[0].slice_index == 1);
  CHECK(out[1].slice_index == 0);

  CHECK(assemble_frames({mk(4.0, 1)})[0].slice_index == 0);
  CHECK_THROWS_WITH_AS(assemble_frames({mk(5.0, std::nullopt), mk(5.0, std::nullopt)}),
                       doctest::Contains("AmbiguousOrdering"), Error);
}

TEST_CASE("assemble_frames preserves the sample multiset") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50, 50);
  std::vector<Sample> in;
  for (int p = 0; p < 3; ++p)
    for (int f = 0; f < 2; ++f)
      for (int s = 0; s < 5; ++s) {
        Sample x;
        x.image = ScalarImage2D(1, 1, {}, p * 100 + f * 10 + s);
        x.patient_id = "p" + std::to_string(p);
        x.frame_index = f;
        x.slice_location = u(rng);
        in.push_back(x);
      }
  const auto out = assemble_frames(in);
  REQUIRE(out.size() == in.size());
  std::multiset<double> a, b;
  for (const auto& s : in) a.insert(s.image(0, 0));
  for (const auto& s : out) b.insert(s.image(0, 0));
  CHECK(a == b);
  std::set<std::tuple<std::string, int, int>> keys;
  for (const auto& s : out) keys.insert({s.patient_id, s.frame_index, s.slice_index});
  CHECK(keys.size() == out.size());
}

TEST_CASE("load_dataset on the synthetic fixture") {
  testing_support::TempDir dir;
  pipeline::FixtureOptions o;
  o.patients = 2;
  o.slices = 3;
  o.height = o.width = 48;
  const auto roots = pipeline::write_fixture(dir.path(), o);
  const auto& layouts = default_layouts();

  const auto acdc = load_dataset(roots.at(DatasetName::ACDC), descriptor_for(DatasetName::ACDC),
                                 layouts.at(DatasetName::ACDC));
  auto ev = acdc.audit.find(DatasetName::ACDC, "ingest");
  REQUIRE(ev);
  CHECK(ev->patients == 2);
  CHECK(ev->slices == 12);
  CHECK(ev->labeled_images == 12);
  for (const auto& s : acdc.samples) CHECK(s.phase != Phase::Unknown);

  for (DatasetName d : {DatasetName::SB, DatasetName::RV, DatasetName::LV}) {
    const auto r = load_dataset(roots.at(d), descriptor_for(d), layouts.at(d));
    ev = r.audit.find(d, "ingest");
    REQUIRE(ev);
    CHECK(ev->patients == 2);
    CHECK(ev->slices == 12);
    CHECK(ev->labeled_images == 8);
    const auto labeled = descriptor_for(d).labeled_classes;
    for (const auto& s : r.samples)
      if (s.mask)
        for (auto v : s.mask->data())
          if (v) CHECK(labeled.count(static_cast<ClassId>(v)));
  }

  std::filesystem::create_directories(dir / "empty");
  CHECK_THROWS_WITH_AS(
      load_dataset(dir / "empty", descriptor_for(DatasetName::SB), layouts.at(DatasetName::SB)),
      doctest::Contains("LayoutMismatch"), Error);
}

TEST_CASE("layout config parsing") {
  const auto cfg = Config::parse(default_layout_text());
  const auto parsed = parse_layouts(cfg);
  CHECK(parsed.size() == 4);
  CHECK(parsed.at(DatasetName::RV).rv_endo_contour == default_layouts().at(DatasetName::RV).rv_endo_contour);
  CHECK_THROWS_AS(parse_layouts(Config::parse("[XYZ]\nimages = *.dcm\n")), Error);
}
