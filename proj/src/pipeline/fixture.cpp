#include "cardioseg/pipeline/fixture.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "cardioseg/core/bytes.hpp"
#include "cardioseg/ingest/dicom.hpp"
#include "cardioseg/ingest/nifti.hpp"

namespace cardioseg::pipeline {

namespace fs = std::filesystem;

namespace {

ingest::Polygon ellipse(double cx, double cy, double rx, double ry, int n = 48) {
  std::vector<ingest::Point> pts;
  for (int i = 0; i < n; ++i) {
    const double t = 2 * std::numbers::pi * i / n;
    pts.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return ingest::Polygon(std::move(pts));
}

std::string contour_text(const ingest::Polygon& p) {
  std::string out;
  for (const auto& v : p.vertices()) out += format_real(v.x) + " " + format_real(v.y) + "\n";
  return out;
}

std::string padded(int v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*d", width, v);
  return buf;
}

}  // namespace

Phantom make_phantom(std::mt19937_64& rng, int height, int width, Spacing spacing, double contraction,
                     double scale) {
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 25.0);

  // geometry in millimetres, converted per axis to pixel units
  const double cx = width / 2.0 + 4.0 * jitter(rng) / spacing.col_mm;
  const double cy = height / 2.0 + 4.0 * jitter(rng) / spacing.row_mm;
  const double r_endo = scale * (18.0 - 6.0 * contraction + 1.5 * jitter(rng));
  const double r_epi = r_endo + 7.0 + 2.0 * contraction;
  const double rv_rx = scale * (11.0 - 4.0 * contraction);
  const double rv_ry = scale * 22.0;
  const double rv_cx = cx - (r_epi + rv_rx + 3.0) / spacing.col_mm;
  const double cm = spacing.col_mm, rm = spacing.row_mm;

  Phantom p{ScalarImage2D(height, width, spacing),
            LabelMask2D(height, width, spacing),
            ellipse(cx, cy, r_endo / cm, r_endo / rm),
            ellipse(cx, cy, r_epi / cm, r_epi / rm),
            ellipse(rv_cx, cy, rv_rx / cm, rv_ry / rm),
            ellipse(rv_cx, cy, (rv_rx + 3.0) / cm, (rv_ry + 3.0) / rm)};

  const auto lv = ingest::compose_lv_mask(&p.lv_endo, &p.lv_epi, height, width, spacing);
  const auto rv = ingest::rasterize_polygon(p.rv_endo, height, width, ClassId::RV, spacing);
  for (std::size_t i = 0; i < p.mask.data().size(); ++i) p.mask.data()[i] = lv.data()[i] ? lv.data()[i] : rv.data()[i];

  static constexpr double kLevel[4] = {150.0, 650.0, 280.0, 780.0};
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double ex = (c + 0.5 - width / 2.0) / (0.42 * width);
      const double ey = (r + 0.5 - height / 2.0) / (0.36 * height);
      const int cls = p.mask(r, c);
      double v = cls == 0 && ex * ex + ey * ey > 1.0 ? 20.0 : kLevel[cls];
      v *= 0.85 + 0.3 * (c + 0.5) / width;
      v += noise(rng);
      p.image(r, c) = std::max(0.0, std::round(v));
    }
  }
  return p;
}

std::map<DatasetName, fs::path> write_fixture(const fs::path& dir, const FixtureOptions& o) {
  std::mt19937_64 rng(o.seed);
  std::map<DatasetName, fs::path> roots;
  const auto slice_scale = [&](int s) { return 1.0 - 0.15 * s; };

  // ACDC: one NIfTI volume per labeled frame plus its label volume
  {
    const fs::path root = dir / "ACDC";
    roots[DatasetName::ACDC] = root;
    const int frames[2] = {1, 5};
    for (int p = 0; p < o.patients; ++p) {
      const std::string patient = "patient" + padded(p + 1, 3);
      const fs::path pdir = root / patient;
      write_text_file(pdir / "Info.cfg", "ED: 1\nES: 5\nGroup: NOR\nNbFrame: 10\n");
      for (int f = 0; f < 2; ++f) {
        std::vector<ScalarImage2D> images, labels;
        for (int s = 0; s < o.slices; ++s) {
          auto ph = make_phantom(rng, o.height, o.width, o.spacing, f, slice_scale(s));
          ScalarImage2D lab(o.height, o.width, o.spacing);
          for (std::size_t i = 0; i < lab.data().size(); ++i) lab.data()[i] = ph.mask.data()[i];
          images.push_back(std::move(ph.image));
          labels.push_back(std::move(lab));
        }
        const std::string stem = patient + "_frame" + padded(frames[f], 2);
        write_file(pdir / (stem + ".nii.gz"),
                   gzip(ingest::encode_nifti(ingest::volume_from_images(images, o.slices, 1, ingest::NiftiDatatype::Int16))));
        write_file(pdir / (stem + "_gt.nii.gz"),
                   gzip(ingest::encode_nifti(ingest::volume_from_images(labels, o.slices, 1, ingest::NiftiDatatype::UInt8))));
      }
    }
  }

  // DICOM datasets: two frames per slice, the most apical slice left unlabeled
  for (DatasetName d : {DatasetName::SB, DatasetName::RV, DatasetName::LV}) {
    const fs::path root = dir / std::string(to_string(d));
    roots[d] = root;
    for (int p = 0; p < o.patients; ++p) {
      std::string patient, prefix;
      switch (d) {
        case DatasetName::SB: patient = "SC-HF-I-" + padded(p + 1, 2); prefix = "IM-0001-"; break;
        case DatasetName::RV: patient = "P" + padded(p + 1, 2); prefix = patient + "-"; break;
        default: patient = "LV-" + padded(p + 1, 2); prefix = "IM-0001-"; break;
      }
      const fs::path pdir = root / patient;
      for (int s = 0; s < o.slices; ++s) {
        for (int f = 0; f < 2; ++f) {
          const int instance = s * 2 + f + 1;
          auto ph = make_phantom(rng, o.height, o.width, o.spacing, f, slice_scale(s));
          const std::string stem = prefix + padded(instance, 4);
          write_file(pdir / (stem + ".dcm"), ingest::encode_dicom_slice(ph.image, patient, instance, 10.0 * s));
          if (s == o.slices - 1) continue;
          if (d == DatasetName::RV) {
            write_text_file(pdir / (stem + "-icontour-manual.txt"), contour_text(ph.rv_endo));
            write_text_file(pdir / (stem + "-ocontour-manual.txt"), contour_text(ph.rv_epi));
          } else {
            write_text_file(pdir / (stem + "-icontour-manual.txt"), contour_text(ph.lv_endo));
            write_text_file(pdir / (stem + "-ocontour-manual.txt"), contour_text(ph.lv_epi));
          }
        }
      }
    }
  }
  return roots;
}

}  // namespace cardioseg::pipeline
