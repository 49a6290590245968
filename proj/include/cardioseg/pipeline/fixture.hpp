#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>

#include "cardioseg/core/sample.hpp"
#include "cardioseg/ingest/contour.hpp"

namespace cardioseg::pipeline {

/// Short-axis phantom: an LV cavity disk inside a myocardial ring, an elliptical RV
/// to its left, a body ellipse and a smooth intensity ramp with Gaussian noise.
struct Phantom {
  ScalarImage2D image;
  LabelMask2D mask;  // all three foreground classes
  ingest::Polygon lv_endo;
  ingest::Polygon lv_epi;
  ingest::Polygon rv_endo;
  ingest::Polygon rv_epi;
};

/// `contraction` in [0,1] shrinks the cavities (0 = end-diastole, 1 = end-systole);
/// `scale` shrinks the whole heart (apical slices).
Phantom make_phantom(std::mt19937_64& rng, int height, int width, Spacing spacing, double contraction,
                     double scale = 1.0);

struct FixtureOptions {
  int patients = 4;
  int slices = 3;
  int height = 96;
  int width = 96;
  Spacing spacing{1.5, 1.5};
  std::uint64_t seed = 2024;
};

/// Writes all four datasets under `dir` (ACDC/, SB/, RV/, LV/) in the default layouts and
/// returns their roots. NIfTI ACDC patients carry ED and ES volumes with label volumes;
/// the DICOM datasets store two frames per slice with contours for every slice except
/// the most apical one.
std::map<DatasetName, std::filesystem::path> write_fixture(const std::filesystem::path& dir,
                                                           const FixtureOptions& opts = {});

}  // namespace cardioseg::pipeline
