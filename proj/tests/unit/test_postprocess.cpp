#include <doctest.h>

#include <random>

#include "cardioseg/metrics/metrics.hpp"
#include "cardioseg/postprocess/postprocess.hpp"
#include "support/oracles.hpp"
#include "support/scenes.hpp"

using namespace cardioseg;
using namespace cardioseg::postprocess;

TEST_CASE("connected components: diagonal neighbours") {
  Grid<std::uint8_t> g(3, 3);
  g(0, 0) = g(1, 1) = 1;
  CHECK(connected_components(g, 8).count() == 1);
  CHECK(connected_components(g, 4).count() == 2);
  CHECK_THROWS_AS(connected_components(g, 6), Error);
}

TEST_CASE("connected components match the flood-fill oracle") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    const double density = 0.2 + 0.5 * u(rng);
    Grid<std::uint8_t> g(64, 64);
    for (auto& v : g.data()) v = u(rng) < density;
    for (int conn : {4, 8}) {
      const auto cs = connected_components(g, conn);
      const auto ref = oracle::flood_fill_labels(g.data(), 64, 64, conn);
      REQUIRE(cs.labels == ref);
      std::size_t total = 0;
      for (auto s : cs.sizes) total += s;
      CHECK(total == static_cast<std::size_t>(std::count(g.data().begin(), g.data().end(), 1)));
    }
  }
}

TEST_CASE("component centroids") {
  Grid<std::uint8_t> g(5, 5);
  g(1, 1) = g(1, 2) = g(2, 1) = g(2, 2) = 1;
  const auto cs = connected_components(g);
  REQUIRE(cs.count() == 1);
  CHECK(cs.centroids[0].first == 1.5);
  CHECK(cs.centroids[0].second == 1.5);
}

TEST_CASE("keep_largest_lvc") {
  LabelMask2D m(8, 8);
  for (int c = 0; c < 5; ++c) m(1, c) = 3;
  m(6, 6) = m(6, 7) = 3;
  m(4, 4) = 2;
  m(4, 6) = 2;
  const auto out = keep_largest_lvc(m);
  CHECK(out(6, 6) == 0);
  CHECK(out(6, 7) == 0);
  for (int c = 0; c < 5; ++c) CHECK(out(1, c) == 3);
  CHECK(out(4, 4) == 2);
  CHECK(out(4, 6) == 2);

  LabelMask2D tie(6, 6);
  tie(0, 0) = tie(0, 1) = 3;
  tie(5, 4) = tie(5, 5) = 3;
  const auto t = keep_largest_lvc(tie);
  CHECK(t(0, 0) == 3);
  CHECK(t(5, 5) == 0);

  LabelMask2D none(4, 4, {}, 1);
  CHECK(keep_largest_lvc(none) == none);
}

TEST_CASE("keep_largest_lvc leaves at most one LVC component") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    const auto m = oracle::random_mask(rng, 32, 32, 0.4);
    const auto out = keep_largest_lvc(m);
    CHECK(connected_components(class_indicator(out, ClassId::LVC), 8).count() <= 1);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m.data()[i] != 3) CHECK(out.data()[i] == m.data()[i]);
  }
}

TEST_CASE("filter_distant_rv") {
  PostprocessConfig cfg;
  LabelMask2D m(100, 100, Spacing{1, 1});
  m(50, 50) = 2;
  m(50, 55) = 1;  // 5 mm away
  for (int r = 95; r < 98; ++r) m(r, 2) = 1;  // far away
  const auto out = filter_distant_rv(m, cfg);
  CHECK(out(50, 55) == 1);
  for (int r = 95; r < 98; ++r) CHECK(out(r, 2) == 0);

  LabelMask2D far(100, 100, Spacing{1, 1});
  far(10, 10) = 3;
  far(10, 90) = 1;  // exactly 80 mm
  CHECK(filter_distant_rv(far, cfg)(10, 90) == 0);
  far(10, 40) = 1;  // exactly 30 mm: not beyond the threshold
  CHECK(filter_distant_rv(far, cfg)(10, 40) == 1);

  LabelMask2D rv_only(20, 20);
  rv_only(1, 1) = rv_only(18, 18) = 1;
  CHECK(filter_distant_rv(rv_only, cfg) == rv_only);

  LabelMask2D aniso(10, 10, Spacing{4.0, 1.0});
  aniso(0, 0) = 3;
  aniso(8, 0) = 1;  // 32 mm along rows
  aniso(0, 9) = 1;  // 9 mm along columns
  const auto a = filter_distant_rv(aniso, cfg);
  CHECK(a(8, 0) == 0);
  CHECK(a(0, 9) == 1);
}

TEST_CASE("fill_background_islands") {
  PostprocessConfig cfg;
  auto scene = scenes::defect_scene();
  const auto filled = fill_background_islands(scene.pred, cfg);
  for (auto [r, c] : scene.hole) {
    CHECK(filled(r, c) != 0);
    CHECK(filled(r, c) == oracle::nearest_class(scene.pred, r, c));
  }
  for (std::size_t i = 0; i < filled.size(); ++i)
    if (scene.pred.data()[i]) CHECK(filled.data()[i] == scene.pred.data()[i]);

  LabelMask2D border(6, 6);
  for (int r = 0; r < 6; ++r)
    for (int c = 1; c < 6; ++c) border(r, c) = 2;
  CHECK(fill_background_islands(border, cfg) == border);

  LabelMask2D solid(5, 5, {}, 3);
  CHECK(fill_background_islands(solid, cfg) == solid);

  LabelMask2D big(20, 20, {}, 2);
  for (int r = 5; r < 15; ++r)
    for (int c = 5; c < 15; ++c) big(r, c) = 0;  // 100 pixels > 50
  CHECK(fill_background_islands(big, cfg) == big);
}

TEST_CASE("island filling agrees with the nearest-class oracle on random masks") {
  std::mt19937_64 rng(61);
  PostprocessConfig cfg;
  for (int t = 0; t < 20; ++t) {
    const auto m = oracle::random_mask(rng, 20, 20, 0.7, Spacing{1.0 + 0.1 * t, 1.0});
    const auto out = fill_background_islands(m, cfg);
    const auto comps = connected_components(class_indicator(m, ClassId::Background), 8);
    for (int r = 0; r < 20; ++r)
      for (int c = 0; c < 20; ++c) {
        if (m(r, c)) {
          CHECK(out(r, c) == m(r, c));
          continue;
        }
        const int k = comps.at(r, c);
        bool touches = false;
        for (int rr = 0; rr < 20; ++rr)
          for (int cc = 0; cc < 20; ++cc)
            if (comps.at(rr, cc) == k && (rr == 0 || cc == 0 || rr == 19 || cc == 19)) touches = true;
        const bool fill = !touches && comps.sizes[k - 1] <= 50;
        CHECK(out(r, c) == (fill ? oracle::nearest_class(m, r, c) : 0));
      }
  }
}

TEST_CASE("full postprocess on the defect scene") {
  auto s = scenes::defect_scene();
  const PostprocessConfig cfg;
  const auto out = run_postprocess(s.pred, cfg);
  for (auto [r, c] : s.lvc_island) CHECK(out(r, c) == 0);
  for (auto [r, c] : s.distant_rv) CHECK(out(r, c) == 0);
  for (auto [r, c] : s.near_rv) CHECK(out(r, c) == 1);
  for (auto [r, c] : s.lvm_island) CHECK(out(r, c) == 2);
  for (auto [r, c] : s.hole) CHECK(out(r, c) != 0);
  CHECK(metrics::dice(out, s.truth, ClassId::LVC) > metrics::dice(s.pred, s.truth, ClassId::LVC));
  CHECK(metrics::dice(keep_largest_lvc(s.pred), s.truth, ClassId::LVC) >
        metrics::dice(s.pred, s.truth, ClassId::LVC));

  PostprocessConfig off;
  off.keep_largest_lvc = off.filter_distant_rv = off.fill_islands = false;
  CHECK(run_postprocess(s.pred, off) == s.pred);
  const LabelMask2D empty(16, 16);
  CHECK(run_postprocess(empty, cfg) == empty);
}

TEST_CASE("postprocess config") {
  PostprocessConfig c;
  c.rv_distance_threshold_mm = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.island_max_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  const auto p = PostprocessConfig::from_config(
      Config::parse("[postprocess]\nrv_distance_threshold_mm = 12.5\nfill_islands = false\n"));
  CHECK(p.rv_distance_threshold_mm == 12.5);
  CHECK_FALSE(p.fill_islands);
}
