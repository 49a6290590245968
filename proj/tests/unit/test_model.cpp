#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cardioseg/core/sample_store.hpp"
#include "cardioseg/model/loss.hpp"
#include "cardioseg/model/predict.hpp"
#include "cardioseg/model/train.hpp"
#include "support/phantoms.hpp"
#include "support/tempdir.hpp"

using namespace cardioseg;
using namespace cardioseg::model;

namespace {

NetworkConfig tiny(int levels = 3, int base = 2, int size = 16) {
  NetworkConfig c;
  c.levels = levels;
  c.base_filters = base;
  c.input_size = size;
  return c;
}

Tensor noise_batch(int n, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor t(n, 1, size, size);
  for (double& v : t.v) v = u(rng);
  return t;
}

// Parameter count from the architecture description alone.
std::size_t expected_params(int L, int b, int classes, int ds) {
  auto conv = [](std::size_t k, std::size_t cin, std::size_t cout) { return k * k * cin * cout + cout; };
  auto norm = [](std::size_t c) { return 2 * c; };
  std::size_t total = 0;
  for (int l = 0; l < L; ++l) {
    const std::size_t f = static_cast<std::size_t>(b) << l;
    total += l == 0 ? conv(3, 1, f) : conv(3, f / 2, f);
    total += 2 * norm(f) + 2 * conv(3, f, f);
  }
  for (int l = L - 2; l >= 0; --l) {
    const std::size_t f = static_cast<std::size_t>(b) << l;
    total += conv(3, 2 * f, f) + norm(f) + conv(3, 2 * f, 2 * f) + norm(2 * f) + conv(1, 2 * f, f) + norm(f);
    if (l < std::min(ds, L - 1)) total += conv(1, f, classes);
  }
  return total;
}

std::vector<Sample> phantom_set(int n, int size) { return phantoms::disks(n, size, 5); }

}  // namespace

TEST_CASE("parameter count for the smallest network, derived by hand") {
  // levels 2, base 1, 2 classes
  // ctx0: in 3x3 1->1 (10), norm (2), conv 1->1 (10), norm (2), conv 1->1 (10)        = 34
  // ctx1: down 3x3 1->2 (20), norm (4), conv 2->2 (38), norm (4), conv 2->2 (38)      = 104
  // loc0: up 3x3 2->1 (19), norm (2), conv3 2->2 (38), norm (4), 1x1 2->1 (3), norm (2) = 68
  // head0: 1x1 1->2 (4)
  NetworkConfig c = tiny(2, 1, 8);
  c.classes = 2;
  const auto net = build_network(c);
  CHECK(net.param_count() == 34 + 104 + 68 + 4);
  CHECK(net.stored_param_count() == net.param_count());
}

TEST_CASE("parameter count matches the architecture formula") {
  for (int L : {2, 3, 4, 5})
    for (int b : {1, 2, 4})
      for (int ds : {1, 3}) {
        NetworkConfig c = tiny(L, b, 1 << (L - 1));
        c.deep_supervision_levels = ds;
        const auto net = build_network(c);
        CHECK(net.param_count() == expected_params(L, b, 4, ds));
        CHECK(net.stored_param_count() == net.param_count());
      }
  MESSAGE("default configuration: " << build_network(NetworkConfig{}).param_count()
                                    << " parameters (reference architecture: 2,770,825)");
}

TEST_CASE("upscaling convs halve the feature count") {
  const auto net = build_network(tiny(4, 3, 8));
  int seen = 0;
  for (const auto& l : net.layers)
    if (l.name.size() > 3 && l.name.ends_with(".up")) {
      CHECK(l.out_channels * 2 == l.in_channels);
      ++seen;
    }
  CHECK(seen == 3);
}

TEST_CASE("network config validation") {
  NetworkConfig c;
  c.levels = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.input_size = 100;  // not a multiple of 16
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("InvalidConfig"), Error);
  c = {};
  c.dropout_rate = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("forward shape and softmax") {
  const auto net = build_network(tiny(3, 2, 16), 1);
  auto x = noise_batch(2, 16, 3);
  std::copy(x.v.begin(), x.v.begin() + 256, x.v.begin() + 256);  // second image = first
  const auto p = forward(net, x);
  CHECK(p.n == 2);
  CHECK(p.c == 4);
  CHECK(p.h == 16);
  CHECK(p.w == 16);
  for (int y = 0; y < 16; ++y)
    for (int xx = 0; xx < 16; ++xx) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += p.at(0, k, y, xx);
      CHECK(std::abs(s - 1) <= 1e-6);
      for (int k = 0; k < 4; ++k) CHECK(p.at(0, k, y, xx) == p.at(1, k, y, xx));
    }
  CHECK(forward(net, x).v == p.v);
  CHECK_THROWS_WITH_AS(forward(net, noise_batch(1, 18, 1)), doctest::Contains("ShapeMismatch"), Error);
  CHECK_THROWS_AS(forward(net, Tensor(1, 2, 16, 16)), Error);
}

TEST_CASE("zeroed heads give uniform probabilities") {
  auto net = build_network(tiny(3, 2, 16), 2);
  for (auto& p : net.params)
    if (p.name.starts_with("head")) std::fill(p.value.v.begin(), p.value.v.end(), 0.0);
  const auto p = forward(net, noise_batch(1, 16, 4));
  for (double v : p.v) CHECK(v == 0.25);
}

TEST_CASE("one network, several input sizes") {
  const auto net = build_network(tiny(3, 2, 16), 3);
  for (int s : {8, 16, 32, 40}) {
    const auto p = forward(net, noise_batch(1, s, 5));
    CHECK(p.h == s);
    CHECK(p.w == s);
  }
}

TEST_CASE("loss on ideal and uniform predictions") {
  LabelMask2D m(4, 4);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = static_cast<std::uint8_t>(i % 4);
  const std::vector<Target> t{{&m}};
  Tensor perfect(1, 4, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) perfect.at(0, m(y, x), y, x) = 1.0;
  const auto a = loss_from_probs(perfect, t);
  CHECK(a.ce == doctest::Approx(0.0));
  CHECK(a.dice == doctest::Approx(0.0).epsilon(1e-6));

  const Tensor uniform(1, 4, 4, 4, 0.25);
  CHECK(loss_from_probs(uniform, t).ce == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(loss_from_logits(Tensor(1, 4, 4, 4), t, nullptr).ce == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  const auto net = build_network(tiny(2, 1, 4));
  double sq = 0;
  for (const auto& p : net.params)
    if (p.kind == ParamKind::ConvWeight)
      for (double v : p.value.v) sq += v * v;
  CHECK(l2_penalty(net, 5e-6) == doctest::Approx(5e-6 * sq));
}

TEST_CASE("masked loss ignores classes the target does not label") {
  LabelMask2D rv_only(4, 4);
  rv_only(0, 0) = 1;
  const std::vector<Target> t{{&rv_only, {ClassId::RV}}};
  // predicting LVC where the truth says background costs nothing extra
  Tensor a(1, 4, 4, 4), b(1, 4, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      const int cls = rv_only(y, x);
      a.at(0, cls, y, x) = 1.0;
      b.at(0, cls == 0 ? 3 : cls, y, x) = 1.0;
    }
  const auto la = loss_from_probs(a, t), lb = loss_from_probs(b, t);
  CHECK(la.ce == doctest::Approx(lb.ce));
  CHECK(la.dice == doctest::Approx(lb.dice));
}

TEST_CASE("analytic gradients match central differences") {
  NetworkConfig c = tiny(2, 2, 8);
  c.deep_supervision_levels = 1;
  auto net = build_network(c, 7);
  std::mt19937_64 r(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& p : net.params)
    if (p.kind != ParamKind::ConvWeight)
      for (double& v : p.value.v) v += 0.3 * u(r);
  const Tensor x = noise_batch(2, 8, 9);
  std::vector<LabelMask2D> m(2, LabelMask2D(8, 8));
  for (auto& mm : m)
    for (auto& v : mm.data()) v = static_cast<std::uint8_t>(r() % 4);
  const std::vector<Target> t{{&m[0]}, {&m[1], {ClassId::RV}}};
  const double wd = 1e-2;
  auto fixed = [] { return std::mt19937_64(11); };

  auto r0 = fixed();
  const auto lg = loss_and_gradients(net, x, t, wd, &r0);
  double worst = 0;
  for (std::size_t i = 0; i < net.params.size(); ++i)
    for (std::size_t j = 0; j < net.params[i].value.size(); ++j) {
      double& w = net.params[i].value.v[j];
      const double w0 = w, h = 1e-5;
      w = w0 + h;
      auto r1 = fixed();
      const double lp = loss_and_gradients(net, x, t, wd, &r1).terms.total();
      w = w0 - h;
      auto r2 = fixed();
      const double lm = loss_and_gradients(net, x, t, wd, &r2).terms.total();
      w = w0;
      const double num = (lp - lm) / (2 * h), ana = lg.grads[i].v[j];
      worst = std::max(worst, std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-7}));
    }
  CHECK(worst <= 1e-3);
}

TEST_CASE("training contracts") {
  const auto data = phantom_set(4, 16);
  const NetworkConfig nc = tiny(3, 2, 16);
  TrainConfig tc;
  tc.batch_size = 2;
  tc.seed = 3;

  SUBCASE("zero steps returns the initial network") {
    tc.max_steps = 0;
    const auto res = train(data, nc, tc);
    const auto init = build_network(nc, tc.seed);
    for (std::size_t i = 0; i < init.params.size(); ++i) CHECK(res.net.params[i].value.v == init.params[i].value.v);
    CHECK(res.log.empty());
  }
  SUBCASE("zero learning rate leaves parameters bit-identical") {
    tc.max_steps = 3;
    tc.learning_rate = 0;
    const auto res = train(data, nc, tc);
    const auto init = build_network(nc, tc.seed);
    for (std::size_t i = 0; i < init.params.size(); ++i) CHECK(res.net.params[i].value.v == init.params[i].value.v);
    CHECK(res.log.size() == 3);
  }
  SUBCASE("same seed, same run; loss goes down") {
    tc.max_steps = 25;
    tc.learning_rate = 3e-3;
    const auto a = train(data, nc, tc), b = train(data, nc, tc);
    for (std::size_t i = 0; i < a.net.params.size(); ++i) CHECK(a.net.params[i].value.v == b.net.params[i].value.v);
    CHECK(a.log.back().terms.total() < a.log.front().terms.total());
  }
  SUBCASE("worker threads average sub-batch gradients") {
    tc.max_steps = 2;
    tc.workers = 2;
    CHECK(train(data, nc, tc).log.size() == 2);
  }
  SUBCASE("nothing labeled") {
    auto unlabeled = data;
    for (auto& s : unlabeled) s.mask.reset();
    CHECK_THROWS_WITH_AS(train(unlabeled, nc, tc), doctest::Contains("EmptyTrainingSet"), Error);
  }
  SUBCASE("non-finite input aborts with the step") {
    auto bad = data;
    for (auto& s : bad) s.image(0, 0) = std::numeric_limits<double>::quiet_NaN();
    tc.max_steps = 2;
    CHECK_THROWS_WITH_AS(train(bad, nc, tc), doctest::Contains("step 0"), Error);
  }
  SUBCASE("wrong size") {
    CHECK_THROWS_AS(train(phantom_set(2, 18), nc, tc), Error);
  }
}

TEST_CASE("argmax prediction") {
  const Tensor uniform(1, 4, 3, 5, 0.25);
  const auto m = argmax_mask(uniform, 0, Spacing{1.5, 1.5});
  CHECK(m.height() == 3);
  CHECK(m.width() == 5);
  CHECK(m.spacing() == Spacing{1.5, 1.5});
  for (auto v : m.data()) CHECK(v == 0);

  Tensor disk(1, 4, 9, 9, 0.1);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x)
      if ((y - 4) * (y - 4) + (x - 4) * (x - 4) <= 4) disk.at(0, 3, y, x) = 0.7;
  const auto d = argmax_mask(disk, 0, {});
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) CHECK((d(y, x) == 3) == ((y - 4) * (y - 4) + (x - 4) * (x - 4) <= 4));

  const auto net = build_network(tiny(3, 2, 16));
  const auto s = phantom_set(1, 16)[0];
  const auto p = predict(net, s);
  CHECK(p.height() == 16);
  CHECK(p.spacing() == s.image.spacing());
}

TEST_CASE("checkpoint round trip") {
  const auto net = build_network(tiny(3, 2, 16), 21);
  const Bytes b = encode_checkpoint(net);
  const auto back = decode_checkpoint(b);
  CHECK(back.cfg.levels == 3);
  CHECK(back.cfg.base_filters == 2);
  REQUIRE(back.params.size() == net.params.size());
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    CHECK(back.params[i].name == net.params[i].name);
    CHECK(back.params[i].value.v == net.params[i].value.v);
  }
  Bytes bad = b;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad), doctest::Contains("BadMagic"), Error);
  Bytes cut(b.begin(), b.end() - 8);
  CHECK_THROWS_AS(decode_checkpoint(cut), Error);
}

TEST_CASE("external predictions") {
  testing_support::TempDir dir;
  LocalStorage store(dir.path());
  const auto net = build_network(tiny(3, 2, 16), 1);
  const auto samples = phantom_set(3, 16);
  const auto preds = predict_all(net, samples);
  write_mask_set(store, "pred", preds);
  const auto back = load_external_predictions(store, "pred");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].key == preds[i].key);
    CHECK(back[i].mask == preds[i].mask);
  }

  std::filesystem::create_directories(dir / "empty");
  CHECK(load_external_predictions(store, "empty").empty());

  std::set<SampleKey> known{preds[0].key};
  CHECK_THROWS_WITH_AS(load_external_predictions(store, "pred", &known), doctest::Contains("UnknownKey"), Error);

  auto broken = preds;
  broken[0].mask.data()[0] = 7;
  write_mask_set(store, "broken", broken);
  CHECK_THROWS_WITH_AS(load_external_predictions(store, "broken"), doctest::Contains("InvalidMask"), Error);
}
