#include "cardioseg/model/train.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "cardioseg/core/error.hpp"

namespace cardioseg::model {

namespace {

constexpr std::uint64_t kDropoutStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kOrderStream = 0xc2b2ae3d27d4eb4fULL;

struct Example {
  ScalarImage2D image;
  LabelMask2D mask;
  std::set<ClassId> labeled;
};

LossAndGrad run_chunk(const Network& net, std::span<const Example> chunk, double weight_decay,
                      std::mt19937_64& dropout) {
  std::vector<const ScalarImage2D*> imgs;
  std::vector<Target> targets;
  for (const auto& e : chunk) {
    imgs.push_back(&e.image);
    targets.push_back({&e.mask, e.labeled});
  }
  return loss_and_gradients(net, to_batch(imgs), targets, weight_decay, &dropout);
}

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) bad("learning_rate must be >= 0");
  if (!(weight_decay >= 0) || !std::isfinite(weight_decay)) bad("weight_decay must be >= 0");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (max_steps < 0) bad("max_steps must be >= 0");
  if (workers < 1) bad("workers must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_epsilon > 0)) bad("invalid Adam constants");
  augment.validate();
}

TrainConfig TrainConfig::from_config(const Config& cfg, const std::string& section) {
  TrainConfig t;
  auto k = [&](const char* key) { return section + "." + key; };
  t.learning_rate = cfg.get_real(k("learning_rate"), t.learning_rate);
  t.weight_decay = cfg.get_real(k("weight_decay"), t.weight_decay);
  t.batch_size = cfg.get_int(k("batch_size"), t.batch_size);
  t.max_steps = cfg.get_int(k("max_steps"), t.max_steps);
  t.seed = static_cast<std::uint64_t>(cfg.get_int(k("seed"), static_cast<long long>(t.seed)));
  t.augment_enabled = cfg.get_bool(k("augment"), t.augment_enabled);
  t.workers = cfg.get_int(k("workers"), t.workers);
  t.augment = augment::AugmentParams::from_config(cfg, "augment");
  t.validate();
  return t;
}

Tensor to_batch(std::span<const ScalarImage2D* const> images) {
  if (images.empty()) return {};
  const int h = images[0]->height(), w = images[0]->width();
  Tensor t(static_cast<int>(images.size()), 1, h, w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n]->height() != h || images[n]->width() != w)
      throw Error(ErrorCode::ShapeMismatch, "batch images differ in size");
    std::copy(images[n]->pixels().begin(), images[n]->pixels().end(), t.v.begin() + n * t.plane());
  }
  return t;
}

TrainResult train(std::span<const Sample> samples, const NetworkConfig& ncfg, const TrainConfig& tcfg,
                  const StepCallback& on_step) {
  return train_from(build_network(ncfg, tcfg.seed), samples, tcfg, on_step);
}

TrainResult train_from(Network net, std::span<const Sample> samples, const TrainConfig& tcfg,
                       const StepCallback& on_step) {
  tcfg.validate();
  std::vector<const Sample*> pool;
  for (const auto& s : samples)
    if (s.mask) pool.push_back(&s);
  if (pool.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no labeled samples to train on");
  const int h = pool[0]->image.height(), w = pool[0]->image.width();
  const int m = net.cfg.size_multiple();
  for (const auto* s : pool)
    if (s->image.height() != h || s->image.width() != w)
      throw Error(ErrorCode::ShapeMismatch, "training samples differ in size: " + to_string(s->key()));
  if (h % m != 0 || w % m != 0)
    throw Error(ErrorCode::ShapeMismatch,
                "sample size " + std::to_string(h) + "x" + std::to_string(w) + " not a multiple of " + std::to_string(m));

  TrainResult result;
  std::vector<Tensor> m1, m2;
  for (const auto& p : net.params) {
    m1.emplace_back(p.value.n, p.value.c, p.value.h, p.value.w);
    m2.emplace_back(p.value.n, p.value.c, p.value.h, p.value.w);
  }

  std::vector<std::size_t> order(pool.size());
  std::size_t cursor = order.size();
  std::mt19937_64 order_rng(tcfg.seed ^ kOrderStream);
  std::uint64_t draws = 0;
  double b1t = 1, b2t = 1;

  for (int step = 0; step < tcfg.max_steps; ++step) {
    std::vector<Example> batch;
    for (int b = 0; b < tcfg.batch_size; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      const Sample& s = *pool[order[cursor++]];
      Example e{s.image, *s.mask, descriptor_for(s.dataset).labeled_classes};
      if (tcfg.augment_enabled) {
        auto rng = augment::stream_for(tcfg.seed, draws);
        const auto spec = augment::sample_augmentation(rng, tcfg.augment);
        auto [img, msk] = augment::apply_augmentation(e.image, e.mask, spec);
        e.image = std::move(img);
        e.mask = std::move(*msk);
      }
      ++draws;
      batch.push_back(std::move(e));
    }

    const int workers = std::min<int>(tcfg.workers, static_cast<int>(batch.size()));
    LossAndGrad lg;
    if (workers == 1) {
      auto rng = augment::stream_for(tcfg.seed ^ kDropoutStream, static_cast<std::uint64_t>(step));
      lg = run_chunk(net, batch, tcfg.weight_decay, rng);
    } else {
      std::vector<LossAndGrad> parts(workers);
      std::vector<std::thread> threads;
      const std::size_t per = (batch.size() + workers - 1) / workers;
      std::vector<std::exception_ptr> errors(workers);
      int used = 0;
      for (int k = 0; k < workers; ++k) {
        const std::size_t lo = k * per, hi = std::min(batch.size(), lo + per);
        if (lo >= hi) break;
        ++used;
        threads.emplace_back([&, k, lo, hi] {
          try {
            auto rng = augment::stream_for(tcfg.seed ^ kDropoutStream,
                                           static_cast<std::uint64_t>(step) * tcfg.workers + k);
            parts[k] = run_chunk(net, std::span<const Example>(batch).subspan(lo, hi - lo), tcfg.weight_decay, rng);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        });
      }
      for (auto& t : threads) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
      lg = std::move(parts[0]);
      for (int k = 1; k < used; ++k) {
        lg.terms.ce += parts[k].terms.ce;
        lg.terms.dice += parts[k].terms.dice;
        for (std::size_t i = 0; i < lg.grads.size(); ++i)
          for (std::size_t j = 0; j < lg.grads[i].size(); ++j) lg.grads[i].v[j] += parts[k].grads[i].v[j];
      }
      lg.terms.ce /= used;
      lg.terms.dice /= used;
      for (auto& g : lg.grads)
        for (double& v : g.v) v /= used;
    }

    if (!std::isfinite(lg.terms.total()))
      throw Error(ErrorCode::NonFiniteLoss, "loss became non-finite at step " + std::to_string(step));
    StepLog entry{step, lg.terms};
    result.log.push_back(entry);
    if (on_step) on_step(entry);

    b1t *= tcfg.beta1;
    b2t *= tcfg.beta2;
    for (std::size_t i = 0; i < net.params.size(); ++i) {
      auto& p = net.params[i].value.v;
      const auto& g = lg.grads[i].v;
      for (std::size_t j = 0; j < p.size(); ++j) {
        m1[i].v[j] = tcfg.beta1 * m1[i].v[j] + (1 - tcfg.beta1) * g[j];
        m2[i].v[j] = tcfg.beta2 * m2[i].v[j] + (1 - tcfg.beta2) * g[j] * g[j];
        const double mh = m1[i].v[j] / (1 - b1t);
        const double vh = m2[i].v[j] / (1 - b2t);
        p[j] -= tcfg.learning_rate * (mh / (std::sqrt(vh) + tcfg.adam_epsilon));
      }
    }
  }
  result.net = std::move(net);
  return result;
}

}  // namespace cardioseg::model
