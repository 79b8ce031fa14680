#include "genplan/flow_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "genplan/errors.hpp"

namespace genplan {

void whitening_stats(const std::vector<Vec4>& data, Vec4& mean, Vec4& stddev) {
  mean.fill(0.0);
  stddev.fill(0.0);
  if (data.empty()) return;
  for (const auto& v : data)
    for (int i = 0; i < kFlowDim; ++i) mean[i] += v[i];
  for (auto& m : mean) m /= static_cast<double>(data.size());
  for (const auto& v : data)
    for (int i = 0; i < kFlowDim; ++i) stddev[i] += (v[i] - mean[i]) * (v[i] - mean[i]);
  for (auto& s : stddev) s = std::max(std::sqrt(s / static_cast<double>(data.size())), 1e-6);
}

FlowModel train_flow(const std::vector<Vec4>& data, const TrainConfig& cfg, TrainReport* report) {
  if (data.size() < 100) throw ParameterError("train_flow needs at least 100 samples");
  if (cfg.batch_size < 1 || cfg.epochs < 1 || !(cfg.learning_rate > 0.0) || cfg.decay_every < 1 ||
      !(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 0.5) || !(cfg.lr_decay > 0.0)) {
    throw ParameterError("train_flow: invalid training configuration");
  }
  for (const auto& v : data)
    for (double c : v)
      if (!std::isfinite(c)) throw ParameterError("train_flow: dataset contains non-finite values");

  Rng rng = make_rng(cfg.seed, Stream::kTrain);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(data.size())));
  std::vector<Vec4> val, train;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? val : train).push_back(data[order[i]]);
  if (static_cast<std::size_t>(cfg.batch_size) > train.size()) {
    throw ParameterError("train_flow: batch size exceeds training split");
  }

  FlowModel model(cfg.arch);
  Vec4 mean, stddev;
  whitening_stats(train, mean, stddev);
  model.set_whitening(mean, stddev);
  model.init_weights(rng);

  const std::vector<Vec4>& monitor = val.empty() ? train : val;
  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = {};
  rep.n_train = train.size();
  rep.n_val = val.size();
  rep.initial_train_nll = model.nll(train);
  rep.initial_val_nll = model.nll(monitor);
  rep.best_val_nll = rep.initial_val_nll;

  FlowModel best = model;
  const std::size_t np = model.n_params();
  std::vector<double> grad(np), m1(np, 0.0), m2(np, 0.0);
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  long adam_t = 0;

  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<Vec4> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch_size));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, epoch / cfg.decay_every);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t start = 0; start + static_cast<std::size_t>(cfg.batch_size) <= idx.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      batch.clear();
      for (std::size_t k = start; k < start + static_cast<std::size_t>(cfg.batch_size); ++k) {
        batch.push_back(train[idx[k]]);
      }
      const double loss = model.nll(batch, grad);
      if (!std::isfinite(loss)) {
        throw RuntimeFailure("flow training diverged at epoch " + std::to_string(epoch) + " (NLL is not finite)");
      }
      if (cfg.grad_clip > 0.0) {
        double norm = 0.0;
        for (double g : grad) norm += g * g;
        norm = std::sqrt(norm);
        if (norm > cfg.grad_clip) {
          const double f = cfg.grad_clip / norm;
          for (double& g : grad) g *= f;
        }
      }
      auto params = model.params();
      if (cfg.optimizer == Optimizer::kSgdMomentum) {
        for (std::size_t i = 0; i < np; ++i) {
          m1[i] = cfg.momentum * m1[i] - lr * grad[i];
          params[i] += m1[i];
        }
      } else {
        ++adam_t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t));
        for (std::size_t i = 0; i < np; ++i) {
          m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
          m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
          params[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + adam_eps);
        }
      }
    }
    const double tr = model.nll(train);
    const double va = model.nll(monitor);
    if (!std::isfinite(tr) || !std::isfinite(va)) {
      throw RuntimeFailure("flow training diverged at epoch " + std::to_string(epoch) + " (NLL is not finite)");
    }
    rep.train_nll.push_back(tr);
    rep.val_nll.push_back(va);
    if (va < rep.best_val_nll) {
      rep.best_val_nll = va;
      rep.best_epoch = epoch;
      best = model;
    }
  }
  return best;
}

}  // namespace genplan
