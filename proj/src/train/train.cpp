#include "metroflow/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "json.hpp"
#include "metroflow/error.hpp"
#include "metroflow/util/csv.hpp"

namespace metroflow::train {
namespace {

struct Stacked {
  Tensor features;
  Tensor target;
};

Stacked stack_years(const StationDataset& dataset, Task task, const std::vector<int>& years,
                    const TrainOptions& options, std::string_view purpose) {
  const std::size_t n = dataset.num_stations();
  Stacked s{Tensor(n * years.size(), kNumFeatures), Tensor(n * years.size(), 1)};
  for (std::size_t b = 0; b < years.size(); ++b) {
    if (options.on_year_access) options.on_year_access(years[b], purpose);
    const TaskMatrix m = build_task(dataset, years[b], task);
    std::copy(m.features.values().begin(), m.features.values().end(),
              s.features.data() + b * n * kNumFeatures);
    std::copy(m.target.values().begin(), m.target.values().end(), s.target.data() + b * n);
  }
  return s;
}

double stacked_mape(model::Model& model, const Stacked& data) {
  Tape tape(false);
  const Var out = model.forward(tape, tape.constant(model.feature_scaler().apply(data.features)));
  const Tensor pred = model.target_scaler().invert(out.value());
  return mape(pred.values(), data.target.values());
}

void check_pair(Var pred, Var truth, const char* op) {
  if (!pred.value().same_shape(truth.value())) {
    fail(ErrorCategory::shape, std::string(op) + ": prediction " + pred.value().shape_string() +
                                   " vs truth " + truth.value().shape_string());
  }
}

}  // namespace

Var mse_loss(Var pred, Var truth) {
  check_pair(pred, truth, "mse_loss");
  const Var d = ad::sub(pred, truth);
  return ad::mean(ad::mul(d, d));
}

Var mae_loss(Var pred, Var truth) {
  check_pair(pred, truth, "mae_loss");
  return ad::mean(ad::abs(ad::sub(pred, truth)));
}

double mape(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    fail(ErrorCategory::shape, "mape: " + std::to_string(pred.size()) + " predictions vs " +
                                   std::to_string(truth.size()) + " targets");
  }
  if (pred.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    total += std::fabs(pred[i] - truth[i]) / std::max(truth[i], kMapeFloor);
  }
  return 100.0 * total / static_cast<double>(pred.size());
}

double lr_at(int epoch) {
  if (epoch < 0) fail(ErrorCategory::contract, "epoch must be nonnegative");
  return 0.005 * std::ldexp(1.0, -(epoch / 200));
}

void AdamW::step(const std::vector<Parameter*>& params, double lr) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.push_back(Tensor::zeros_like(p->value));
      v_.push_back(Tensor::zeros_like(p->value));
    }
  }
  if (m_.size() != params.size()) {
    fail(ErrorCategory::contract, "optimizer parameter list changed between steps");
  }
  ++step_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    double* theta = p.value.data();
    const double* g = p.grad.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      theta[j] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + weight_decay * theta[j]);
    }
  }
}

Split split_years(const std::vector<int>& years, std::uint64_t seed) {
  if (years.size() != 13) {
    fail(ErrorCategory::contract,
         "split needs exactly 13 years, got " + std::to_string(years.size()));
  }
  std::vector<int> sorted = years;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    fail(ErrorCategory::contract, "split years must be distinct");
  }
  std::mt19937_64 rng(seed);
  // Fisher-Yates with explicit draws.
  for (std::size_t i = sorted.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(sorted[i], sorted[j]);
  }
  Split s;
  s.seed = seed;
  s.train_years.assign(sorted.begin(), sorted.begin() + 9);
  s.val_years.assign(sorted.begin() + 9, sorted.begin() + 11);
  s.test_years.assign(sorted.begin() + 11, sorted.end());
  for (auto* part : {&s.train_years, &s.val_years, &s.test_years}) std::sort(part->begin(), part->end());
  return s;
}

TrainReport train(model::Model& model, const StationDataset& dataset,
                  const model::RunConfig& config, const Split& split,
                  const TrainOptions& options) {
  if (split.train_years.empty() || split.val_years.empty()) {
    fail(ErrorCategory::contract, "training needs nonempty training and validation years");
  }
  if (config.epochs < 0) fail(ErrorCategory::contract, "epochs must be nonnegative");
  const Task task = config.task;
  const Stacked train_data = stack_years(dataset, task, split.train_years, options, "train");
  model.feature_scaler() = model::Standardizer::fit(train_data.features);
  model.target_scaler() = model::Standardizer::fit(train_data.target);
  model.set_trained_task(task);
  const Tensor train_x = model.feature_scaler().apply(train_data.features);
  const Tensor train_y = model.target_scaler().apply(train_data.target);
  const Stacked val_data = stack_years(dataset, task, split.val_years, options, "validation");

  TrainReport report;
  report.config = config;
  report.split = split;

  const auto params = model.parameters();
  auto loss_of = [&](Tape& tape) {
    const Var pred = model.forward(tape, tape.constant(train_x));
    const Var truth = tape.constant(train_y);
    return config.loss == model::Loss::mse ? mse_loss(pred, truth) : mae_loss(pred, truth);
  };
  auto snapshot = [&] {
    std::vector<Tensor> values;
    values.reserve(params.size());
    for (const Parameter* p : params) values.push_back(p->value);
    return values;
  };
  auto record = [&](const EpochRecord& r) {
    report.history.push_back(r);
    if (options.on_epoch) options.on_epoch(r);
  };

  double initial_loss = 0.0;
  {
    Tape tape(false);
    initial_loss = loss_of(tape).value()(0, 0);
  }
  if (!std::isfinite(initial_loss)) throw TrainingError(0, "non-finite loss at initialization");
  record({0, initial_loss, stacked_mape(model, val_data)});
  report.best_epoch = 0;
  report.best_val_mape = report.history.back().val_mape;
  std::vector<Tensor> best = snapshot();

  AdamW optimizer;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (Parameter* p : params) p->zero_grad();
    double loss_value = 0.0;
    {
      Tape tape;
      const Var loss = loss_of(tape);
      loss_value = loss.value()(0, 0);
      if (!std::isfinite(loss_value)) {
        throw TrainingError(epoch, "non-finite training loss at epoch " + std::to_string(epoch));
      }
      tape.backward(loss);
    }
    optimizer.step(params, lr_at(epoch - 1));
    const double val = stacked_mape(model, val_data);
    if (!std::isfinite(val)) {
      throw TrainingError(epoch, "non-finite validation error at epoch " + std::to_string(epoch));
    }
    record({epoch, loss_value, val});
    if (val < report.best_val_mape) {
      report.best_val_mape = val;
      report.best_epoch = epoch;
      best = snapshot();
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];

  if (!split.test_years.empty()) {
    const Stacked test_data = stack_years(dataset, task, split.test_years, options, "test");
    report.test_mape = stacked_mape(model, test_data);
  }
  return report;
}

double evaluate(model::Model& model, const StationDataset& dataset, Task task,
                const std::vector<int>& years) {
  return stacked_mape(model, stack_years(dataset, task, years, {}, "evaluate"));
}

std::string TrainReport::csv_header() {
  return "variant,k,task,seed,best_val_mape,test_mape,best_epoch";
}

std::string TrainReport::csv_row() const {
  return std::string(model::to_string(config.model.variant)) + "," +
         std::to_string(config.model.k) + "," + config.task.name() + "," +
         std::to_string(config.model.seed) + "," + csv::format_double(best_val_mape) + "," +
         csv::format_double(test_mape) + "," + std::to_string(best_epoch);
}

std::string TrainReport::to_json() const {
  nlohmann::ordered_json j;
  const auto& m = config.model;
  j["variant"] = model::to_string(m.variant);
  j["k"] = m.k;
  if (m.sampling_rate) {
    j["sampling_rate"] = *m.sampling_rate;
  } else {
    j["sampling_rate"] = nullptr;
  }
  j["layers"] = m.num_layers;
  j["task"] = config.task.name();
  j["seed"] = m.seed;
  j["epochs"] = config.epochs;
  j["loss"] = model::to_string(config.loss);
  j["split"] = {{"train", split.train_years}, {"validation", split.val_years},
                {"test", split.test_years}};
  j["best_epoch"] = best_epoch;
  j["best_val_mape"] = best_val_mape;
  j["test_mape"] = test_mape;
  auto& hist = j["history"] = nlohmann::ordered_json::array();
  for (const auto& r : history) {
    hist.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_mape", r.val_mape}});
  }
  return j.dump(2);
}

}  // namespace metroflow::train
