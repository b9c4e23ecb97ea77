#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metroflow/model/model.hpp"

namespace metroflow::train {

/// (1/n)·Σ(pred − truth)².
Var mse_loss(Var pred, Var truth);
/// (1/n)·Σ|pred − truth|.
Var mae_loss(Var pred, Var truth);

inline constexpr double kMapeFloor = 1.0;

/// Mean of |pred − truth| / max(truth, 1), in percent.
double mape(std::span<const double> pred, std::span<const double> truth);

/// 0.005 · 0.5^⌊epoch / 200⌋.
double lr_at(int epoch);

// Adam with decoupled weight decay:
//   θ ← θ − lr·(m̂ / (√v̂ + ε) + λθ)
class AdamW {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  AdamW() = default;
  explicit AdamW(double weight_decay) : weight_decay(weight_decay) {}

  /// The parameter list must be the same (and in the same order) on every call.
  void step(const std::vector<Parameter*>& params, double lr);
  long steps() const noexcept { return step_; }

 private:
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  long step_ = 0;
};

struct Split {
  std::vector<int> train_years;
  std::vector<int> val_years;
  std::vector<int> test_years;
  std::uint64_t seed = 0;
};

/// Seeded shuffle of exactly 13 years into 9 / 2 / 2.
Split split_years(const std::vector<int>& years, std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // standardized units, before this epoch's update
  double val_mape = 0.0;    // after this epoch's update
};

struct TrainReport {
  model::RunConfig config;
  Split split;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_mape = 0.0;
  double test_mape = 0.0;

  /// variant,k,task,seed,best_val_mape,test_mape,best_epoch
  static std::string csv_header();
  std::string csv_row() const;
  std::string to_json() const;
};

struct TrainOptions {
  /// Called whenever a year's data is read, with "train", "validation" or "test".
  std::function<void(int year, std::string_view purpose)> on_year_access;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Full-batch training over the training years. Epoch 0 evaluates the
/// initialization; epochs 1..N each apply one AdamW update at lr_at(epoch − 1).
/// The parameters of the best validation epoch are restored and evaluated once
/// on the test years. Non-finite loss throws TrainingError with the epoch.
TrainReport train(model::Model& model, const StationDataset& dataset,
                  const model::RunConfig& config, const Split& split,
                  const TrainOptions& options = {});

/// Validation-style MAPE of the model on the given years, in percent.
double evaluate(model::Model& model, const StationDataset& dataset, Task task,
                const std::vector<int>& years);

}  // namespace metroflow::train
