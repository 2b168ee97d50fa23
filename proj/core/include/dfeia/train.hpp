#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dfeia/dataset.hpp"
#include "dfeia/metrics.hpp"
#include "dfeia/network.hpp"
#include "dfeia/optim.hpp"

namespace dfeia {

enum class LrSchedule { cosine, constant };

struct TrainOptions {
  int epochs = 400;
  int batch_size = 16;
  double lr = 0.0005;
  double weight_decay = 0.05;
  uint64_t seed = 0;
  LrSchedule schedule = LrSchedule::cosine;
  bool eval_each_epoch = true;
};

struct EpochLog {
  int epoch = 0;         // 1-based
  double train_loss = 0; // mean over the epoch's steps
  double test_acc = 0;   // top-1 on the test split (NaN-free: 0 when skipped)
};

// Argmax predictions over a dataset split, reduced to the metric report.
MetricsReport evaluate(const Model<float>& model, const Dataset& dataset, Split split);

// Seeded, single-threaded training loop: per epoch the train items are
// reshuffled, batched, preprocessed (train-mode flips), and stepped with
// AdamW under the chosen schedule (cosine decays lr to 0 over all steps).
// Fully deterministic for a fixed seed.
std::vector<EpochLog> train(Model<float>& model, const Dataset& dataset, const TrainOptions& opts,
                            const std::function<void(const EpochLog&)>& on_epoch = nullptr);

}  // namespace dfeia
