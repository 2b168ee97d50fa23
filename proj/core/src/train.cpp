#include "dfeia/train.hpp"

#include <cmath>

#include "dfeia/image.hpp"
#include "dfeia/ops.hpp"

namespace dfeia {

static Tensor<float> stack_batch(const std::vector<Tensor<float>>& items) {
  const Shape& s = items[0].shape();  // [3,S,S]
  Tensor<float> out({static_cast<int64_t>(items.size()), s[0], s[1], s[2]});
  float* po = out.mut();
  const int64_t stride = s[0] * s[1] * s[2];
  for (size_t i = 0; i < items.size(); ++i) {
    std::copy(items[i].data(), items[i].data() + stride, po + static_cast<int64_t>(i) * stride);
  }
  return out;
}

MetricsReport evaluate(const Model<float>& model, const Dataset& dataset, Split split) {
  const auto& items = dataset.split(split);
  if (items.empty()) throw UsageError("evaluate: split is empty");

  ConfusionCounts counts(dataset.num_classes());
  Rng unused(0);
  for (const auto& item : items) {
    ImageU8 img = decode_image(item.path);
    Tensor<float> x = preprocess(img, model.config.input_size, false, unused);
    Tensor<float> logits =
        model.forward(x.reshaped({1, 3, model.config.input_size, model.config.input_size}));
    const float* row = logits.data();
    int best = 0;
    for (int64_t k = 1; k < logits.dim(1); ++k) {
      if (row[k] > row[best]) best = static_cast<int>(k);
    }
    counts.add(item.label, best);
  }
  return compute_metrics(counts, dataset.class_names);
}

std::vector<EpochLog> train(Model<float>& model, const Dataset& dataset, const TrainOptions& opts,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  if (dataset.train.empty()) throw UsageError("train: empty training split");
  if (dataset.num_classes() < 2) throw UsageError("train: need at least 2 classes");
  if (static_cast<int64_t>(dataset.num_classes()) != model.config.num_classes) {
    throw ConfigError("train: dataset has " + std::to_string(dataset.num_classes()) +
                      " classes but the model expects " + std::to_string(model.config.num_classes));
  }

  std::vector<EpochLog> log;
  if (opts.epochs <= 0) return log;

  auto params = model.parameters();
  AdamWOptions aopts;
  aopts.lr = opts.lr;
  aopts.weight_decay = opts.weight_decay;
  AdamW<float> optimizer(params, aopts);

  const int64_t steps_per_epoch =
      (static_cast<int64_t>(dataset.train.size()) + opts.batch_size - 1) / opts.batch_size;
  const int64_t total_steps = steps_per_epoch * opts.epochs;

  int64_t step = 0;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::vector<size_t> order(dataset.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(mix_seed(opts.seed, static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    Rng flip_rng(mix_seed(opts.seed ^ 0x5a5a5a5aULL, static_cast<uint64_t>(epoch)));

    double loss_sum = 0;
    int64_t batches = 0;
    for (size_t start = 0; start < order.size(); start += opts.batch_size) {
      const size_t end = std::min(order.size(), start + opts.batch_size);
      std::vector<Tensor<float>> inputs;
      std::vector<int> labels;
      inputs.reserve(end - start);
      for (size_t i = start; i < end; ++i) {
        const DatasetItem& item = dataset.train[order[i]];
        ImageU8 img = decode_image(item.path);
        inputs.push_back(preprocess(img, model.config.input_size, true, flip_rng));
        labels.push_back(item.label);
      }

      const double lr =
          opts.schedule == LrSchedule::cosine
              ? opts.lr * 0.5 *
                    (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total_steps)))
              : opts.lr;

      Tape<float> tape;
      Var<float> x = tape.constant(stack_batch(inputs));
      Var<float> logits = model.forward(tape, x);
      Var<float> loss = ops::cross_entropy(tape, logits, labels);

      model.zero_grad();
      tape.backward(loss);
      optimizer.step(params, lr);

      loss_sum += static_cast<double>(loss.value().data()[0]);
      ++batches;
      ++step;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(batches);
    if (opts.eval_each_epoch && !dataset.test.empty()) {
      entry.test_acc = evaluate(model, dataset, Split::test).accuracy;
    }
    if (on_epoch) on_epoch(entry);
    log.push_back(entry);
  }
  return log;
}

}  // namespace dfeia
