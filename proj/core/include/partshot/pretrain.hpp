#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "partshot/dataset.hpp"
#include "partshot/encoder.hpp"
#include "partshot/errors.hpp"
#include "partshot/momentum.hpp"
#include "partshot/negative_queue.hpp"
#include "partshot/views.hpp"

namespace partshot {

/// What the online encoder contrasts against the global view.
///   select_best   - the single part farthest from the negative queue
///   use_all_parts - every part, loss averaged over parts
///   global_pair   - a second global crop instead of parts (no part mining)
enum class SelectionMode { select_best, use_all_parts, global_pair };

/// Which encoder embeds the positive (global) view in the loss.
enum class PositiveEncoder { momentum, online };

std::string to_string(SelectionMode mode);
SelectionMode selection_mode_from_string(const std::string& name);
std::string to_string(PositiveEncoder which);
PositiveEncoder positive_encoder_from_string(const std::string& name);

struct PdnConfig {
  int n_parts = 6;
  double temperature = 0.2;
  double momentum = 0.999;
  std::size_t queue_capacity = 1024;
  double learning_rate = 0.015;
  double sgd_momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 100;
  int batch_size = 64;
  SelectionMode selection = SelectionMode::select_best;
  PositiveEncoder positive = PositiveEncoder::momentum;

  void validate() const;
};

struct TrainLogRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double loss = 0.0;
  double learning_rate = 0.0;
  std::size_t queue_fill = 0;
  std::vector<int> selected_histogram;  // one bin per part index
};

struct PretrainResult {
  EncoderParams online;
  MomentumEncoder momentum;
  NegativeQueue queue;
  std::vector<TrainLogRecord> log;
  std::int64_t steps = 0;
};

struct PretrainHooks {
  std::function<void(const TrainLogRecord&)> on_step;
  std::function<void(int epoch, const PretrainResult&)> on_epoch_end;
};

/// Raised when the loss becomes non-finite; the message carries batch stats.
class TrainingAborted : public Error {
 public:
  using Error::Error;
};

/// Cosine decay from `base` to zero over `total` steps.
double cosine_learning_rate(double base, std::int64_t step, std::int64_t total);

/// Self-supervised pretraining on the base split. Labels are locked for the
/// whole call. Before the first optimizer step the queue is filled with
/// ceil(capacity / batch) batches of momentum-encoder global embeddings.
PretrainResult pretrain(const DatasetHandle& dataset, const EncoderSpec& encoder, const ViewConfig& views,
                        const PdnConfig& config, std::uint64_t seed, const PretrainHooks& hooks = {});

}  // namespace partshot
