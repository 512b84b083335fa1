#include "partshot/pretrain.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "partshot/contrastive.hpp"
#include "partshot/part_selection.hpp"
#include "partshot/rng.hpp"

namespace partshot {

std::string to_string(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::select_best: return "select_best";
    case SelectionMode::use_all_parts: return "use_all_parts";
    case SelectionMode::global_pair: return "global_pair";
  }
  return "select_best";
}

SelectionMode selection_mode_from_string(const std::string& name) {
  if (name == "select_best") return SelectionMode::select_best;
  if (name == "use_all_parts") return SelectionMode::use_all_parts;
  if (name == "global_pair") return SelectionMode::global_pair;
  throw Error("unknown selection mode '" + name + "'");
}

std::string to_string(PositiveEncoder which) { return which == PositiveEncoder::momentum ? "momentum" : "online"; }

PositiveEncoder positive_encoder_from_string(const std::string& name) {
  if (name == "momentum") return PositiveEncoder::momentum;
  if (name == "online") return PositiveEncoder::online;
  throw Error("unknown positive encoder '" + name + "'");
}

void PdnConfig::validate() const {
  if (!(temperature > 0.0)) throw Error("temperature must be positive");
  if (n_parts < 1) throw Error("n_parts must be >= 1");
  if (momentum < 0.0 || momentum > 1.0) throw Error("momentum must lie in [0, 1]");
  if (batch_size < 1) throw Error("batch_size must be positive");
  if (queue_capacity < static_cast<std::size_t>(batch_size)) throw Error("queue capacity must be >= batch size");
  if (epochs < 0) throw Error("epochs must be non-negative");
}

double cosine_learning_rate(double base, std::int64_t step, std::int64_t total) {
  if (total <= 0) return base;
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

namespace {

constexpr float kRunningStatRate = 0.1f;

struct Sgd {
  std::vector<FloatBuffer> velocity;

  explicit Sgd(const EncoderParams& p) {
    for (const auto& t : p.tensors) velocity.emplace_back(t.data.size(), 0.0f);
  }

  void step(EncoderParams& p, const Gradients& g, double lr, double mu, double wd) {
    const float flr = static_cast<float>(lr), fmu = static_cast<float>(mu), fwd = static_cast<float>(wd);
    for (std::size_t t = 0; t < p.tensors.size(); ++t) {
      if (!p.tensors[t].trainable) continue;
      auto& w = p.tensors[t].data;
      auto& v = velocity[t];
      const auto& d = g.buffers[t];
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = fmu * v[i] + d[i] + fwd * w[i];
        w[i] -= flr * v[i];
      }
    }
  }
};

std::string batch_diagnostics(double loss, const RowMatrix& queries, const RowMatrix& positives,
                              const NegativeQueue& queue) {
  std::ostringstream os;
  os << "non-finite contrastive loss (" << loss << "); batch stats: queries=" << queries.rows()
     << " query_norm_mean=" << queries.rowwise().norm().mean() << " positive_norm_mean="
     << positives.rowwise().norm().mean() << " queue_fill=" << queue.filled()
     << " query_has_nan=" << (!queries.allFinite()) << " positive_has_nan=" << (!positives.allFinite());
  return os.str();
}

}  // namespace

PretrainResult pretrain(const DatasetHandle& dataset, const EncoderSpec& encoder, const ViewConfig& view_config,
                        const PdnConfig& config, std::uint64_t seed, const PretrainHooks& hooks) {
  config.validate();
  const LabelLock label_guard = dataset.lock_labels();

  ViewConfig views = view_config;
  views.output_side = encoder.input_side;
  views.n_parts = config.n_parts;
  if (config.selection == SelectionMode::global_pair) {
    views.n_parts = 1;
    views.part_scale = views.global_scale;
  }

  EncoderParams online = EncoderParams::initialize(encoder, seed);
  PretrainResult result{online, MomentumEncoder::copy_of(online, config.momentum),
                        NegativeQueue(config.queue_capacity, encoder.embed_dim), {}, 0};
  if (config.epochs == 0) return result;

  const std::vector<std::size_t>& pool = dataset.indices(Split::base);
  if (pool.empty()) throw DataError("pretraining needs a non-empty base split");
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), pool.size());
  const std::size_t batches_per_epoch = (pool.size() + batch - 1) / batch;
  const std::int64_t total_steps = static_cast<std::int64_t>(batches_per_epoch) * config.epochs;

  auto epoch_order = [&](int epoch) {
    std::vector<std::size_t> order = pool;
    Rng rng = make_rng(derive_seed(seed, "order", {static_cast<std::uint64_t>(epoch + 1)}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    return order;
  };
  auto make_views = [&](std::size_t image, int epoch) {
    return generate_views(dataset.image(image), views,
                          derive_seed(seed, "views", {image, static_cast<std::uint64_t>(epoch + 1)}));
  };

  // Queue warm-up from momentum-encoder global views ("epoch" -1 seeds).
  {
    const std::vector<std::size_t> order = epoch_order(-1);
    const std::size_t warm_batches = (config.queue_capacity + batch - 1) / batch;
    std::size_t cursor = 0;
    for (std::size_t wb = 0; wb < warm_batches; ++wb) {
      std::vector<Image> globals;
      for (std::size_t k = 0; k < batch; ++k) {
        globals.push_back(make_views(order[cursor % order.size()], -1).global_view);
        ++cursor;
      }
      result.queue.enqueue(encode(result.momentum.params, globals, NormStats::batch));
    }
  }

  Sgd sgd(result.online);
  Gradients grads = Gradients::zeros_like(result.online);
  EncoderTape tape;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(epoch);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      std::vector<ViewSet> sets;
      sets.reserve(count);
      std::vector<Image> globals;
      for (std::size_t k = 0; k < count; ++k) {
        sets.push_back(make_views(order[start + k], epoch));
        globals.push_back(sets.back().global_view);
      }

      const RowMatrix momentum_globals = encode(result.momentum.params, globals, NormStats::batch);

      // Queries and the global index each one is paired with.
      std::vector<Image> queries;
      std::vector<std::size_t> owner;
      std::vector<int> histogram(static_cast<std::size_t>(views.n_parts), 0);
      if (config.selection == SelectionMode::select_best) {
        std::vector<Image> all_parts;
        for (const auto& s : sets) all_parts.insert(all_parts.end(), s.parts.begin(), s.parts.end());
        const RowMatrix part_embeddings = encode(result.online, all_parts, NormStats::batch);
        for (std::size_t k = 0; k < count; ++k) {
          const RowMatrix mine = part_embeddings.middleRows(static_cast<Eigen::Index>(k * views.n_parts), views.n_parts);
          const PartChoice choice = select_discriminative_part(mine, result.queue);
          ++histogram[choice.index];
          queries.push_back(sets[k].parts[choice.index]);
          owner.push_back(k);
        }
      } else {
        for (std::size_t k = 0; k < count; ++k) {
          for (int p = 0; p < views.n_parts; ++p) {
            queries.push_back(sets[k].parts[static_cast<std::size_t>(p)]);
            owner.push_back(k);
            ++histogram[static_cast<std::size_t>(p)];
          }
        }
      }

      const bool online_positive = config.positive == PositiveEncoder::online;
      std::vector<Image> forward_batch = queries;
      if (online_positive) forward_batch.insert(forward_batch.end(), globals.begin(), globals.end());
      const RowMatrix emb = tape.forward(result.online, forward_batch);
      const auto q_rows = static_cast<Eigen::Index>(queries.size());
      const RowMatrix positives = online_positive ? RowMatrix(emb.bottomRows(static_cast<Eigen::Index>(count)))
                                                  : momentum_globals;

      const RowMat<float> negatives = result.queue.stored();
      RowMatrix grad_emb = RowMatrix::Zero(emb.rows(), emb.cols());
      double loss_sum = 0.0;
      for (Eigen::Index qi = 0; qi < q_rows; ++qi) {
        const auto k = static_cast<Eigen::Index>(owner[static_cast<std::size_t>(qi)]);
        const Vec<float> q = emb.row(qi).transpose();
        const Vec<float> pos = positives.row(k).transpose();
        const auto r = contrastive_loss<float>(q, pos, negatives, static_cast<float>(config.temperature));
        loss_sum += r.loss;
        grad_emb.row(qi) += r.grad_query.transpose() / static_cast<float>(q_rows);
        if (online_positive) grad_emb.row(q_rows + k) += r.grad_positive.transpose() / static_cast<float>(q_rows);
      }
      const double loss = loss_sum / static_cast<double>(q_rows);
      if (!std::isfinite(loss)) {
        throw TrainingAborted(batch_diagnostics(loss, emb.topRows(q_rows), positives, result.queue));
      }

      const double lr = cosine_learning_rate(config.learning_rate, result.steps, total_steps);
      grads.set_zero();
      tape.backward(grad_emb, grads);
      tape.update_running_statistics(result.online, kRunningStatRate);
      sgd.step(result.online, grads, lr, config.sgd_momentum, config.weight_decay);
      momentum_update(result.online, result.momentum);
      result.queue.enqueue(momentum_globals);

      TrainLogRecord rec{result.steps, epoch, loss, lr, result.queue.filled(), std::move(histogram)};
      ++result.steps;
      if (hooks.on_step) hooks.on_step(rec);
      result.log.push_back(std::move(rec));
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, result);
  }
  return result;
}

}  // namespace partshot
