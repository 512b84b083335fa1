#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "partshot/ablation.hpp"
#include "partshot/checkpoint.hpp"
#include "partshot/config.hpp"
#include "partshot/dataset.hpp"
#include "partshot/encoder.hpp"
#include "partshot/errors.hpp"
#include "partshot/evaluate.hpp"
#include "partshot/feature_cache.hpp"
#include "partshot/hash.hpp"
#include "partshot/part_selection.hpp"
#include "partshot/pretrain.hpp"
#include "partshot/report.hpp"
#include "partshot/rng.hpp"
#include "partshot/synthetic.hpp"
#include "partshot/viz.hpp"

namespace fs = std::filesystem;
using namespace partshot;

namespace {

struct CommonArgs {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::vector<std::string> set;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "Config file (key = value with [sections])");
  cmd->add_option("--preset", args.preset, "desk, paper-mini or paper-tiered");
  cmd->add_option("--seed", args.seed, "global_seed override");
  cmd->add_option("--out", args.out, "Output path");
  cmd->add_option("--data", args.data, "Dataset root (one directory per class)");
  cmd->add_option("--set", args.set, "Extra key=value overrides, e.g. --set pdn.epochs=5");
}

bool explicit_config(const CommonArgs& args) { return !args.config.empty() || !args.preset.empty(); }

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg = !args.config.empty() ? load_config(args.config, args.preset.empty() ? "desk" : args.preset)
                                       : RunConfig::from_preset(args.preset.empty() ? "desk" : args.preset);
  if (!args.config.empty() && !args.preset.empty() && cfg.preset != args.preset) {
    RunConfig fresh = RunConfig::from_preset(args.preset);
    fresh.apply_text(cfg.to_text());
    fresh.preset = args.preset;
    cfg = fresh;
  }
  if (args.seed) cfg.global_seed = *args.seed;
  if (!args.data.empty()) cfg.data.root = args.data;
  for (const auto& kv : args.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

DatasetHandle open_dataset(const RunConfig& cfg) {
  if (cfg.data.root.empty()) throw ConfigError("no dataset root: pass --data or set data.root");
  LoadOptions opts;
  opts.image_side = cfg.data.load_side;
  opts.split_seed = derive_seed(cfg.global_seed, "data", {cfg.data.split_seed});
  opts.skip_undecodable = cfg.data.skip_undecodable;
  const auto& s = cfg.data.split;
  return load_dataset(cfg.data.root, SplitSpec::from_counts(s[0], s[1], s[2]), opts);
}

ViewConfig view_config(const RunConfig& cfg) {
  ViewConfig v = cfg.data.views;
  v.output_side = cfg.encoder.input_side;
  v.n_parts = cfg.pdn.n_parts;
  return v;
}

EvalProtocol protocol_of(const RunConfig& cfg) {
  EvalProtocol p = cfg.eval;
  p.seed = derive_seed(cfg.global_seed, "episodes");
  return p;
}

Checkpoint train(const RunConfig& cfg, const DatasetHandle& data, const fs::path& log_path) {
  JsonLinesWriter log(log_path);
  PretrainHooks hooks;
  hooks.on_step = [&](const TrainLogRecord& r) { log.write(to_json(r)); };
  hooks.on_epoch_end = [&](int epoch, const PretrainResult& r) {
    const double loss = r.log.empty() ? 0.0 : r.log.back().loss;
    spdlog::info("epoch {}/{} loss {:.4f} queue {}/{}", epoch + 1, cfg.pdn.epochs, loss, r.queue.filled(),
                 r.queue.capacity());
  };
  PretrainResult result =
      pretrain(data, cfg.encoder, view_config(cfg), cfg.pdn, derive_seed(cfg.global_seed, "pretrain"), hooks);
  Checkpoint ckpt;
  ckpt.online = std::move(result.online);
  ckpt.momentum = std::move(result.momentum);
  ckpt.step = result.steps;
  ckpt.config_hash = cfg.training_hash();
  ckpt.extra = {{"config", cfg.to_text()}};
  return ckpt;
}

RunConfig config_of(const Checkpoint& ckpt) {
  if (!ckpt.extra.contains("config")) throw StoreError("checkpoint carries no embedded config");
  const std::string text = ckpt.extra.at("config").get<std::string>();
  std::string preset = "desk";
  const auto pos = text.find("preset = \"");
  if (pos != std::string::npos) preset = text.substr(pos + 10, text.find('"', pos + 10) - pos - 10);
  RunConfig cfg = RunConfig::from_preset(preset);
  cfg.apply_text(text);
  return cfg;
}

/// The checkpoint's own config, or the caller's when it resolves to the same
/// training provenance. Anything else is a mixed-provenance error.
RunConfig config_for(const CommonArgs& args, const Checkpoint& ckpt, const std::string& ckpt_name) {
  if (!explicit_config(args)) {
    RunConfig cfg = config_of(ckpt);
    CommonArgs overrides = args;
    if (args.seed) cfg.global_seed = *args.seed;
    if (!args.data.empty()) cfg.data.root = args.data;
    for (const auto& kv : overrides.set) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    require_same_provenance({{"checkpoint " + ckpt_name, ckpt.config_hash}, {"resolved config", cfg.training_hash()}});
    return cfg;
  }
  RunConfig cfg = resolve_config(args);
  if (cfg.data.root.empty()) cfg.data.root = config_of(ckpt).data.root;
  require_same_provenance({{"checkpoint " + ckpt_name, ckpt.config_hash}, {"resolved config", cfg.training_hash()}});
  return cfg;
}

std::vector<std::string> base_ids(const DatasetHandle& data) {
  std::vector<std::string> ids;
  for (std::size_t i : data.indices(Split::base)) ids.push_back(data.source(i).empty() ? std::to_string(i) : data.source(i));
  return ids;
}

BasePool load_pool(const fs::path& stem, const std::string& ckpt_hash, const std::string& config_hash) {
  FeatureCache cache = read_feature_cache(stem, ckpt_hash);
  require_same_provenance({{"checkpoint", config_hash}, {"feature cache " + stem.string(), cache.header.config_hash}});
  return BasePool::normalized(std::move(cache.maps), std::move(cache.header.ids));
}

// ---------------------------------------------------------------------------

int cmd_synth(const CommonArgs& args, SyntheticSpec spec) {
  if (args.out.empty()) throw ConfigError("synth needs --out");
  if (args.seed) spec.seed = *args.seed;
  write_synthetic_dataset(args.out, spec);
  spdlog::info("wrote {} classes x {} images to {}", spec.classes, spec.images_per_class, args.out);
  return 0;
}

int cmd_pretrain(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const fs::path out = args.out.empty() ? fs::path("run") : fs::path(args.out);
  fs::create_directories(out);
  write_text_atomic(out / "config.toml", cfg.to_text());
  const DatasetHandle data = open_dataset(cfg);
  spdlog::info("pretraining on {} base images (config {})", data.indices(Split::base).size(), cfg.hash());
  Checkpoint ckpt = train(cfg, data, out / "train_log.jsonl");
  save_checkpoint(out / "checkpoint.ckpt", ckpt);
  spdlog::info("checkpoint {} ({})", (out / "checkpoint.ckpt").string(), checkpoint_hash(out / "checkpoint.ckpt"));
  return 0;
}

int cmd_extract(const CommonArgs& args, const std::string& ckpt_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const RunConfig cfg = config_for(args, ckpt, ckpt_path);
  const std::string hash = checkpoint_hash(ckpt_path);
  const fs::path stem = args.out.empty() ? fs::path(ckpt_path).parent_path() / "base_features" : fs::path(args.out);
  const DatasetHandle data = open_dataset(cfg);
  const auto ids = base_ids(data);
  if (feature_cache_current(stem, hash, ids)) {
    spdlog::info("feature cache {} is current, nothing to do", stem.string());
    return 0;
  }
  const auto maps = extract_image_maps(ckpt.online, data, data.indices(Split::base));
  const auto header = write_feature_cache(stem, maps, ids, hash, ckpt.config_hash);
  spdlog::info("cached {} maps of {}x{}x{} at {}", header.count, header.height, header.width, header.depth,
               stem.string());
  return 0;
}

nlohmann::json classifier_json(const LinearClassifier& clf) {
  nlohmann::json w = nlohmann::json::array();
  for (Eigen::Index r = 0; r < clf.weight.rows(); ++r) {
    std::vector<double> row(clf.weight.cols());
    for (Eigen::Index c = 0; c < clf.weight.cols(); ++c) row[c] = clf.weight(r, c);
    w.push_back(row);
  }
  return {{"weight", w}, {"bias", std::vector<double>(clf.bias.data(), clf.bias.data() + clf.bias.size())}};
}

LinearClassifier classifier_from_json(const nlohmann::json& j) {
  const auto rows = j.at("weight").get<std::vector<std::vector<double>>>();
  const auto bias = j.at("bias").get<std::vector<double>>();
  if (rows.empty() || rows.size() != bias.size()) throw StoreError("malformed classifier in trace");
  LinearClassifier clf;
  clf.weight.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  clf.bias.resize(static_cast<Eigen::Index>(bias.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw StoreError("ragged classifier weight in trace");
    for (std::size_t c = 0; c < rows[r].size(); ++c) clf.weight(r, c) = rows[r][c];
    clf.bias(r) = bias[r];
  }
  return clf;
}

struct EvalArgs {
  std::string ckpt;
  std::string cache;
  std::optional<int> way, shot, episodes;
  std::string pan;
  std::string report;
  std::string trace;
  int trace_episode = 0;
};

int cmd_eval(const CommonArgs& args, const EvalArgs& e) {
  const Checkpoint ckpt = load_checkpoint(e.ckpt);
  RunConfig cfg = config_for(args, ckpt, e.ckpt);
  if (e.way) cfg.eval.way = *e.way;
  if (e.shot) cfg.eval.shot = *e.shot;
  if (e.episodes) cfg.eval.episodes = *e.episodes;
  if (!e.pan.empty()) {
    if (e.pan != "on" && e.pan != "off") throw ConfigError("--pan expects on or off");
    cfg.pan.enabled = e.pan == "on";
  }
  const std::string ckpt_hash = checkpoint_hash(e.ckpt);
  const DatasetHandle data = open_dataset(cfg);

  std::optional<BasePool> pool;
  if (cfg.pan.enabled) {
    const fs::path stem = e.cache.empty() ? fs::path(e.ckpt).parent_path() / "base_features" : fs::path(e.cache);
    if (!fs::exists(cache_header_path(stem))) {
      throw StoreError("part augmentation needs a base-pool feature cache; run `partshot extract` first (looked for " +
                       cache_header_path(stem).string() + ")");
    }
    pool = load_pool(stem, ckpt_hash, ckpt.config_hash);
  }
  const FeatureNormalizer normalizer = pool ? pool->normalizer : fit_base_normalizer(ckpt.online, data);
  const SplitFeatures novel = split_features(ckpt.online, data, Split::novel, normalizer);
  const EvalProtocol protocol = protocol_of(cfg);
  EvalReport report = evaluate(novel, pool ? &*pool : nullptr, protocol, cfg.pan);
  report.provenance["config_hash"] = cfg.hash();
  report.provenance["training_hash"] = ckpt.config_hash;
  report.provenance["checkpoint_hash"] = ckpt_hash;

  const fs::path out = !e.report.empty() ? fs::path(e.report)
                       : !args.out.empty() ? fs::path(args.out)
                                           : fs::path(e.ckpt).parent_path() / "eval_report.json";
  write_json_atomic(out, report.to_json());
  fs::path csv = out;
  csv.replace_extension(".csv");
  write_text_atomic(csv, report.accuracies_csv());
  std::cout << cfg.eval.way << "-way " << cfg.eval.shot << "-shot, " << report.accuracies.size()
            << " episodes: " << 100.0 * report.mean << " +- " << 100.0 * report.ci95 << "\n";

  if (!e.trace.empty()) {
    if (!pool) throw ConfigError("--trace needs part augmentation enabled");
    const EpisodeRun run = run_episode(novel, &*pool, protocol, cfg.pan, e.trace_episode);
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& t : run.pan.trace) {
      entries.push_back({{"image", t.image},
                         {"id", t.id},
                         {"class", t.class_k},
                         {"probability", t.probability},
                         {"checksum", t.checksum}});
    }
    write_json_atomic(e.trace, {{"training_hash", ckpt.config_hash},
                                {"checkpoint_hash", ckpt_hash},
                                {"episode", e.trace_episode},
                                {"cam_mode", to_string(cfg.pan.cam_mode)},
                                {"classifier", classifier_json(run.pan.initial)},
                                {"entries", entries}});
    spdlog::info("wrote trace of episode {} ({} retrieved images) to {}", e.trace_episode, entries.size(), e.trace);
  }
  return 0;
}

int cmd_ablate(const CommonArgs& args, const std::string& grid_name, const std::string& ckpt_dir, bool train_missing) {
  const RunConfig cfg = resolve_config(args);
  const AblationGrid grid = grid_by_name(grid_name, cfg.pdn, cfg.pan);
  const fs::path dir = ckpt_dir.empty() ? fs::path(args.out.empty() ? "ablation" : args.out) / "checkpoints"
                                        : fs::path(ckpt_dir);
  const DatasetHandle data = open_dataset(cfg);
  std::map<std::string, EncoderAssets> assets;
  for (const auto& enc : grid.encoders) {
    RunConfig variant = cfg;
    variant.pdn = enc.pdn;
    variant.data.views.n_parts = enc.pdn.n_parts;
    const fs::path path = dir / (enc.name + ".ckpt");
    if (!fs::exists(path)) {
      if (!train_missing) throw StoreError("missing checkpoint for encoder variant '" + enc.name + "': " + path.string());
      spdlog::info("training encoder variant {}", enc.name);
      fs::create_directories(dir);
      save_checkpoint(path, train(variant, data, dir / (enc.name + ".jsonl")));
    }
    const Checkpoint ckpt = load_checkpoint(path);
    require_same_provenance({{"checkpoint " + path.string(), ckpt.config_hash}, {enc.name, variant.training_hash()}});
    BasePool pool = build_base_pool(ckpt.online, data);
    SplitFeatures novel = split_features(ckpt.online, data, Split::novel, pool.normalizer);
    assets[enc.name] = {std::move(novel), std::move(pool)};
  }
  const AblationTable table = run_ablation(grid, assets, protocol_of(cfg));
  const fs::path out = args.out.empty() ? fs::path("ablation") : fs::path(args.out);
  nlohmann::json j = table.to_json();
  j["config_hash"] = cfg.hash();
  write_json_atomic(out / (grid.name + ".json"), j);
  write_text_atomic(out / (grid.name + ".csv"), table.to_csv());
  std::cout << table.to_csv();
  bool ok = true;
  for (const auto& c : table.comparisons) ok = ok && !c.failed();
  return ok ? 0 : 3;
}

int cmd_viz_crops(const CommonArgs& args, const std::string& ckpt_path, int count) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const RunConfig cfg = config_for(args, ckpt, ckpt_path);
  const DatasetHandle data = open_dataset(cfg);
  const EncoderParams& key_encoder = ckpt.momentum ? ckpt.momentum->params : ckpt.online;
  const ViewConfig views = view_config(cfg);
  const auto& base = data.indices(Split::base);
  if (base.empty()) throw DataError("base split is empty");

  // Freshly filled queue: momentum-encoder global views of base images.
  NegativeQueue queue(cfg.pdn.queue_capacity, cfg.encoder.embed_dim);
  Rng rng = make_rng(derive_seed(cfg.global_seed, "viz", {0}));
  const std::size_t batch = std::min<std::size_t>(cfg.pdn.queue_capacity, static_cast<std::size_t>(cfg.pdn.batch_size));
  while (!queue.full()) {
    std::vector<Image> globals;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t idx = base[uniform_index(rng, base.size())];
      globals.push_back(generate_views(data.image(idx), views, rng()).global_view);
    }
    queue.enqueue(encode(key_encoder, globals));
  }

  const fs::path out = args.out.empty() ? fs::path("crops") : fs::path(args.out);
  fs::create_directories(out);
  for (int i = 0; i < count; ++i) {
    const std::size_t idx = base[uniform_index(rng, base.size())];
    const ViewSet set = generate_views(data.image(idx), views, derive_seed(cfg.global_seed, "viz", {1, static_cast<std::uint64_t>(i)}));
    const RowMatrix parts = encode(ckpt.online, set.parts);
    const Eigen::VectorXd distances = sample_set_distances(parts, queue);
    const PartChoice choice = select_discriminative_part(parts, queue);
    char name[64];
    std::snprintf(name, sizeof name, "crops_%03d.png", i);
    write_png(out / name, crop_panel(set, distances, choice.index));
  }
  spdlog::info("wrote {} crop panels to {}", count, out.string());
  return 0;
}

int cmd_viz_attn(const CommonArgs& args, const std::string& ckpt_path, const std::string& cache, const std::string& trace_path,
                 int count) {
  if (trace_path.empty() || !fs::exists(trace_path)) throw StoreError("missing trace file '" + trace_path + "' (see eval --trace)");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const RunConfig cfg = config_for(args, ckpt, ckpt_path);
  const std::string ckpt_hash = checkpoint_hash(ckpt_path);
  const nlohmann::json trace = read_json(trace_path);
  require_same_provenance({{"checkpoint", ckpt.config_hash}, {"trace " + trace_path, trace.at("training_hash").get<std::string>()}});
  const fs::path stem = cache.empty() ? fs::path(ckpt_path).parent_path() / "base_features" : fs::path(cache);
  const BasePool pool = load_pool(stem, ckpt_hash, ckpt.config_hash);
  const LinearClassifier clf = classifier_from_json(trace.at("classifier"));
  const DatasetHandle data = open_dataset(cfg);
  std::map<std::string, std::size_t> by_source;
  for (std::size_t i = 0; i < data.size(); ++i) by_source[data.source(i)] = i;

  const fs::path out = args.out.empty() ? fs::path("attention") : fs::path(args.out);
  fs::create_directories(out);
  int written = 0;
  for (const auto& entry : trace.at("entries")) {
    if (written >= count) break;
    const auto image = entry.at("image").get<std::size_t>();
    const int k = entry.at("class").get<int>();
    if (image >= pool.size()) throw StoreError("trace references image outside the feature cache");
    const AttentionMap att = compute_attention(pool.maps[image], clf);
    const Eigen::MatrixXd values = attention_overlay_values(att, k);
    const auto it = by_source.find(pool.ids[image]);
    if (it == by_source.end()) throw DataError("trace image '" + pool.ids[image] + "' is not in the dataset");
    const Image original = resize(data.image(it->second), 128, 128);
    char name[64];
    std::snprintf(name, sizeof name, "attn_%03d_class%d.png", written, k);
    write_png(out / name, hstack({original, attention_overlay(original, values), heatmap(values, 128 / att.height)}));
    ++written;
  }
  spdlog::info("wrote {} attention panels to {}", written, out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Part-based self-supervised few-shot learning"};
  app.require_subcommand(1);

  CommonArgs common;
  SyntheticSpec synth_spec;
  auto* synth = app.add_subcommand("synth", "Render the procedural desk dataset");
  add_common(synth, common);
  synth->add_option("--classes", synth_spec.classes);
  synth->add_option("--images", synth_spec.images_per_class);
  synth->add_option("--side", synth_spec.side);
  synth->add_option("--distractors", synth_spec.distractors);

  auto* pre = app.add_subcommand("pretrain", "Self-supervised part-discovery pretraining");
  add_common(pre, common);

  std::string ckpt;
  auto* extract = app.add_subcommand("extract", "Cache base-pool feature maps");
  add_common(extract, common);
  extract->add_option("--ckpt", ckpt)->required();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Episodic evaluation");
  add_common(eval, common);
  eval->add_option("--ckpt", eval_args.ckpt)->required();
  eval->add_option("--cache", eval_args.cache, "Feature cache stem (default <ckpt dir>/base_features)");
  eval->add_option("--way", eval_args.way);
  eval->add_option("--shot", eval_args.shot);
  eval->add_option("--episodes", eval_args.episodes);
  eval->add_option("--pan", eval_args.pan, "on or off");
  eval->add_option("--report", eval_args.report, "Report JSON path; the CSV goes next to it");
  eval->add_option("--trace", eval_args.trace, "Write the augmentation trace of one episode");
  eval->add_option("--trace-episode", eval_args.trace_episode);

  std::string grid = "components", ckpt_dir;
  bool train_missing = false;
  auto* ablate = app.add_subcommand("ablate", "Run an ablation grid");
  add_common(ablate, common);
  ablate->add_option("--grid", grid, "components, crops or n_a");
  ablate->add_option("--ckpt-dir", ckpt_dir, "Directory of <encoder>.ckpt files");
  ablate->add_flag("--train-missing", train_missing, "Pretrain encoder variants without a checkpoint");

  int count = 8;
  auto* crops = app.add_subcommand("viz-crops", "Global view and ranked part crops");
  add_common(crops, common);
  crops->add_option("--ckpt", ckpt)->required();
  crops->add_option("--count", count);

  std::string cache, trace;
  auto* attn = app.add_subcommand("viz-attn", "Attention overlays of retrieved base images");
  add_common(attn, common);
  attn->add_option("--ckpt", ckpt)->required();
  attn->add_option("--cache", cache);
  attn->add_option("--trace", trace)->required();
  attn->add_option("--count", count);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(common, synth_spec);
    if (*pre) return cmd_pretrain(common);
    if (*extract) return cmd_extract(common, ckpt);
    if (*eval) return cmd_eval(common, eval_args);
    if (*ablate) return cmd_ablate(common, grid, ckpt_dir, train_missing);
    if (*crops) return cmd_viz_crops(common, ckpt, count);
    if (*attn) return cmd_viz_attn(common, ckpt, cache, trace, count);
  } catch (const TrainingAborted& e) {
    spdlog::error("training aborted: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
