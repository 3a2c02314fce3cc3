// SPDX-License-Identifier: Apache-2.0
#include "harness/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "core/strutil.hpp"
#include "data/disk.hpp"
#include "data/ops.hpp"

namespace mvsync {

namespace {

bool compatible(const Json& base, const Json& value) {
  if (base.is_number() && value.is_number()) return true;
  if (base.is_object() || value.is_object())
    return base.is_object() && value.is_object();
  return base.type() == value.type();
}

struct KeyDoc {
  const char* key;
  const char* doc;
};

// One line per key, in reference order. Keep in sync with defaults().
constexpr KeyDoc kKeyDocs[] = {
    {"seed", "master seed for every training and sampling stream"},
    {"out_dir", "directory that receives checkpoints, logs, and reports"},
    {"dataset.kind", "'synthetic' generates in memory; 'disk' loads root"},
    {"dataset.root", "directory for disk datasets and the generate command"},
    {"dataset.scene.seed", "generator seed; fully determines the pixels"},
    {"dataset.scene.subjects", "number of subjects (body shapes and motions)"},
    {"dataset.scene.actions", "captures per subject"},
    {"dataset.scene.views", "cameras on the shared rig"},
    {"dataset.scene.frames", "frames per capture"},
    {"dataset.scene.image_size", "square frame resolution in pixels"},
    {"dataset.scene.smoothness", "motion smoothness multiplier"},
    {"dataset.scene.symmetric_backgrounds",
     "mirror-symmetric backdrops (no flip cue in the scenery)"},
    {"dataset.train_subjects",
     "first K subjects train; the rest are held out"},
    {"dataset.transfer_subjects",
     "'all' fine-tunes on every train subject, 'one' on the first only"},
    {"dataset.eval_stride", "held-out evaluation keeps every K-th frame"},
    {"dataset.min_motion",
     "drop near-static frames below this mean motion (mm); 0 disables"},
    {"sampler.d_min", "unsynchronized offsets satisfy |dt| > d_min"},
    {"sampler.d_max", "unsynchronized offsets satisfy |dt| < d_max"},
    {"sampler.pre_flip_probability",
     "chance a pair is mirrored on both sides before use"},
    {"sampler.single_view",
     "pairs share one view and differ by augmentation only"},
    {"sampler.aug_shift", "single-view crop jitter, fraction of box size"},
    {"sampler.aug_scale_lo", "single-view scale jitter lower bound"},
    {"sampler.aug_scale_hi", "single-view scale jitter upper bound"},
    {"sampler.aug_rotate", "single-view rotation jitter, radians"},
    {"background.mode", "keep | remove | substitute | mixed"},
    {"background.mixed_ratio", "removal probability under mixed mode"},
    {"background.any_example",
     "substitution may borrow any example's backdrop, not just this one's"},
    {"background.tau", "foreground threshold against the median backdrop"},
    {"model.widths", "channel widths per encoder stage; last is embed dim"},
    {"model.blocks_per_stage", "residual blocks per stage"},
    {"model.fusion", "pair fusion: mult | concat | add | diff"},
    {"model.concat_relu", "rectify after concat fusion"},
    {"model.signal", "pretext heads: both | sync_only | flip_only"},
    {"ssl.steps", "pretraining optimizer steps"},
    {"ssl.batch", "triplets per step"},
    {"ssl.crop", "square crop fed to the encoder"},
    {"ssl.lr0", "initial learning rate (cosine decay)"},
    {"ssl.lr_min", "final learning rate"},
    {"ssl.weight_decay", "decoupled weight decay"},
    {"ssl.log_every", "CSV log cadence in steps"},
    {"ssl.eval_every", "held-out probe cadence in steps; 0 disables"},
    {"ssl.eval_pairs", "pairs per class in each held-out probe"},
    {"ssl.eval_gap", "offset bucket center for the held-out sync probe"},
    {"transfer.init",
     "encoder start for fine-tuning: 'random' or 'ssl' (the run's ssl.ckpt)"},
    {"transfer.steps", "fine-tuning optimizer steps"},
    {"transfer.batch", "images per step"},
    {"transfer.crop", "square crop fed to the encoder"},
    {"transfer.frozen_blocks", "stem plus this many blocks stay frozen"},
    {"transfer.lr0", "initial learning rate (cosine decay)"},
    {"transfer.lr_min", "final learning rate"},
    {"transfer.weight_decay", "decoupled weight decay"},
    {"transfer.flip_probability", "mirror augmentation probability"},
    {"transfer.log_every", "CSV log cadence in steps"},
    {"sync_curve.gaps", "offset bucket centers for the accuracy curve"},
    {"sync_curve.pairs_per_bucket", "pairs per class in each bucket"},
    {"sync_curve.split", "'test' probes held-out subjects, 'train' the rest"},
    {"retrieval.query.example", "query example index"},
    {"retrieval.query.view", "query view id"},
    {"retrieval.query.time", "query frame time; -1 takes the middle frame"},
    {"retrieval.gallery_view", "view whose frames form the gallery"},
    {"retrieval.top_k", "ranked frames kept in the report and montage"},
    {"retrieval.montage", "write a query-plus-matches image strip"},
    {"shortcut.steps", "probe classifier training steps"},
    {"shortcut.eval_pairs", "pairs per class in the probe accuracy"},
};

void flatten(const Json& node, const std::string& prefix,
             std::vector<std::pair<std::string, const Json*>>& out) {
  for (const auto& [key, value] : node.items()) {
    std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object())
      flatten(value, path, out);
    else
      out.emplace_back(path, &value);
  }
}

uint64_t hash_json(const Json& node) { return fnv1a(node.dump()); }

Json pick(const Json& tree, std::initializer_list<const char*> keys) {
  Json out = Json::object();
  for (const char* k : keys) out[k] = tree.at(k);
  return out;
}

}  // namespace

Json merge_config(const Json& base, const Json& overlay,
                  const std::string& where) {
  if (!overlay.is_object())
    throw ConfigError("config: expected an object at '" +
                      (where.empty() ? std::string("<root>") : where) + "'");
  Json out = base;
  for (const auto& [key, value] : overlay.items()) {
    std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key))
      throw ConfigError("config: unknown key '" + path + "'");
    const Json& slot = base.at(key);
    if (slot.is_object()) {
      out[key] = merge_config(slot, value, path);
      continue;
    }
    if (!compatible(slot, value))
      throw ConfigError("config: wrong type for '" + path + "' (expected " +
                        std::string(slot.type_name()) + ")");
    out[key] = value;
  }
  return out;
}

Json ExperimentConfig::defaults() {
  return Json{
      {"seed", 1},
      {"out_dir", "runs/exp"},
      {"dataset",
       {{"kind", "synthetic"},
        {"root", ""},
        {"scene",
         {{"seed", 1},
          {"subjects", 4},
          {"actions", 1},
          {"views", 4},
          {"frames", 2000},
          {"image_size", 96},
          {"smoothness", 1.0},
          {"symmetric_backgrounds", false}}},
        {"train_subjects", 3},
        {"transfer_subjects", "all"},
        {"eval_stride", 64},
        {"min_motion", 0.0}}},
      {"sampler",
       {{"d_min", 4},
        {"d_max", 128},
        {"pre_flip_probability", 0.5},
        {"single_view", false},
        {"aug_shift", 0.1},
        {"aug_scale_lo", 0.85},
        {"aug_scale_hi", 1.18},
        {"aug_rotate", 0.25}}},
      {"background",
       {{"mode", "keep"},
        {"mixed_ratio", 0.5},
        {"any_example", false},
        {"tau", 0.08}}},
      {"model",
       {{"widths", Json::array({16, 32, 64, 128})},
        {"blocks_per_stage", 2},
        {"fusion", "mult"},
        {"concat_relu", false},
        {"signal", "both"}}},
      {"ssl",
       {{"steps", 10000},
        {"batch", 8},
        {"crop", 64},
        {"lr0", 1e-3},
        {"lr_min", 1e-5},
        {"weight_decay", 1e-4},
        {"log_every", 10},
        {"eval_every", 500},
        {"eval_pairs", 64},
        {"eval_gap", 64}}},
      {"transfer",
       {{"init", "ssl"},
        {"steps", 2000},
        {"batch", 16},
        {"crop", 64},
        {"frozen_blocks", 3},
        {"lr0", 1e-3},
        {"lr_min", 1e-5},
        {"weight_decay", 1e-4},
        {"flip_probability", 0.5},
        {"log_every", 10}}},
      {"sync_curve",
       {{"gaps", Json::array({8, 16, 32, 64, 128})},
        {"pairs_per_bucket", 128},
        {"split", "test"}}},
      {"retrieval",
       {{"query", {{"example", 0}, {"view", 1}, {"time", -1}}},
        {"gallery_view", 2},
        {"top_k", 5},
        {"montage", true}}},
      {"shortcut", {{"steps", 600}, {"eval_pairs", 200}}},
  };
}

ExperimentConfig::ExperimentConfig() : tree_(defaults()) {}

ExperimentConfig ExperimentConfig::from_json(const Json& overlay) {
  return ExperimentConfig(merge_config(defaults(), overlay));
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  Json overlay;
  try {
    overlay = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return from_json(overlay);
}

void ExperimentConfig::set(const std::string& dotted_key,
                           const std::string& value) {
  Json leaf = Json::parse(value, nullptr, false);
  if (leaf.is_discarded()) leaf = value;  // plain string
  Json overlay = leaf;
  auto parts = split(dotted_key, '.');
  if (parts.empty() || dotted_key.empty())
    throw ConfigError("config: empty key in override");
  for (auto it = parts.rbegin(); it != parts.rend(); ++it)
    overlay = Json{{std::string(*it), overlay}};
  tree_ = merge_config(tree_, overlay);
}

uint64_t ExperimentConfig::experiment_identity() const {
  Json t = tree_;
  t.erase("out_dir");
  return hash_json(t);
}

uint64_t ExperimentConfig::ssl_identity() const {
  Json t = pick(tree_, {"seed", "dataset", "sampler", "background", "model"});
  t["ssl"] = pick(tree_.at("ssl"),
                  {"steps", "batch", "crop", "lr0", "lr_min", "weight_decay"});
  return hash_json(t);
}

uint64_t ExperimentConfig::transfer_identity(
    const std::string& init_tag) const {
  Json t = pick(tree_, {"seed", "dataset", "background", "model"});
  t["transfer"] =
      pick(tree_.at("transfer"), {"steps", "batch", "crop", "frozen_blocks",
                                  "lr0", "lr_min", "weight_decay",
                                  "flip_probability"});
  t["init_tag"] = init_tag;
  return hash_json(t);
}

SceneConfig ExperimentConfig::scene() const {
  const Json& s = tree_.at("dataset").at("scene");
  SceneConfig cfg;
  cfg.seed = s.at("seed").get<uint64_t>();
  cfg.n_subjects = s.at("subjects").get<int>();
  cfg.n_actions = s.at("actions").get<int>();
  cfg.n_views = s.at("views").get<int>();
  cfg.n_frames = s.at("frames").get<int>();
  cfg.image_size = s.at("image_size").get<int>();
  cfg.smoothness = s.at("smoothness").get<double>();
  cfg.symmetric_backgrounds = s.at("symmetric_backgrounds").get<bool>();
  return cfg;
}

SamplerConfig ExperimentConfig::sampler() const {
  const Json& s = tree_.at("sampler");
  SamplerConfig cfg;
  cfg.d_min = s.at("d_min").get<int>();
  cfg.d_max = s.at("d_max").get<int>();
  cfg.pre_flip_probability = s.at("pre_flip_probability").get<double>();
  cfg.single_view = s.at("single_view").get<bool>();
  cfg.aug_shift = s.at("aug_shift").get<double>();
  cfg.aug_scale_lo = s.at("aug_scale_lo").get<double>();
  cfg.aug_scale_hi = s.at("aug_scale_hi").get<double>();
  cfg.aug_rotate = s.at("aug_rotate").get<double>();
  return cfg;
}

BackgroundPolicy ExperimentConfig::policy() const {
  const Json& b = tree_.at("background");
  BackgroundPolicy p;
  p.mode = parse_background_mode(b.at("mode").get<std::string>());
  p.mixed_ratio = b.at("mixed_ratio").get<double>();
  p.any_example = b.at("any_example").get<bool>();
  return p;
}

double ExperimentConfig::tau() const {
  return tree_.at("background").at("tau").get<double>();
}

EncoderConfig ExperimentConfig::encoder() const {
  const Json& m = tree_.at("model");
  EncoderConfig cfg;
  cfg.widths = m.at("widths").get<std::vector<int>>();
  cfg.blocks_per_stage = m.at("blocks_per_stage").get<int>();
  if (cfg.widths.empty()) throw ConfigError("config: model.widths is empty");
  return cfg;
}

SSLTrainConfig ExperimentConfig::ssl_config() const {
  const Json& s = tree_.at("ssl");
  const Json& m = tree_.at("model");
  SSLTrainConfig cfg;
  cfg.encoder = encoder();
  cfg.fusion = parse_fusion(m.at("fusion").get<std::string>());
  cfg.concat_relu = m.at("concat_relu").get<bool>();
  cfg.signal = parse_signal(m.at("signal").get<std::string>());
  cfg.sampler = sampler();
  cfg.policy = policy();
  cfg.tau = tau();
  cfg.crop_size = s.at("crop").get<int>();
  cfg.batch_size = s.at("batch").get<int>();
  cfg.total_steps = s.at("steps").get<int64_t>();
  cfg.lr0 = s.at("lr0").get<double>();
  cfg.lr_min = s.at("lr_min").get<double>();
  cfg.weight_decay = s.at("weight_decay").get<double>();
  cfg.seed = seed();
  return cfg;
}

PoseTrainConfig ExperimentConfig::pose_config() const {
  const Json& t = tree_.at("transfer");
  PoseTrainConfig cfg;
  cfg.encoder = encoder();
  // Fine-tuning sees backdrop-free crops exactly when the experiment's
  // policy removes backgrounds; substitution and mixing are pretext-only.
  cfg.background = policy().mode == BackgroundMode::remove
                       ? BackgroundMode::remove
                       : BackgroundMode::keep;
  cfg.tau = tau();
  cfg.frozen_blocks = t.at("frozen_blocks").get<int>();
  cfg.crop_size = t.at("crop").get<int>();
  cfg.batch_size = t.at("batch").get<int>();
  cfg.total_steps = t.at("steps").get<int64_t>();
  cfg.lr0 = t.at("lr0").get<double>();
  cfg.lr_min = t.at("lr_min").get<double>();
  cfg.weight_decay = t.at("weight_decay").get<double>();
  cfg.flip_probability = t.at("flip_probability").get<double>();
  cfg.seed = seed();
  return cfg;
}

uint64_t ExperimentConfig::seed() const {
  return tree_.at("seed").get<uint64_t>();
}

std::string ExperimentConfig::out_dir() const {
  return tree_.at("out_dir").get<std::string>();
}

void ExperimentConfig::set_out_dir(const std::string& dir) {
  tree_["out_dir"] = dir;
}

void ExperimentConfig::set_seed(uint64_t seed) { tree_["seed"] = seed; }

std::string config_reference() {
  std::vector<std::pair<std::string, const Json*>> flat;
  flatten(ExperimentConfig::defaults(), "", flat);

  std::ostringstream out;
  out << "Configuration keys (JSON file, overridable with --set key=value)\n";
  size_t width = 0;
  for (const auto& [key, value] : flat)
    width = std::max(width, key.size() + value->dump().size() + 3);
  for (const auto& [key, value] : flat) {
    std::string lhs = key + " = " + value->dump();
    const char* doc = "";
    for (const KeyDoc& d : kKeyDocs)
      if (key == d.key) doc = d.doc;
    out << "  " << lhs << std::string(width - lhs.size() + 2, ' ') << doc
        << "\n";
  }
  return out.str();
}

DatasetPtr open_dataset(const ExperimentConfig& cfg) {
  const Json& d = cfg.tree().at("dataset");
  std::string kind = d.at("kind").get<std::string>();
  DatasetPtr ds;
  if (kind == "synthetic") {
    // Commands that revisit the same scene (the ablation grid above all)
    // share one instance, and with it the rendered-frame cache. One slot is
    // enough: a process works one scene at a time.
    static uint64_t cached_hash = 0;
    static DatasetPtr cached;
    SceneConfig scene = cfg.scene();
    if (!cached || cached_hash != scene.hash()) {
      cached = generate_dataset(scene);
      cached_hash = scene.hash();
    }
    ds = cached;
  } else if (kind == "disk") {
    std::string root = d.at("root").get<std::string>();
    if (root.empty())
      throw ConfigError("config: dataset.root required for kind 'disk'");
    ds = load_dataset(root);
  } else {
    throw ConfigError("config: dataset.kind must be 'synthetic' or 'disk'");
  }
  double min_motion = d.at("min_motion").get<double>();
  if (min_motion > 0.0) ds = filter_static(ds, min_motion);
  return ds;
}

std::vector<std::string> dataset_subjects(const MultiViewDataset& ds) {
  std::vector<std::string> subjects;
  for (const ExampleInfo& ex : ds.examples())
    if (std::find(subjects.begin(), subjects.end(), ex.subject) ==
        subjects.end())
      subjects.push_back(ex.subject);
  return subjects;
}

namespace {

DatasetPtr subject_range(const ExperimentConfig& cfg, DatasetPtr ds,
                         bool train) {
  auto subjects = dataset_subjects(*ds);
  int k = cfg.tree().at("dataset").at("train_subjects").get<int>();
  if (k < 1 || k >= static_cast<int>(subjects.size()))
    throw ConfigError(
        "config: dataset.train_subjects must leave at least one held-out "
        "subject");
  std::vector<std::string> keep(
      train ? subjects.begin() : subjects.begin() + k,
      train ? subjects.begin() + k : subjects.end());
  return select_subjects(std::move(ds), keep);
}

}  // namespace

DatasetPtr train_split(const ExperimentConfig& cfg, DatasetPtr ds) {
  return subject_range(cfg, std::move(ds), true);
}

DatasetPtr test_split(const ExperimentConfig& cfg, DatasetPtr ds) {
  return subject_range(cfg, std::move(ds), false);
}

DatasetPtr transfer_split(const ExperimentConfig& cfg, DatasetPtr ds) {
  DatasetPtr train = train_split(cfg, std::move(ds));
  std::string mode =
      cfg.tree().at("dataset").at("transfer_subjects").get<std::string>();
  if (mode == "all") return train;
  if (mode == "one")
    return select_subjects(train, {dataset_subjects(*train).front()});
  throw ConfigError("config: dataset.transfer_subjects must be 'all' or 'one'");
}

}  // namespace mvsync
