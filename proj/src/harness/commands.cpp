// SPDX-License-Identifier: Apache-2.0
#include "harness/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "core/csv.hpp"
#include "core/strutil.hpp"
#include "data/disk.hpp"
#include "data/ops.hpp"
#include "harness/svg.hpp"
#include "nn/optim.hpp"

namespace mvsync {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void check_device() {
  const char* dev = std::getenv("MVSYNC_DEVICE");
  if (dev && *dev && std::string(dev) != "cpu")
    throw ConfigError(std::string("MVSYNC_DEVICE: unknown device '") + dev +
                      "' (only 'cpu' is available)");
}

ExperimentConfig resolve_config(const RunOptions& opt) {
  ExperimentConfig cfg = opt.config_path.empty()
                             ? ExperimentConfig()
                             : ExperimentConfig::from_file(opt.config_path);
  for (const std::string& assignment : opt.overrides) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must look like key.path=value: '" +
                        assignment + "'");
    cfg.set(assignment.substr(0, eq), assignment.substr(eq + 1));
  }
  if (opt.has_seed) cfg.set_seed(opt.seed);
  if (!opt.out_dir.empty()) cfg.set_out_dir(opt.out_dir);
  return cfg;
}

void write_json_file(const std::string& path, const Json& value) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << value.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path);
}

// Written once per run so every artifact in the directory is traceable.
void write_config_snapshot(const ExperimentConfig& cfg) {
  Json snap{{"config", cfg.tree()},
            {"experiment_identity", format_hex(cfg.experiment_identity())},
            {"ssl_identity", format_hex(cfg.ssl_identity())}};
  write_json_file(cfg.out_dir() + "/config.json", snap);
}

Json base_report(const ExperimentConfig& cfg, const std::string& command) {
  return Json{{"command", command},
              {"experiment_identity", format_hex(cfg.experiment_identity())},
              {"seed", cfg.seed()},
              {"out_dir", cfg.out_dir()},
              {"warnings", Json::array()}};
}

// The single-frame analog of the pair policy: training distributions with
// removed backdrops are probed on removed backdrops; other modes probe raw.
Image eval_frame(const BackgroundStore& store, const BackgroundPolicy& policy,
                 const MultiViewDataset& ds, const FrameIndex& ix) {
  Image full = ds.full_frame(ix);
  if (policy.mode == BackgroundMode::remove)
    full = remove_background(full, store.model(ix.example, ix.view));
  return full;
}

// Largest |dt| for which some example of the dataset has a frame pair.
int max_offset(const MultiViewDataset& ds) {
  int best = 0;
  for (const ExampleInfo& ex : ds.examples())
    if (!ex.times.empty())
      best = std::max(best, ex.times.back() - ex.times.front());
  return best;
}

SSLModel<float> load_ssl_model(const ExperimentConfig& cfg,
                               const Checkpoint& ckpt) {
  if (ckpt.kind != CheckpointKind::ssl)
    throw StructureError("checkpoint holds a different model kind");
  const Json& m = cfg.tree().at("model");
  SSLModel<float> model(cfg.encoder(),
                        parse_fusion(m.at("fusion").get<std::string>()),
                        m.at("concat_relu").get<bool>());
  unpack_state(ckpt, model.state());
  return model;
}

void require_ssl_match(const ExperimentConfig& cfg, const Checkpoint& ckpt,
                       const RunOptions& opt, Json& report) {
  if (ckpt.config_hash == cfg.ssl_identity()) return;
  if (!opt.allow_mismatch)
    throw ConfigError(
        "checkpoint was trained under a different configuration "
        "(--allow-mismatch overrides)");
  report["warnings"].push_back(
      "checkpoint configuration differs from this experiment; proceeding");
}

std::string default_checkpoint(const ExperimentConfig& cfg,
                               const RunOptions& opt, const char* name) {
  if (!opt.checkpoint.empty()) return opt.checkpoint;
  return cfg.out_dir() + "/" + name;
}

// ---------------------------------------------------------------- generate

Json cmd_generate(const ExperimentConfig& cfg) {
  std::string root = cfg.tree().at("dataset").at("root").get<std::string>();
  if (root.empty()) root = cfg.out_dir() + "/dataset";
  SceneConfig scene = cfg.scene();
  auto ds = generate_dataset(scene);
  write_dataset(*ds, root);

  Json manifest{{"scene_hash", format_hex(scene.hash())},
                {"experiment_identity", format_hex(cfg.experiment_identity())},
                {"subjects", scene.n_subjects},
                {"actions", scene.n_actions},
                {"views", scene.n_views},
                {"frames", scene.n_frames},
                {"image_size", scene.image_size},
                {"subject_names", dataset_subjects(*ds)}};
  write_json_file(root + "/manifest.json", manifest);

  Json report = base_report(cfg, "generate");
  report["root"] = root;
  report["manifest"] = manifest;
  return report;
}

// ---------------------------------------------------------------- pretrain

Json cmd_pretrain(const ExperimentConfig& cfg, const RunOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  DatasetPtr full = open_dataset(cfg);
  DatasetPtr train = train_split(cfg, full);
  DatasetPtr held_out = test_split(cfg, full);

  SSLTrainConfig tc = cfg.ssl_config();
  SSLTrainer trainer(train, tc);
  if (!opt.resume.empty())
    trainer.restore(load_checkpoint(opt.resume), cfg.ssl_identity());

  const Json& s = cfg.tree().at("ssl");
  int64_t log_every = s.at("log_every").get<int64_t>();
  int64_t eval_every = s.at("eval_every").get<int64_t>();
  int eval_pairs = s.at("eval_pairs").get<int>();
  int eval_gap = s.at("eval_gap").get<int>();
  if (log_every < 1) throw ConfigError("ssl.log_every must be >= 1");

  std::string out = cfg.out_dir();
  std::string hash_note = "config " + format_hex(cfg.experiment_identity());
  CsvWriter log(out + "/pretrain_log.csv",
                {"step", "lr", "loss", "acc_sync", "acc_flip"}, hash_note);
  CsvWriter eval_log(out + "/pretrain_eval.csv",
                     {"step", "sync_accuracy", "flip_accuracy"}, hash_note);
  std::string ckpt_path = out + "/ssl.ckpt";

  std::unique_ptr<BackgroundStore> eval_store;
  PlotSeries loss_curve{"loss", {}, {}};
  PlotSeries sync_curve{"sync accuracy", {}, {}};
  PlotSeries flip_curve{"flip accuracy", {}, {}};
  double window_loss = 0.0;
  int64_t window_n = 0;
  Json evals = Json::array();

  while (trainer.steps_done() < tc.total_steps) {
    StepLog step = trainer.step();
    if (!std::isfinite(step.loss))
      throw NumericError("pretrain: non-finite loss at step " +
                         format_int(step.step));
    window_loss += step.loss;
    ++window_n;
    if (step.step % log_every == 0 || step.step == tc.total_steps) {
      log.row({static_cast<double>(step.step), step.lr,
               window_loss / window_n, step.acc_sync, step.acc_flip});
      loss_curve.x.push_back(static_cast<double>(step.step));
      loss_curve.y.push_back(window_loss / window_n);
      window_loss = 0.0;
      window_n = 0;
    }
    bool at_eval = eval_every > 0 && (step.step % eval_every == 0 ||
                                      step.step == tc.total_steps);
    if (at_eval) {
      if (!eval_store)
        eval_store = std::make_unique<BackgroundStore>(held_out, tc.tau);
      uint64_t probe_seed = mix64(cfg.seed() ^ (0x65766cULL + step.step));
      double sync_acc = sync_accuracy(
          trainer.model(), held_out, *eval_store, tc.policy, tc.crop_size,
          std::max(1, eval_gap - 7), eval_gap + 8, eval_pairs, probe_seed);
      double flip_acc =
          flip_accuracy(trainer.model(), held_out, *eval_store, tc.policy,
                        tc.crop_size, eval_pairs, probe_seed);
      eval_log.row({static_cast<double>(step.step), sync_acc, flip_acc});
      eval_log.flush();
      sync_curve.x.push_back(static_cast<double>(step.step));
      sync_curve.y.push_back(sync_acc);
      flip_curve.x.push_back(static_cast<double>(step.step));
      flip_curve.y.push_back(flip_acc);
      evals.push_back({{"step", step.step},
                       {"sync_accuracy", sync_acc},
                       {"flip_accuracy", flip_acc}});
      save_checkpoint(ckpt_path, trainer.checkpoint(cfg.ssl_identity()));
    }
  }
  save_checkpoint(ckpt_path, trainer.checkpoint(cfg.ssl_identity()));

  PlotSpec loss_plot;
  loss_plot.title = "pretraining loss (" + hash_note + ")";
  loss_plot.x_label = "step";
  loss_plot.y_label = "loss";
  loss_plot.series = {loss_curve};
  write_line_plot(out + "/pretrain_loss.svg", loss_plot);
  if (!sync_curve.x.empty()) {
    PlotSpec acc_plot;
    acc_plot.title = "held-out pretext accuracy (" + hash_note + ")";
    acc_plot.x_label = "step";
    acc_plot.y_label = "accuracy";
    acc_plot.y_lo = 0.0;
    acc_plot.y_hi = 1.0;
    acc_plot.series = {sync_curve, flip_curve};
    write_line_plot(out + "/pretrain_eval.svg", acc_plot);
  }

  Json report = base_report(cfg, "pretrain");
  report["ssl_identity"] = format_hex(cfg.ssl_identity());
  report["steps"] = trainer.steps_done();
  report["checkpoint"] = ckpt_path;
  report["final_loss"] =
      loss_curve.y.empty() ? Json() : Json(loss_curve.y.back());
  report["held_out_evals"] = evals;
  report["runtime_s"] = seconds_since(t0);
  return report;
}

// ---------------------------------------------------------------- finetune

struct FinetuneResult {
  Json report;
  std::string checkpoint_path;
};

FinetuneResult run_finetune(const ExperimentConfig& cfg,
                            const RunOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  DatasetPtr full = open_dataset(cfg);
  DatasetPtr train = train_split(cfg, full);
  DatasetPtr tune = transfer_split(cfg, full);
  DatasetPtr held_out = test_split(cfg, full);

  Json report = base_report(cfg, "finetune");

  std::string init = opt.init.empty()
                         ? cfg.tree().at("transfer").at("init").get<std::string>()
                         : opt.init;
  std::string init_tag = "random";
  Checkpoint ssl_ckpt;
  bool from_ssl = init != "random";
  if (from_ssl) {
    std::string path = init == "ssl" ? cfg.out_dir() + "/ssl.ckpt" : init;
    ssl_ckpt = load_checkpoint(path);
    if (ssl_ckpt.kind != CheckpointKind::ssl)
      throw StructureError("finetune: --init checkpoint is not a pretraining "
                           "checkpoint");
    require_ssl_match(cfg, ssl_ckpt, opt, report);
    if (ssl_ckpt.dataset_hash != train->content_hash()) {
      if (!opt.allow_mismatch)
        throw ConfigError(
            "checkpoint was trained on a different dataset "
            "(--allow-mismatch overrides)");
      report["warnings"].push_back(
          "checkpoint dataset differs from this experiment; proceeding");
    }
    init_tag = "ssl:" + format_hex(ssl_ckpt.config_hash) + ":" +
               format_int(static_cast<int64_t>(ssl_ckpt.step));
  }
  uint64_t identity = cfg.transfer_identity(init_tag);

  PoseTrainConfig pc = cfg.pose_config();
  PoseTrainer trainer(tune, pc);
  if (from_ssl) trainer.load_encoder(ssl_ckpt);
  if (!opt.resume.empty())
    trainer.restore(load_checkpoint(opt.resume), identity);

  int64_t log_every = cfg.tree().at("transfer").at("log_every").get<int64_t>();
  if (log_every < 1) throw ConfigError("transfer.log_every must be >= 1");
  std::string out = cfg.out_dir();
  std::string hash_note = "config " + format_hex(cfg.experiment_identity());
  CsvWriter log(out + "/finetune_log.csv", {"step", "lr", "loss"}, hash_note);

  PlotSeries loss_curve{"loss", {}, {}};
  double window_loss = 0.0;
  int64_t window_n = 0;
  while (trainer.steps_done() < pc.total_steps) {
    double loss = trainer.step();
    int64_t done = trainer.steps_done();
    window_loss += loss;
    ++window_n;
    if (done % log_every == 0 || done == pc.total_steps) {
      double lr = cosine_lr(done - 1, pc.total_steps, pc.lr0, pc.lr_min);
      log.row({static_cast<double>(done), lr, window_loss / window_n});
      loss_curve.x.push_back(static_cast<double>(done));
      loss_curve.y.push_back(window_loss / window_n);
      window_loss = 0.0;
      window_n = 0;
    }
  }
  std::string ckpt_path = out + "/pose.ckpt";
  save_checkpoint(ckpt_path, trainer.checkpoint(identity));

  PlotSpec loss_plot;
  loss_plot.title = "fine-tuning loss (" + hash_note + ")";
  loss_plot.x_label = "step";
  loss_plot.y_label = "loss";
  loss_plot.series = {loss_curve};
  write_line_plot(out + "/finetune_loss.svg", loss_plot);

  int stride = cfg.tree().at("dataset").at("eval_stride").get<int>();
  DatasetPtr eval_ds = eval_subsample(held_out, stride);
  std::unique_ptr<BackgroundStore> eval_store;
  if (pc.background == BackgroundMode::remove)
    eval_store = std::make_unique<BackgroundStore>(held_out, pc.tau);
  MetricReport metrics =
      evaluate_pose(trainer.model(), trainer.normalizer(), eval_ds,
                    pc.crop_size, pc.batch_size, pc.background,
                    eval_store.get());

  CsvWriter results(out + "/report.csv",
                    {"mpjpe_mm", "nmpjpe_mm", "pmpjpe_mm", "n_samples"},
                    hash_note);
  results.row({metrics.mpjpe_mm, metrics.nmpjpe_mm, metrics.pmpjpe_mm,
               static_cast<double>(metrics.n_samples)});

  report["init"] = init_tag;
  report["transfer_identity"] = format_hex(identity);
  report["steps"] = trainer.steps_done();
  report["checkpoint"] = ckpt_path;
  report["metrics"] = {{"mpjpe_mm", metrics.mpjpe_mm},
                       {"nmpjpe_mm", metrics.nmpjpe_mm},
                       {"pmpjpe_mm", metrics.pmpjpe_mm},
                       {"n_samples", metrics.n_samples},
                       {"correction", metrics.correction}};
  report["runtime_s"] = seconds_since(t0);
  return {report, ckpt_path};
}

Json cmd_finetune(const ExperimentConfig& cfg, const RunOptions& opt) {
  return run_finetune(cfg, opt).report;
}

// ---------------------------------------------------------------- evaluate

Json cmd_evaluate(const ExperimentConfig& cfg, const RunOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  std::string path = default_checkpoint(cfg, opt, "pose.ckpt");
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != CheckpointKind::pose)
    throw StructureError("evaluate: not a pose checkpoint");
  PoseModel<float> model(cfg.encoder());
  unpack_state(ckpt, model.state());
  const auto* mean = ckpt.find("normalizer.mean");
  const auto* stddev = ckpt.find("normalizer.stddev");
  if (!mean || !stddev)
    throw StructureError("evaluate: checkpoint lacks normalizer tensors");
  PoseNormalizer normalizer;
  normalizer.mean = unflatten_pose(join_doubles(*mean));
  normalizer.stddev = unflatten_pose(join_doubles(*stddev));

  DatasetPtr full = open_dataset(cfg);
  DatasetPtr held_out = test_split(cfg, full);
  int stride = cfg.tree().at("dataset").at("eval_stride").get<int>();
  DatasetPtr eval_ds = eval_subsample(held_out, stride);
  PoseTrainConfig pc = cfg.pose_config();
  std::unique_ptr<BackgroundStore> eval_store;
  if (pc.background == BackgroundMode::remove)
    eval_store = std::make_unique<BackgroundStore>(held_out, pc.tau);
  MetricReport metrics =
      evaluate_pose(model, normalizer, eval_ds, pc.crop_size, pc.batch_size,
                    pc.background, eval_store.get());

  std::string hash_note = "config " + format_hex(cfg.experiment_identity());
  CsvWriter results(cfg.out_dir() + "/report.csv",
                    {"mpjpe_mm", "nmpjpe_mm", "pmpjpe_mm", "n_samples"},
                    hash_note);
  results.row({metrics.mpjpe_mm, metrics.nmpjpe_mm, metrics.pmpjpe_mm,
               static_cast<double>(metrics.n_samples)});

  Json report = base_report(cfg, "evaluate");
  report["checkpoint"] = path;
  report["checkpoint_step"] = ckpt.step;
  report["metrics"] = {{"mpjpe_mm", metrics.mpjpe_mm},
                       {"nmpjpe_mm", metrics.nmpjpe_mm},
                       {"pmpjpe_mm", metrics.pmpjpe_mm},
                       {"n_samples", metrics.n_samples},
                       {"correction", metrics.correction}};
  report["runtime_s"] = seconds_since(t0);
  return report;
}

// -------------------------------------------------------------- sync-curve

Json cmd_sync_curve(const ExperimentConfig& cfg, const RunOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  std::string path = default_checkpoint(cfg, opt, "ssl.ckpt");
  Checkpoint ckpt = load_checkpoint(path);
  Json report = base_report(cfg, "sync-curve");
  require_ssl_match(cfg, ckpt, opt, report);
  SSLModel<float> model = load_ssl_model(cfg, ckpt);

  const Json& sc = cfg.tree().at("sync_curve");
  std::string split = sc.at("split").get<std::string>();
  DatasetPtr full = open_dataset(cfg);
  DatasetPtr ds;
  if (split == "test")
    ds = test_split(cfg, full);
  else if (split == "train")
    ds = train_split(cfg, full);
  else
    throw ConfigError("sync_curve.split must be 'test' or 'train'");
  int pairs = sc.at("pairs_per_bucket").get<int>();
  std::vector<int> gaps = sc.at("gaps").get<std::vector<int>>();
  if (gaps.empty()) throw ConfigError("sync_curve.gaps is empty");

  SSLTrainConfig tc = cfg.ssl_config();
  BackgroundStore store(ds, tc.tau);
  int longest = max_offset(*ds);

  std::string hash_note = "config " + format_hex(cfg.experiment_identity());
  CsvWriter csv(cfg.out_dir() + "/sync_curve.csv",
                {"gap", "dt_lo", "dt_hi", "pairs", "accuracy"}, hash_note);
  PlotSeries curve{"sync accuracy", {}, {}};
  Json rows = Json::array();
  for (int gap : gaps) {
    int dt_lo = std::max(1, gap - 7), dt_hi = gap + 8;
    if (dt_lo > longest) {
      report["warnings"].push_back("gap " + format_int(gap) +
                                   " exceeds the sequence length; skipped");
      csv.row({static_cast<double>(gap), static_cast<double>(dt_lo),
               static_cast<double>(dt_hi), 0.0,
               std::numeric_limits<double>::quiet_NaN()});
      rows.push_back({{"gap", gap}, {"accuracy", nullptr}});
      continue;
    }
    double acc =
        sync_accuracy(model, ds, store, tc.policy, tc.crop_size, dt_lo, dt_hi,
                      pairs, mix64(cfg.seed() ^ (0x6763ULL + gap)));
    csv.row({static_cast<double>(gap), static_cast<double>(dt_lo),
             static_cast<double>(dt_hi), static_cast<double>(pairs), acc});
    curve.x.push_back(gap);
    curve.y.push_back(acc);
    rows.push_back({{"gap", gap},
                    {"dt_lo", dt_lo},
                    {"dt_hi", dt_hi},
                    {"pairs", pairs},
                    {"accuracy", acc}});
  }

  if (!curve.x.empty()) {
    PlotSpec plot;
    plot.title = "synchronization accuracy vs. temporal gap (" + hash_note +
                 ")";
    plot.x_label = "offset bucket center (frames)";
    plot.y_label = "accuracy";
    plot.y_lo = 0.4;
    plot.y_hi = 1.0;
    plot.series = {curve};
    write_line_plot(cfg.out_dir() + "/sync_curve.svg", plot);
  }

  report["checkpoint"] = path;
  report["split"] = split;
  report["rows"] = rows;
  report["runtime_s"] = seconds_since(t0);
  return report;
}

// ---------------------------------------------------------------- retrieve

Image montage_row(const std::vector<Image>& tiles, int gap) {
  if (tiles.empty()) throw ArgumentError("montage: no tiles");
  int h = tiles[0].height(), w = 0;
  for (const Image& t : tiles) {
    if (t.height() != h) throw ArgumentError("montage: tile heights differ");
    w += t.width();
  }
  w += gap * (static_cast<int>(tiles.size()) - 1);
  Image out(w, h);
  for (int c = 0; c < 3; ++c)
    std::fill(out.plane(c), out.plane(c) + out.pixels(), 1.0f);
  int x0 = 0;
  for (const Image& t : tiles) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < t.width(); ++x)
          out.at(c, x0 + x, y) = t.at(c, x, y);
    x0 += t.width() + gap;
  }
  return out;
}

Json cmd_retrieve(const ExperimentConfig& cfg, const RunOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  std::string path = default_checkpoint(cfg, opt, "ssl.ckpt");
  Checkpoint ckpt = load_checkpoint(path);
  Json report = base_report(cfg, "retrieve");
  require_ssl_match(cfg, ckpt, opt, report);
  SSLModel<float> model = load_ssl_model(cfg, ckpt);

  DatasetPtr ds = open_dataset(cfg);
  const Json& rc = cfg.tree().at("retrieval");
  size_t q_example = rc.at("query").at("example").get<size_t>();
  int q_view = rc.at("query").at("view").get<int>();
  int q_time = rc.at("query").at("time").get<int>();
  int g_view = rc.at("gallery_view").get<int>();
  int top_k = rc.at("top_k").get<int>();
  if (top_k < 1) throw ConfigError("retrieval.top_k must be >= 1");
  if (q_example >= ds->examples().size())
    throw ArgumentError("retrieval: query example out of range");
  const ExampleInfo& qex = ds->examples()[q_example];
  if (q_time < 0) q_time = qex.times[qex.times.size() / 2];
  FrameIndex query{q_example, q_view, q_time};

  std::vector<FrameIndex> gallery;
  for (size_t e = 0; e < ds->examples().size(); ++e) {
    const ExampleInfo& ex = ds->examples()[e];
    if (std::find(ex.views.begin(), ex.views.end(), g_view) == ex.views.end())
      continue;
    for (int t : ex.times) gallery.push_back({e, g_view, t});
  }
  if (gallery.empty()) throw ArgumentError("retrieval: empty gallery");

  SSLTrainConfig tc = cfg.ssl_config();
  BackgroundStore store(ds, tc.tau);
  int crop = tc.crop_size;
  int D = model.encoder.embed_dim();

  auto embed = [&](const std::vector<FrameIndex>& frames) {
    std::vector<float> emb(frames.size() * D);
    const int chunk = 32;
    for (size_t at = 0; at < frames.size(); at += chunk) {
      int take = static_cast<int>(
          std::min<size_t>(chunk, frames.size() - at));
      Act<float> images(3, take, crop, crop);
      for (int k = 0; k < take; ++k) {
        const FrameIndex& ix = frames[at + k];
        Image full = eval_frame(store, tc.policy, *ds, ix);
        pack_image(crop_subject(full, ds->bbox(ix), crop), images, k);
      }
      Act<float> z = model.encoder.forward(images, false);
      for (int d = 0; d < D; ++d)
        for (int k = 0; k < take; ++k) emb[(at + k) * D + d] = z.row(d)[k];
    }
    return emb;
  };

  std::vector<float> q_emb = embed({query});
  std::vector<float> g_emb = embed(gallery);

  std::vector<double> scores(gallery.size());
  const int chunk = 64;
  for (size_t at = 0; at < gallery.size(); at += chunk) {
    int take = static_cast<int>(std::min<size_t>(chunk, gallery.size() - at));
    Act<float> emb(D, 2 * take, 1, 1);
    for (int d = 0; d < D; ++d)
      for (int k = 0; k < take; ++k) {
        emb.row(d)[2 * k] = q_emb[d];
        emb.row(d)[2 * k + 1] = g_emb[(at + k) * D + d];
      }
    Act<float> fused = model.fuse_forward(emb, false);
    Act<float> logits = model.head_sync.forward(fused, false);
    for (int k = 0; k < take; ++k)
      scores[at + k] = sigmoid(logits.row(0)[k]);
  }

  std::vector<size_t> order(gallery.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  auto is_true_counterpart = [&](const FrameIndex& ix) {
    return ix.example == query.example && ix.time == query.time;
  };
  int true_rank = -1;
  for (size_t r = 0; r < order.size(); ++r)
    if (is_true_counterpart(gallery[order[r]])) {
      true_rank = static_cast<int>(r) + 1;
      break;
    }

  std::string hash_note = "config " + format_hex(cfg.experiment_identity());
  CsvWriter csv(cfg.out_dir() + "/retrieval.csv",
                {"rank", "example", "view", "time", "score", "is_true"},
                hash_note);
  Json top = Json::array();
  int keep = std::min<int>(top_k, static_cast<int>(order.size()));
  for (int r = 0; r < keep; ++r) {
    const FrameIndex& ix = gallery[order[r]];
    const ExampleInfo& ex = ds->examples()[ix.example];
    csv.row({static_cast<double>(r + 1), static_cast<double>(ix.example),
             static_cast<double>(ix.view), static_cast<double>(ix.time),
             scores[order[r]],
             is_true_counterpart(ix) ? 1.0 : 0.0});
    top.push_back({{"rank", r + 1},
                   {"example", ix.example},
                   {"subject", ex.subject},
                   {"action", ex.action},
                   {"view", ix.view},
                   {"time", ix.time},
                   {"score", scores[order[r]]},
                   {"is_true_counterpart", is_true_counterpart(ix)}});
  }

  // Best match per subject: the cross-subject generalization probe.
  Json per_subject = Json::array();
  for (const std::string& subject : dataset_subjects(*ds)) {
    int best = -1;
    for (size_t i = 0; i < gallery.size(); ++i) {
      if (ds->examples()[gallery[i].example].subject != subject) continue;
      if (best < 0 || scores[i] > scores[best]) best = static_cast<int>(i);
    }
    if (best < 0) continue;
    per_subject.push_back({{"subject", subject},
                           {"example", gallery[best].example},
                           {"time", gallery[best].time},
                           {"score", scores[best]}});
  }

  if (rc.at("montage").get<bool>()) {
    std::vector<Image> tiles;
    tiles.push_back(
        crop_subject(ds->full_frame(query), ds->bbox(query), crop));
    for (int r = 0; r < keep; ++r) {
      const FrameIndex& ix = gallery[order[r]];
      tiles.push_back(crop_subject(ds->full_frame(ix), ds->bbox(ix), crop));
    }
    write_png(cfg.out_dir() + "/retrieval_montage.png", montage_row(tiles, 3));
  }

  report["checkpoint"] = path;
  report["query"] = {{"example", query.example},
                     {"subject", qex.subject},
                     {"action", qex.action},
                     {"view", query.view},
                     {"time", query.time}};
  report["gallery_size"] = gallery.size();
  report["true_counterpart_rank"] = true_rank;
  report["top"] = top;
  report["best_per_subject"] = per_subject;
  report["runtime_s"] = seconds_since(t0);
  return report;
}

// ------------------------------------------------------------------ ablate

struct AblationRow {
  const char* key;
  const char* label;
  const char* init;
  Json delta;
};

std::vector<AblationRow> ablation_grid() {
  auto bg = [](const char* mode) {
    return Json{{"background", {{"mode", mode}}}};
  };
  auto removed = [&](Json extra) {
    Json out = bg("remove");
    out.update(extra, true);
    return out;
  };
  return {
      {"a", "random with background", "random", bg("keep")},
      {"b", "random without background", "random", bg("remove")},
      {"c", "ssl with background", "ssl", bg("keep")},
      {"d", "ssl without background", "ssl", bg("remove")},
      {"e", "only flip", "ssl",
       removed({{"model", {{"signal", "flip_only"}}}})},
      {"f", "only sync", "ssl",
       removed({{"model", {{"signal", "sync_only"}}}})},
      {"g", "sync and flip", "ssl", removed({{"model", {{"signal", "both"}}}})},
      {"h", "fusion concat", "ssl",
       removed({{"model", {{"fusion", "concat"}}}})},
      {"i", "fusion add", "ssl", removed({{"model", {{"fusion", "add"}}}})},
      {"j", "fusion diff", "ssl", removed({{"model", {{"fusion", "diff"}}}})},
      {"k", "fusion mult", "ssl", removed({{"model", {{"fusion", "mult"}}}})},
      {"l", "single-view ssl", "ssl",
       removed({{"sampler", {{"single_view", true}}}})},
      {"m", "multi-view ssl", "ssl",
       removed({{"sampler", {{"single_view", false}}}})},
  };
}

Json cmd_ablate(const ExperimentConfig& base, const RunOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  std::string out = base.out_dir();
  Json report = base_report(base, "ablate");
  Json rows = Json::array();

  std::ofstream csv_out;
  fs::create_directories(out);
  std::string csv_path = out + "/ablation.csv";
  csv_out.open(csv_path);
  if (!csv_out) throw IoError("cannot write " + csv_path);
  csv_out << "# config " << format_hex(base.experiment_identity()) << "\n"
          << "row,label,init,background,signal,fusion,single_view,"
             "mpjpe_mm,nmpjpe_mm,pmpjpe_mm\n";

  for (const AblationRow& row : ablation_grid()) {
    ExperimentConfig cfg = ExperimentConfig::from_json(
        merge_config(base.tree(), row.delta));
    const Json& m = cfg.tree().at("model");
    std::string bg_mode =
        cfg.tree().at("background").at("mode").get<std::string>();
    Json entry{{"row", row.key},
               {"label", row.label},
               {"init", row.init},
               {"background", bg_mode},
               {"signal", m.at("signal")},
               {"fusion", m.at("fusion")},
               {"single_view", cfg.tree().at("sampler").at("single_view")}};
    std::string mpjpe_s = "nan", nmpjpe_s = "nan", pmpjpe_s = "nan";
    try {
      RunOptions sub;
      sub.allow_mismatch = opt.allow_mismatch;
      sub.init = row.init;
      if (std::string(row.init) != "random") {
        std::string ssl_dir = out + "/ssl_" + format_hex(cfg.ssl_identity());
        ExperimentConfig pre = cfg;
        pre.set_out_dir(ssl_dir);
        if (!fs::exists(ssl_dir + "/ssl.ckpt")) {
          write_config_snapshot(pre);
          Json pre_report = cmd_pretrain(pre, RunOptions{});
          write_json_file(ssl_dir + "/pretrain.json", pre_report);
        }
        sub.init = ssl_dir + "/ssl.ckpt";
      }
      // Fine-tuned results are shared across rows with identical transfer
      // identities (the full method appears several times in the grid).
      std::string init_tag = "random";
      if (std::string(row.init) != "random") {
        Checkpoint probe = load_checkpoint(sub.init);
        init_tag = "ssl:" + format_hex(probe.config_hash) + ":" +
                   format_int(static_cast<int64_t>(probe.step));
      }
      std::string tune_dir =
          out + "/transfer_" + format_hex(cfg.transfer_identity(init_tag));
      ExperimentConfig tune = cfg;
      tune.set_out_dir(tune_dir);
      Json tune_report;
      if (fs::exists(tune_dir + "/finetune.json")) {
        std::ifstream in(tune_dir + "/finetune.json");
        tune_report = Json::parse(in);
      } else {
        write_config_snapshot(tune);
        tune_report = run_finetune(tune, sub).report;
        write_json_file(tune_dir + "/finetune.json", tune_report);
      }
      const Json& metrics = tune_report.at("metrics");
      entry["metrics"] = metrics;
      entry["run_dir"] = tune_dir;
      mpjpe_s = format_double(metrics.at("mpjpe_mm").get<double>());
      nmpjpe_s = format_double(metrics.at("nmpjpe_mm").get<double>());
      pmpjpe_s = format_double(metrics.at("pmpjpe_mm").get<double>());
    } catch (const Error& e) {
      entry["metrics"] = nullptr;
      entry["error"] = e.what();
      report["warnings"].push_back(std::string("row ") + row.key +
                                   " failed: " + e.what());
    }
    rows.push_back(entry);
    csv_out << row.key << "," << row.label << "," << row.init << ","
            << bg_mode << "," << m.at("signal").get<std::string>() << ","
            << m.at("fusion").get<std::string>() << ","
            << (cfg.tree().at("sampler").at("single_view").get<bool>() ? 1 : 0)
            << "," << mpjpe_s << "," << nmpjpe_s << "," << pmpjpe_s << "\n";
  }
  csv_out.flush();
  if (!csv_out) throw IoError("write failed for " + csv_path);

  report["rows"] = rows;
  report["table"] = csv_path;
  report["runtime_s"] = seconds_since(t0);
  return report;
}

// --------------------------------------------------------- shortcut-probe

Json cmd_shortcut_probe(const ExperimentConfig& base, const RunOptions& opt) {
  (void)opt;
  auto t0 = std::chrono::steady_clock::now();
  const Json& sc = base.tree().at("shortcut");
  int64_t steps = sc.at("steps").get<int64_t>();
  int eval_pairs = sc.at("eval_pairs").get<int>();
  if (steps < 1) throw ConfigError("shortcut.steps must be >= 1");

  Json report = base_report(base, "shortcut-probe");
  Json probes = Json::object();
  for (const char* mode : {"keep", "remove"}) {
    ExperimentConfig cfg = ExperimentConfig::from_json(merge_config(
        base.tree(), Json{{"background", {{"mode", mode}}}}));
    DatasetPtr train = train_split(cfg, open_dataset(cfg));

    SSLTrainConfig tc = cfg.ssl_config();
    tc.signal = SignalMask::flip_only;
    tc.background_only = true;
    tc.total_steps = steps;
    SSLTrainer trainer(train, tc);
    while (trainer.steps_done() < steps) {
      StepLog log = trainer.step();
      if (!std::isfinite(log.loss))
        throw NumericError("shortcut probe: non-finite loss");
    }
    double acc = flip_accuracy(trainer.model(), train, trainer.store(),
                               tc.policy, tc.crop_size, eval_pairs,
                               mix64(cfg.seed() ^ 0x736370ULL),
                               /*background_only=*/true);
    probes[mode] = acc;
  }

  std::string out = base.out_dir();
  std::ofstream csv(out + "/shortcut.csv");
  if (!csv) throw IoError("cannot write " + out + "/shortcut.csv");
  csv << "# config " << format_hex(base.experiment_identity()) << "\n"
      << "mode,accuracy\n"
      << "keep," << format_double(probes["keep"].get<double>()) << "\n"
      << "remove," << format_double(probes["remove"].get<double>()) << "\n";

  report["background_only_flip_accuracy"] = probes;
  report["steps"] = steps;
  report["eval_pairs"] = eval_pairs;
  report["runtime_s"] = seconds_since(t0);
  return report;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "generate",   "pretrain", "finetune", "evaluate",
      "sync-curve", "retrieve", "ablate",   "shortcut-probe"};
  return names;
}

Json run_command(const std::string& command, const RunOptions& opt) {
  check_device();
  ExperimentConfig cfg = resolve_config(opt);
  fs::create_directories(cfg.out_dir());
  write_config_snapshot(cfg);

  Json report;
  if (command == "generate")
    report = cmd_generate(cfg);
  else if (command == "pretrain")
    report = cmd_pretrain(cfg, opt);
  else if (command == "finetune")
    report = cmd_finetune(cfg, opt);
  else if (command == "evaluate")
    report = cmd_evaluate(cfg, opt);
  else if (command == "sync-curve")
    report = cmd_sync_curve(cfg, opt);
  else if (command == "retrieve")
    report = cmd_retrieve(cfg, opt);
  else if (command == "ablate")
    report = cmd_ablate(cfg, opt);
  else if (command == "shortcut-probe")
    report = cmd_shortcut_probe(cfg, opt);
  else
    throw ArgumentError("unknown command '" + command + "'");

  write_json_file(cfg.out_dir() + "/" + command + ".json", report);
  return report;
}

}  // namespace mvsync
