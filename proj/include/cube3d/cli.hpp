#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "cube3d/data/stats.hpp"
#include "cube3d/data/synth.hpp"
#include "cube3d/metrics/report.hpp"
#include "cube3d/model/audit.hpp"
#include "cube3d/model/checkpoint.hpp"
#include "cube3d/train/inference.hpp"
#include "cube3d/train/trainer.hpp"

namespace cube3d::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Training run settings: TrainConfig plus the architecture knobs.
struct Experiment {
  train::TrainConfig train;
  std::string arch = "compact";  // compact | full
  std::size_t num_classes = data::kNumClasses;
  std::optional<std::size_t> input_height;
  std::optional<std::size_t> input_width;
  bool zero_head = false;
  int multiplicity = 1;  // on-the-fly flip augmentation of the training split

  void validate() const {
    train.validate();
    if (arch != "compact" && arch != "full") fail(ErrorKind::config, "arch must be compact or full");
    if (num_classes < 2 || num_classes > data::kNumClasses) fail(ErrorKind::config, "num_classes must lie in 2..14");
    if (multiplicity < 1 || multiplicity > 3) fail(ErrorKind::config, "multiplicity must be 1, 2 or 3");
  }
};

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::config, key + ": expected true or false, got '" + v + "'");
}

inline void apply_config_text(Experiment& x, const std::string& text) {
  using train::detail::parse_number;
  for (const auto& [k, v] : train::parse_key_values(text)) {
    if (train::set_train_field(x.train, k, v)) continue;
    if (k == "arch") x.arch = v;
    else if (k == "num_classes") x.num_classes = parse_number<std::size_t>(k, v);
    else if (k == "input_height") x.input_height = parse_number<std::size_t>(k, v);
    else if (k == "input_width") x.input_width = parse_number<std::size_t>(k, v);
    else if (k == "zero_head") x.zero_head = parse_bool(k, v);
    else if (k == "multiplicity") x.multiplicity = parse_number<int>(k, v);
    else fail(ErrorKind::config, "unknown config key '" + k + "'");
  }
}

inline std::string format_audit(const model::ShapeAudit& a) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-22s %-20s %-20s %s\n", "layer", "input", "output", "reference");
  out += buf;
  for (const auto& r : a.rows) {
    std::string ref = "-";
    if (r.reference)
      ref = (r.input_matches && r.output_matches) ? "ok" : (r.output_matches ? "input differs" : "OUTPUT DIFFERS");
    std::snprintf(buf, sizeof buf, "%-22s %-20s %-20s %s\n", r.layer.c_str(),
                  model::detail::dims_string(model::detail::per_sample(r.input)).c_str(),
                  model::detail::dims_string(model::detail::per_sample(r.output)).c_str(), ref.c_str());
    out += buf;
  }
  for (const auto& d : a.deviations)
    out += "deviation " + d.layer + " " + d.column + ": table " + d.expected + ", realized " + d.realized +
           (d.documented ? " (documented: " + d.note + ")" : " (UNDOCUMENTED)") + "\n";
  for (const auto& m : a.missing_layers) out += "missing layer " + m + "\n";
  out += "learnable parameters: " + std::to_string(a.learnable_parameters) + "\n";
  out += "output deviations: " + std::to_string(a.output_deviations()) +
         ", undocumented: " + std::to_string(a.undocumented()) + "\n";
  return out;
}

inline model::ModelConfig model_config_for(const Experiment& x, std::size_t height, std::size_t width) {
  model::ModelConfig c = x.arch == "full" ? model::ModelConfig::full(x.num_classes)
                                           : model::ModelConfig::compact(data::kCubeFrames, height, width, x.num_classes);
  c.dropout_rate = x.train.dropout_rate;
  return c;
}

// Frames are resized to the network input only when they differ from it.
inline data::PreprocessOptions prep_for(const model::ModelConfig& c) { return {c.input[1], c.input[2], false}; }

namespace detail {

inline Shape frame_source_shape(const std::string& path) {
  if (std::filesystem::is_directory(path)) return data::ingest_frames(path).frames.shape();
  return peek_vten_shape(path);
}

}  // namespace detail

inline Shape peek_vten_or_frames(const data::Manifest& m, const data::ManifestEntry& e) {
  return detail::frame_source_shape(m.resolve(e));
}

inline int run_train(const Experiment& x, const std::string& manifest_path, const std::string& annotations_path,
                     const std::string& out_path, const std::string& log_path, const std::string& init_path,
                     std::ostream& out) {
  x.validate();
  data::Manifest m = data::read_manifest(manifest_path);
  if (x.multiplicity > 1) m = data::augment_manifest(m, x.multiplicity);
  const auto annotations = data::read_annotations(annotations_path);
  const auto train_entries = m.split(data::Split::train);
  if (train_entries.empty()) fail(ErrorKind::config, "manifest has no training entries");

  std::size_t h = 170, w = 170;
  if (x.arch == "compact") {
    const Shape s = peek_vten_or_frames(m, train_entries.front());
    h = x.input_height.value_or(s[1]);
    w = x.input_width.value_or(s[2]);
  }
  const model::ModelConfig mc = model_config_for(x, h, w);
  const auto cubes = data::load_split_cubes(m, annotations, data::Split::train, prep_for(mc));
  for (const auto& c : cubes)
    if (c.label >= x.num_classes)
      fail(ErrorKind::label, c.video_id + " carries " + std::string(data::class_name(c.label)) + " (index " +
                                 std::to_string(c.label) + ") but the head has " + std::to_string(x.num_classes) +
                                 " classes; set num_classes");

  auto net = model::build_model<float>(mc);
  model::init_weights(net, {x.train.seed, x.train.init_std, x.zero_head, model::parse_init_scheme(x.train.init)});
  if (!init_path.empty()) out << model::load_pretrained(net, model::read_checkpoint(init_path)).to_string();

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::binary);
    if (!log) fail(ErrorKind::io, "cannot write " + log_path);
    log << train::kEpochLogHeader << "\n";
  }
  out << cubes.size() << " training cubes, input " << mc.input[0] << "x" << mc.input[1] << "x" << mc.input[2]
      << ", " << x.num_classes << " classes\n"
      << train::kEpochLogHeader << "\n";
  const auto result = train::train(net, cubes, x.train, [&](const train::EpochReport& r) {
    const std::string line = train::format_epoch_line(r);
    out << line << "\n" << std::flush;
    if (log) log << line << "\n" << std::flush;
    return true;
  });
  model::save_checkpoint(net, out_path, mc,
                         {static_cast<std::uint32_t>(result.epochs.size()), result.final_learning_rate});
  out << "checkpoint written to " << out_path << "\n";
  return kExitOk;
}

inline data::FrameSequence fit_to_net(data::FrameSequence seq, const model::AnomalyNet<float>& net) {
  const Shape& s = net.sample_shape();
  if (seq.height() != s[1] || seq.width() != s[2]) seq = data::preprocess(seq, {s[1], s[2], false});
  return seq;
}

// Registers every subcommand on `app`; the selected one runs after parsing.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"3D ConvNet video anomaly recognition toolkit", "cube3d"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // preprocess
  std::string pp_in, pp_out, pp_id;
  std::size_t pp_h = 170, pp_w = 170;
  bool pp_mean = false;
  auto* pp = app.add_subcommand("preprocess", "Frames (PPM directory or .vten) to a resized, scaled .vten");
  pp->add_option("--input", pp_in, "Frame directory or .vten file")->required();
  pp->add_option("--output", pp_out, "Output .vten path")->required();
  pp->add_option("--height", pp_h, "Output height")->check(CLI::PositiveNumber);
  pp->add_option("--width", pp_w, "Output width")->check(CLI::PositiveNumber);
  pp->add_flag("--mean-subtract", pp_mean, "Subtract the per-channel mean");
  pp->add_option("--id", pp_id, "Video id (defaults to the input name)");

  // augment
  std::string au_in, au_out;
  int au_mult = 3;
  auto* au = app.add_subcommand("augment", "Add flipped copies of the training split to a manifest");
  au->add_option("--manifest", au_in, "Input manifest")->required();
  au->add_option("--output", au_out, "Output manifest")->required();
  au->add_option("--multiplicity", au_mult, "1, 2 (hflip) or 3 (hflip + vflip)")->check(CLI::Range(1, 3));

  // synth
  std::string sy_out;
  data::SynthConfig sy;
  std::size_t sy_size = 32;
  auto* syc = app.add_subcommand("synth", "Write the synthetic moving-block fixture");
  syc->add_option("--output", sy_out, "Output directory")->required();
  syc->add_option("--seed", sy.seed, "Generator seed");
  syc->add_option("--classes", sy.num_classes, "Number of classes (2..14)");
  syc->add_option("--clips", sy.clips_per_class, "Training clips per class");
  syc->add_option("--test-clips", sy.test_clips_per_class, "Test clips per class");
  syc->add_option("--size", sy_size, "Frame height and width");
  syc->add_option("--frames", sy.frames, "Frames per clip");

  // train
  std::string tr_manifest, tr_ann, tr_out, tr_config, tr_log, tr_init;
  Experiment tr_flags;
  auto* tr = app.add_subcommand("train", "Train a network on the training split of a manifest");
  tr->add_option("--manifest", tr_manifest, "Manifest (.tsv)")->required();
  tr->add_option("--annotations", tr_ann, "Frame annotations (.csv)")->required();
  tr->add_option("--output", tr_out, "Checkpoint path")->required();
  tr->add_option("--config", tr_config, "key = value config file");
  tr->add_option("--log", tr_log, "Epoch log (epoch,loss,acc,lr)");
  tr->add_option("--init-from", tr_init, "Checkpoint to fine-tune from (name-matched layers)");
  auto* o_seed = tr->add_option("--seed", tr_flags.train.seed, "Seed (CUBE3D_SEED overrides)");
  auto* o_epochs = tr->add_option("--epochs", tr_flags.train.max_epochs, "Maximum epochs");
  auto* o_batch = tr->add_option("--batch-size", tr_flags.train.batch_size, "Mini-batch size");
  auto* o_lr = tr->add_option("--learning-rate", tr_flags.train.learning_rate, "Initial learning rate");
  auto* o_mom = tr->add_option("--momentum", tr_flags.train.momentum, "SGD momentum");
  auto* o_drop = tr->add_option("--dropout", tr_flags.train.dropout_rate, "Dropout rate");
  auto* o_std = tr->add_option("--init-std", tr_flags.train.init_std, "Weight init standard deviation");
  auto* o_init = tr->add_option("--init", tr_flags.train.init, "normal (--init-std) or he (fan-in scaled)")
                     ->check(CLI::IsMember({"normal", "he"}));
  auto* o_arch = tr->add_option("--arch", tr_flags.arch, "compact (input sized to the data) or full (16x170x170)");
  auto* o_classes = tr->add_option("--num-classes", tr_flags.num_classes, "Classifier outputs");
  auto* o_zero = tr->add_flag("--zero-head", tr_flags.zero_head, "Start the classifier weights at zero");
  auto* o_mult = tr->add_option("--multiplicity", tr_flags.multiplicity, "Flip augmentation of the training split");

  // predict
  std::string pr_ck, pr_in, pr_manifest, pr_out, pr_id, pr_split = "test";
  auto* pr = app.add_subcommand("predict", "Per-window class probabilities for videos");
  pr->add_option("--checkpoint", pr_ck, "Checkpoint")->required();
  auto* pr_input = pr->add_option("--input", pr_in, "One frame directory or .vten");
  auto* pr_man = pr->add_option("--manifest", pr_manifest, "Predict every original entry of a split");
  pr_input->excludes(pr_man);
  pr->add_option("--split", pr_split, "Split for --manifest")->check(CLI::IsMember({"train", "test"}));
  pr->add_option("--id", pr_id, "Video id for --input");
  pr->add_option("--output", pr_out, "Trace CSV")->required();

  // evaluate
  std::string ev_trace, ev_ann, ev_out, ev_unit = "cube";
  auto* ev = app.add_subcommand("evaluate", "Metrics report from a prediction trace and annotations");
  ev->add_option("--trace", ev_trace, "Trace CSV from predict")->required();
  ev->add_option("--annotations", ev_ann, "Frame annotations (.csv)")->required();
  ev->add_option("--output", ev_out, "Report directory")->required();
  ev->add_option("--unit", ev_unit, "cube (default) or video (majority vote)")->check(CLI::IsMember({"cube", "video"}));

  // stats
  std::string st_manifest, st_ann;
  double st_fps = data::kDefaultFps;
  auto* st = app.add_subcommand("stats", "Per-split video counts and durations");
  st->add_option("--manifest", st_manifest, "Manifest (.tsv)")->required();
  st->add_option("--annotations", st_ann, "Frame annotations (.csv)")->required();
  st->add_option("--fps", st_fps, "Frame rate")->check(CLI::PositiveNumber);

  // audit
  std::string ad_ck;
  std::size_t ad_classes = data::kNumClasses;
  auto* ad = app.add_subcommand("audit", "Layer shape chain against the reference architecture table");
  ad->add_option("--checkpoint", ad_ck, "Audit the architecture stored in a checkpoint");
  ad->add_option("--num-classes", ad_classes, "Classifier outputs of a fresh model")->check(CLI::Range(2, 14));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    err << "run 'cube3d --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (*pp) {
      data::FrameSequence seq = data::ingest_frames(pp_in, pp_id);
      seq = data::preprocess(seq, {pp_h, pp_w, pp_mean});
      data::save_frames_vten(pp_out, seq);
      out << seq.video_id << ": " << seq.frame_count() << " frames at " << pp_h << "x" << pp_w << " -> " << pp_out << "\n";
    } else if (*au) {
      const data::Manifest m = data::read_manifest(au_in);
      const data::Manifest a = data::augment_manifest(m, au_mult);
      data::write_manifest(au_out, a);
      out << m.entries.size() << " entries -> " << a.entries.size() << " entries\n";
    } else if (*syc) {
      sy.height = sy.width = sy_size;
      const auto fx = data::synth_fixture(sy);
      data::write_fixture(sy_out, fx);
      out << fx.videos.size() << " synthetic videos written to " << sy_out << "\n";
    } else if (*tr) {
      Experiment x;
      if (!tr_config.empty()) apply_config_text(x, io::read_file(tr_config));
      if (o_seed->count()) x.train.seed = tr_flags.train.seed;
      if (o_epochs->count()) x.train.max_epochs = tr_flags.train.max_epochs;
      if (o_batch->count()) x.train.batch_size = tr_flags.train.batch_size;
      if (o_lr->count()) x.train.learning_rate = tr_flags.train.learning_rate;
      if (o_mom->count()) x.train.momentum = tr_flags.train.momentum;
      if (o_drop->count()) x.train.dropout_rate = tr_flags.train.dropout_rate;
      if (o_std->count()) x.train.init_std = tr_flags.train.init_std;
      if (o_init->count()) x.train.init = tr_flags.train.init;
      if (o_arch->count()) x.arch = tr_flags.arch;
      if (o_classes->count()) x.num_classes = tr_flags.num_classes;
      if (o_zero->count()) x.zero_head = tr_flags.zero_head;
      if (o_mult->count()) x.multiplicity = tr_flags.multiplicity;
      train::apply_seed_env(x.train);
      return run_train(x, tr_manifest, tr_ann, tr_out, tr_log, tr_init, out);
    } else if (*pr) {
      const auto loaded = model::load_checkpoint<float>(pr_ck);
      std::vector<train::PredictionTrace> traces;
      if (!pr_manifest.empty()) {
        const data::Manifest m = data::read_manifest(pr_manifest);
        for (const auto& e : m.split(data::parse_split(pr_split)))
          if (e.origin == data::Origin::original)
            traces.push_back(train::predict_video(loaded.net, fit_to_net(data::load_entry(m, e), loaded.net)));
      } else if (!pr_in.empty()) {
        traces.push_back(train::predict_video(loaded.net, fit_to_net(data::ingest_frames(pr_in, pr_id), loaded.net)));
      } else {
        err << "usage error: predict needs --input or --manifest\n";
        return kExitUsage;
      }
      io::write_file(pr_out, train::format_traces(traces));
      std::size_t records = 0;
      for (const auto& t : traces) records += t.records.size();
      out << traces.size() << " videos, " << records << " windows -> " << pr_out << "\n";
    } else if (*ev) {
      const auto traces = train::parse_traces(io::read_file(ev_trace));
      if (traces.empty()) fail(ErrorKind::validation, "trace has no records");
      const auto rows = train::rows_from_traces(traces, data::read_annotations(ev_ann));
      const std::size_t C = rows.scores.front().size();
      metrics::MetricsReport report;
      if (ev_unit == "video") {
        const auto v = metrics::aggregate_by_video(rows.video_ids, rows.truth, rows.scores, C);
        report = metrics::compute_report(v.truth, v.scores, C, v.predicted, metrics::Unit::video);
      } else {
        report = metrics::compute_report(rows.truth, rows.scores, C);
      }
      metrics::write_report(ev_out, report);
      char buf[160];
      std::snprintf(buf, sizeof buf, "average accuracy %.4f, mean precision %.4f, mean recall %.4f, mean F1 %.4f\n",
                    report.average_accuracy, report.prf.mean_precision, report.prf.mean_recall, report.prf.mean_f1);
      out << report.samples << " " << metrics::to_string(report.unit) << " samples\n" << buf;
      std::snprintf(buf, sizeof buf, "micro AUC %.4f, ", report.micro.auc);
      out << buf;
      if (report.macro_auc) {
        std::snprintf(buf, sizeof buf, "macro AUC %.4f\n", *report.macro_auc);
        out << buf;
      } else {
        out << "macro AUC undefined\n";
      }
      out << "report written to " << ev_out << "\n";
    } else if (*st) {
      const data::Manifest m = data::read_manifest(st_manifest);
      out << data::format_stats(data::dataset_stats(m, data::read_annotations(st_ann), st_fps));
    } else if (*ad) {
      model::ModelConfig mc = model::ModelConfig::full(ad_classes);
      model::AnomalyNet<float> net;
      if (!ad_ck.empty()) {
        auto loaded = model::load_checkpoint<float>(ad_ck);
        mc = loaded.config;
        net = std::move(loaded.net);
      } else {
        net = model::build_model<float>(mc);
      }
      const auto ref = model::ModelConfig::full(mc.num_classes);
      const bool compare = mc.input == ref.input && mc.conv_channels == ref.conv_channels && mc.fc_width == ref.fc_width;
      const Shape input{1, mc.input[0], mc.input[1], mc.input[2], mc.input[3]};
      const auto audit = model::shape_audit(net, input, compare);
      out << format_audit(audit);
      if (!compare) out << "architecture differs from the reference table; shapes listed without comparison\n";
      return audit.undocumented() == 0 ? kExitOk : kExitFailure;
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace cube3d::cli
