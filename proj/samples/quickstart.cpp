// Library walkthrough: synthesize a small fixture, train a compact network,
// predict the held-out clips and print the metrics.

#include <cstdio>

#include "cube3d/cube3d.hpp"

using namespace cube3d;

int main() {
  data::SynthConfig sc;  // 4 classes, 8 training and 2 test clips each, 64 frames at 32x32
  const data::SynthFixture fx = data::synth_fixture(sc);

  std::vector<data::Cube> cubes;
  for (std::size_t i = 0; i < fx.videos.size(); ++i)
    if (fx.manifest.entries[i].split == data::Split::train)
      for (auto& c : data::assemble_cubes(fx.videos[i], data::annotations_for(fx.annotations, fx.videos[i].video_id)))
        cubes.push_back(std::move(c));

  train::TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01;
  cfg.momentum = 0.9;
  cfg.dropout_rate = 0.0;
  cfg.max_epochs = 8;
  cfg.seed = 1;

  auto mc = model::ModelConfig::compact(data::kCubeFrames, sc.height, sc.width, sc.num_classes);
  mc.dropout_rate = cfg.dropout_rate;
  auto net = model::build_model<float>(mc);
  model::init_weights(net, {cfg.seed, cfg.init_std, true, model::InitScheme::he});

  std::printf("%zu training cubes\n%s\n", cubes.size(), std::string(train::kEpochLogHeader).c_str());
  train::train(net, cubes, cfg, [](const train::EpochReport& r) {
    std::printf("%s\n", train::format_epoch_line(r).c_str());
    return r.accuracy < 0.99;
  });

  std::vector<train::PredictionTrace> traces;
  for (std::size_t i = 0; i < fx.videos.size(); ++i)
    if (fx.manifest.entries[i].split == data::Split::test) traces.push_back(train::predict_video(net, fx.videos[i]));
  const auto rows = train::rows_from_traces(traces, fx.annotations);
  const auto report = metrics::compute_report(rows.truth, rows.scores, sc.num_classes);

  std::printf("test windows %zu: average accuracy %.3f, mean F1 %.3f, micro AUC %.3f\n", report.samples,
              report.average_accuracy, report.prf.mean_f1, report.micro.auc);
  return 0;
}
