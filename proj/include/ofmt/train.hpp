#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ofmt/model.hpp"
#include "ofmt/pipeline.hpp"

namespace ofmt {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  // (epoch upper bound, lr): epoch e uses the first pair with e < bound
  std::vector<std::pair<int, double>> lr_schedule = {{25, 0.01}, {50, 0.001}};
  uint64_t seed = 0;
};

TrainConfig default_3d_config();  // batch 10, 100 epochs, four lr brackets
TrainConfig default_2d_config();  // batch 32, 50 epochs, two lr brackets

void validate_config(const TrainConfig& config);
double lr_for_epoch(const TrainConfig& config, int epoch);

struct Sample {
  TensorPtr<float> input;
  int label = -1;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double loss = 0;  // mean per-sample cross-entropy on the training set
  double train_acc = 0;
  double test_acc = 0;  // -1 when no test set was supplied
};

std::string log_line(const EpochLog& l);

// Mini-batch SGD, updating `model` in place. Deterministic in config.seed.
std::vector<EpochLog> train_model(Model<float>& model, const std::vector<Sample>& train,
                                  const std::vector<Sample>& test, const TrainConfig& config,
                                  bool verbose = false);

struct EvalResult {
  double accuracy = 0;
  // rows: true class, columns: predicted class
  std::vector<std::vector<long>> confusion;
};

EvalResult evaluate_model(const Model<float>& model, const std::vector<Sample>& data);
std::string confusion_csv(const EvalResult& r);

std::vector<double> class_scores(const Model<float>& model, const TensorPtr<float>& input);

struct FusionWeights {
  double w3 = 0.6;  // 3D stream (gamma)
  double w2 = 0.4;  // 2D stream (delta)
};

std::vector<double> fuse_scores(const std::vector<double>& p3, const std::vector<double>& p2,
                                const FusionWeights& w);
int argmax_class(const std::vector<double>& scores);  // ties go to the lowest index

struct Prediction {
  int label = -1;
  std::vector<double> scores;
};

Prediction predict(const GestureClip& clip, const Model<float>& c3d, const Model<float>& lenet,
                   const FusionWeights& w, const PipelineParams& params);

}  // namespace ofmt
