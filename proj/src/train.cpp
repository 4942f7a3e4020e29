#include "ofmt/train.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <iostream>

namespace ofmt {

TrainConfig default_3d_config() {
  return {100, 10, {{25, 0.01}, {50, 0.001}, {75, 1e-4}, {100, 1e-5}}, 0};
}

TrainConfig default_2d_config() {
  return {50, 32, {{25, 0.01}, {50, 0.001}}, 0};
}

void validate_config(const TrainConfig& config) {
  if (config.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (config.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (config.lr_schedule.empty()) throw ConfigError("train: empty lr schedule");
  for (size_t i = 0; i < config.lr_schedule.size(); ++i) {
    if (config.lr_schedule[i].second <= 0)
      throw ConfigError("train: learning rates must be > 0");
    if (i > 0) {
      if (config.lr_schedule[i].first <= config.lr_schedule[i - 1].first)
        throw ConfigError("train: schedule epoch bounds must be strictly increasing");
      if (config.lr_schedule[i].second >= config.lr_schedule[i - 1].second)
        throw ConfigError("train: schedule learning rates must be strictly decreasing");
    }
  }
}

double lr_for_epoch(const TrainConfig& config, int epoch) {
  for (const auto& [bound, lr] : config.lr_schedule)
    if (epoch < bound) return lr;
  return config.lr_schedule.back().second;  // past the last bracket: keep the final rate
}

std::string log_line(const EpochLog& l) {
  std::ostringstream os;
  os << "epoch=" << l.epoch << " lr=" << l.lr << " loss=" << l.loss
     << " train_acc=" << l.train_acc << " test_acc=" << l.test_acc;
  return os.str();
}

namespace {

uint64_t mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_dataset(const std::vector<Sample>& data, int num_classes) {
  if (data.empty()) throw DataError("train: empty dataset");
  for (const auto& s : data)
    if (s.label < 0 || s.label >= num_classes)
      throw DataError("train: label " + std::to_string(s.label) + " outside [0," +
                      std::to_string(num_classes) + ")");
}

}  // namespace

std::vector<EpochLog> train_model(Model<float>& model, const std::vector<Sample>& train,
                                  const std::vector<Sample>& test, const TrainConfig& config,
                                  bool verbose) {
  validate_config(config);
  check_dataset(train, model.spec.num_classes);
  if (!test.empty()) check_dataset(test, model.spec.num_classes);
  model.set_requires_grad(true);

  std::vector<EpochLog> logs;
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(mix(config.seed ^ (static_cast<uint64_t>(epoch) + 1)));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = lr_for_epoch(config, epoch);

    double loss_sum = 0;
    long correct = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      for (size_t b = start; b < end; ++b) {
        const Sample& s = train[order[b]];
        Tape<float> tape;  // per-sample tape; gradients accumulate in the params
        auto logits = model.forward(tape, s.input, Mode::Train, rng);
        auto [probs, loss] = softmax_crossentropy(tape, logits, s.label);
        loss_sum += loss->data[0];
        if (argmax_class(std::vector<double>(probs->data.begin(), probs->data.end())) == s.label)
          ++correct;
        tape.backward(loss);
      }
      // gradients were summed over the batch; average them through the step size
      sgd_update(model.params, lr / static_cast<double>(end - start));
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.loss = loss_sum / static_cast<double>(train.size());
    log.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
    log.test_acc = test.empty() ? -1.0 : evaluate_model(model, test).accuracy;
    if (verbose) std::cerr << log_line(log) << "\n";
    logs.push_back(log);
  }
  return logs;
}

std::vector<double> class_scores(const Model<float>& model, const TensorPtr<float>& input) {
  Tape<float> tape;
  std::mt19937_64 rng(0);  // unused in eval mode
  auto logits = model.forward(tape, input, Mode::Eval, rng);
  return softmax(logits->data);
}

EvalResult evaluate_model(const Model<float>& model, const std::vector<Sample>& data) {
  check_dataset(data, model.spec.num_classes);
  const int N = model.spec.num_classes;
  EvalResult r;
  r.confusion.assign(N, std::vector<long>(N, 0));
  long correct = 0;
  for (const auto& s : data) {
    const int pred = argmax_class(class_scores(model, s.input));
    r.confusion[s.label][pred]++;
    if (pred == s.label) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return r;
}

std::string confusion_csv(const EvalResult& r) {
  std::ostringstream os;
  for (const auto& row : r.confusion) {
    for (size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
    os << "\n";
  }
  return os.str();
}

std::vector<double> fuse_scores(const std::vector<double>& p3, const std::vector<double>& p2,
                                const FusionWeights& w) {
  if (p3.size() != p2.size()) throw DimensionError("fuse_scores: score lengths differ");
  if (p3.empty()) throw Error("fuse_scores: empty scores");
  if (w.w3 < 0 || w.w2 < 0) throw ConfigError("fuse_scores: weights must be >= 0");
  std::vector<double> out(p3.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = w.w3 * p3[i] + w.w2 * p2[i];
  return out;
}

int argmax_class(const std::vector<double>& scores) {
  int best = 0;
  for (size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = static_cast<int>(i);
  return best;
}

Prediction predict(const GestureClip& clip, const Model<float>& c3d, const Model<float>& lenet,
                   const FusionWeights& w, const PipelineParams& params) {
  auto p3 = class_scores(c3d, clip_to_c3d_tensor(clip, params));
  auto p2 = class_scores(lenet, ofmt_image_to_tensor(clip_to_ofmt_image(clip, params),
                                                     lenet.spec.input_shape[1]));
  Prediction pred;
  pred.scores = fuse_scores(p3, p2, w);
  pred.label = argmax_class(pred.scores);
  return pred;
}

}  // namespace ofmt
