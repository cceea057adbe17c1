#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "capstream/detector.hpp"
#include "capstream/nn.hpp"

namespace capstream {

/// Fixed-length classifier input: kNumSensors x T, one column per time step.
struct FrameTensor {
  Eigen::MatrixXd values;

  Eigen::Index length() const noexcept { return values.cols(); }
};

/// Linear resampling of each channel to T samples, per-channel mean removal,
/// then division by the RMS over all channels (an all-flat frame becomes zeros).
FrameTensor frame_to_tensor(const GestureFrame& frame, int T);
FrameTensor channels_to_tensor(const std::array<std::vector<double>, kNumSensors>& channels, int T);

struct Prediction {
  int class_id = 1;                // 1-based
  Eigen::VectorXd probabilities;   // index c-1 holds class c
};

Prediction predict(const Model& model, const FrameTensor& tensor);

/// Loss of a prediction against a 1-based true class.
double loss(const Prediction& prediction, int true_class);

struct LabeledTensor {
  FrameTensor tensor;
  int class_id = 1;  // 1-based
};

enum class GradientReduction {
  Mean,  // step on the batch-mean gradient
  Sum,   // step on the sum of per-example gradients
};

std::string_view to_string(GradientReduction r);
GradientReduction parse_gradient_reduction(std::string_view name);

struct TrainConfig {
  int epochs = 60;
  int batch_size = 10;
  double learning_rate = 0.005;
  std::uint64_t seed = 1;
  double validation_fraction = 0.2;
  GradientReduction reduction = GradientReduction::Sum;

  void validate() const;
};

/// Plain gradient descent on one batch: params -= lr * grad. Returns the mean
/// loss of the batch evaluated before the update. Throws training-diverged on
/// non-finite gradients.
double backward_and_update(Model& model, const std::vector<const LabeledTensor*>& batch, double learning_rate,
                           GradientReduction reduction = GradientReduction::Sum,
                           std::size_t* correct_out = nullptr);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double val_loss = 0;
  double val_accuracy = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

/// Stratified, seeded split: round(fraction * n_c) examples of each class go to
/// validation (classes with a single example stay in training).
void stratified_split(const std::vector<LabeledTensor>& data, double fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& val);

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const std::vector<LabeledTensor>& data, const ModelSpec& spec, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;
};

struct EvalReport {
  std::size_t total = 0;
  double accuracy = 0;
  double loss = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true-1][pred-1]
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
};

/// Metrics from a confusion matrix; classes without predictions get precision 0.
EvalReport metrics_from_confusion(const std::vector<std::vector<std::size_t>>& confusion);

/// Accuracy, per-class precision/recall/F1, and macro averages from label pairs (1-based).
EvalReport evaluate_predictions(const std::vector<int>& truth, const std::vector<int>& predicted, int classes);

EvalReport evaluate(const Model& model, const std::vector<LabeledTensor>& data);
EvalReport evaluate(const Model& model, const std::vector<LabeledTensor>& data,
                    const std::vector<std::size_t>& subset);

/// Binary container: magic, version, spec header, then each parameter block as
/// rows, cols and row-major doubles. A JSON sidecar (`<path>.json`) carries
/// the hyper-parameters for humans and tooling.
void save_model(const std::filesystem::path& path, const Model& model, const TrainConfig* train_cfg = nullptr);
Model load_model(const std::filesystem::path& path);

}  // namespace capstream
