#include "capstream/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "capstream/error.hpp"

namespace capstream {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr char kMagic[8] = {'C', 'A', 'P', 'S', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) fail(Errc::Model, "truncated model file");
  return v;
}

}  // namespace

FrameTensor channels_to_tensor(const std::array<std::vector<double>, kNumSensors>& channels, int T) {
  require(T >= 2, Errc::InvalidParameter, "frame length T must be >= 2");
  const std::size_t len = channels[0].size();
  if (len == 0) fail(Errc::InvalidInput, "empty frame");
  for (const auto& ch : channels) require(ch.size() == len, Errc::InvalidInput, "frame channels differ in length");

  FrameTensor out;
  out.values.resize(static_cast<Eigen::Index>(kNumSensors), T);
  for (std::size_t s = 0; s < kNumSensors; ++s) {
    const auto& src = channels[s];
    for (int m = 0; m < T; ++m) {
      double v;
      if (len == 1) {
        v = src[0];
      } else {
        const double pos = static_cast<double>(m) * static_cast<double>(len - 1) / static_cast<double>(T - 1);
        const auto lo = std::min(static_cast<std::size_t>(pos), len - 2);
        const double frac = pos - static_cast<double>(lo);
        v = src[lo] + frac * (src[lo + 1] - src[lo]);
      }
      out.values(static_cast<Eigen::Index>(s), m) = v;
    }
  }
  // Channels keep their relative amplitude: per-channel mean removal, one shared scale.
  out.values.colwise() -= out.values.rowwise().mean();
  const double scale = std::sqrt(out.values.array().square().mean());
  if (scale <= 1e-6) {
    out.values.setZero();
  } else {
    out.values /= scale;
  }
  return out;
}

FrameTensor frame_to_tensor(const GestureFrame& frame, int T) { return channels_to_tensor(frame.channels, T); }

Prediction predict(const Model& model, const FrameTensor& tensor) {
  Prediction p;
  p.probabilities = forward(model, tensor.values);
  Eigen::Index best = 0;
  p.probabilities.maxCoeff(&best);
  p.class_id = static_cast<int>(best) + 1;
  return p;
}

double loss(const Prediction& prediction, int true_class) {
  require(true_class >= 1 && true_class <= prediction.probabilities.size(), Errc::InvalidInput,
          "true class outside the prediction");
  return cross_entropy(prediction.probabilities, true_class - 1);
}

std::string_view to_string(GradientReduction r) { return r == GradientReduction::Mean ? "mean" : "sum"; }

GradientReduction parse_gradient_reduction(std::string_view name) {
  if (name == "mean") return GradientReduction::Mean;
  if (name == "sum") return GradientReduction::Sum;
  fail(Errc::Config, "unknown gradient reduction: " + std::string(name));
}

void TrainConfig::validate() const {
  require(epochs > 0 && batch_size > 0 && learning_rate >= 0, Errc::InvalidParameter,
          "epochs and batch size must be positive, learning rate non-negative");
  require(validation_fraction >= 0 && validation_fraction < 1, Errc::InvalidParameter,
          "validation fraction must lie in [0,1)");
}

double backward_and_update(Model& model, const std::vector<const LabeledTensor*>& batch, double learning_rate,
                           GradientReduction reduction, std::size_t* correct_out) {
  if (batch.empty()) fail(Errc::InvalidInput, "empty batch");
  Gradients grad = model.zeros_like();
  double total = 0;
  std::size_t correct = 0;
  VectorXd probs;
  for (const auto* ex : batch) {
    total += accumulate_gradient(model, ex->tensor.values, ex->class_id - 1, grad, &probs);
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    if (best == ex->class_id - 1) ++correct;
  }
  const double scale = reduction == GradientReduction::Mean ? 1.0 / static_cast<double>(batch.size()) : 1.0;
  for (auto& g : grad) {
    if (!g.allFinite()) fail(Errc::TrainingDiverged, "non-finite gradient");
  }
  auto& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= (learning_rate * scale) * grad[i];
  if (!model.finite()) fail(Errc::TrainingDiverged, "non-finite parameters after update");
  if (correct_out) *correct_out += correct;
  return total / static_cast<double>(batch.size());
}

void stratified_split(const std::vector<LabeledTensor>& data, double fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].class_id].push_back(i);
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  train_idx.clear();
  val_idx.clear();
  for (auto& [cls, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    if (idx.size() < 2) n_val = 0;
    n_val = std::min(n_val, idx.size() - 1);
    val_idx.insert(val_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
}

TrainResult train(const std::vector<LabeledTensor>& data, const ModelSpec& spec, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  spec.validate();
  if (data.empty()) fail(Errc::InvalidInput, "empty training dataset");
  for (const auto& ex : data) {
    require(ex.class_id >= 1 && ex.class_id <= spec.classes(), Errc::InvalidInput, "label outside model classes");
    require(ex.tensor.values.rows() == spec.input, Errc::Model, "tensor channels do not match the model");
  }

  TrainResult result;
  stratified_split(data, cfg.validation_fraction, cfg.seed, result.train_indices, result.val_indices);
  result.model = Model::initialize(spec, cfg.seed);

  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 7);
  std::vector<std::size_t> order = result.train_indices;
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t correct = 0;
    std::vector<const LabeledTensor*> batch;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      batch.clear();
      for (std::size_t i = begin; i < std::min(begin + batch_size, order.size()); ++i) batch.push_back(&data[order[i]]);
      loss_sum += backward_and_update(result.model, batch, cfg.learning_rate, cfg.reduction, &correct) *
                  static_cast<double>(batch.size());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    if (!result.val_indices.empty()) {
      const EvalReport val = evaluate(result.model, data, result.val_indices);
      rec.val_loss = val.loss;
      rec.val_accuracy = val.accuracy;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

EvalReport metrics_from_confusion(const std::vector<std::vector<std::size_t>>& confusion) {
  EvalReport r;
  r.confusion = confusion;
  const std::size_t k = confusion.size();
  std::size_t diag = 0;
  for (std::size_t t = 0; t < k; ++t) {
    require(confusion[t].size() == k, Errc::InvalidInput, "confusion matrix must be square");
    for (std::size_t p = 0; p < k; ++p) r.total += confusion[t][p];
    diag += confusion[t][t];
  }
  r.accuracy = r.total ? static_cast<double>(diag) / static_cast<double>(r.total) : 0.0;
  r.per_class.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t i = 0; i < k; ++i) {
      predicted += confusion[i][c];
      actual += confusion[c][i];
    }
    auto& m = r.per_class[c];
    m.support = actual;
    const double tp = static_cast<double>(confusion[c][c]);
    m.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? tp / static_cast<double>(actual) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
  }
  if (k) {
    r.macro_precision /= static_cast<double>(k);
    r.macro_recall /= static_cast<double>(k);
    r.macro_f1 /= static_cast<double>(k);
  }
  return r;
}

EvalReport evaluate_predictions(const std::vector<int>& truth, const std::vector<int>& predicted, int classes) {
  require(truth.size() == predicted.size(), Errc::InvalidInput, "truth and predictions differ in length");
  std::vector<std::vector<std::size_t>> confusion(static_cast<std::size_t>(classes),
                                                  std::vector<std::size_t>(static_cast<std::size_t>(classes), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] >= 1 && truth[i] <= classes && predicted[i] >= 1 && predicted[i] <= classes,
            Errc::InvalidInput, "label outside [1, classes]");
    ++confusion[static_cast<std::size_t>(truth[i] - 1)][static_cast<std::size_t>(predicted[i] - 1)];
  }
  return metrics_from_confusion(confusion);
}

EvalReport evaluate(const Model& model, const std::vector<LabeledTensor>& data, const std::vector<std::size_t>& subset) {
  std::vector<int> truth, pred;
  truth.reserve(subset.size());
  pred.reserve(subset.size());
  double loss_sum = 0;
  for (std::size_t i : subset) {
    const auto p = predict(model, data.at(i).tensor);
    truth.push_back(data[i].class_id);
    pred.push_back(p.class_id);
    loss_sum += loss(p, data[i].class_id);
  }
  EvalReport r = evaluate_predictions(truth, pred, model.spec().classes());
  r.loss = subset.empty() ? 0.0 : loss_sum / static_cast<double>(subset.size());
  return r;
}

EvalReport evaluate(const Model& model, const std::vector<LabeledTensor>& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return evaluate(model, data, all);
}

void save_model(const std::filesystem::path& path, const Model& model, const TrainConfig* train_cfg) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write model " + path.string());
  const auto& spec = model.spec();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, spec.cell == CellType::GRU ? 0u : 1u);
  put<std::int32_t>(out, spec.input);
  put<std::int32_t>(out, spec.hidden);
  put<std::int32_t>(out, spec.frame_length);
  put<std::int32_t>(out, static_cast<std::int32_t>(spec.dense.size()));
  for (int w : spec.dense) put<std::int32_t>(out, w);
  put<std::int32_t>(out, static_cast<std::int32_t>(model.params().size()));
  for (const auto& block : model.params()) {
    put<std::int64_t>(out, block.rows());
    put<std::int64_t>(out, block.cols());
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
      for (Eigen::Index c = 0; c < block.cols(); ++c) put<double>(out, block(r, c));
    }
  }
  if (!out) fail(Errc::Io, "write failed: " + path.string());

  nlohmann::json meta;
  meta["format"] = "capstream-model";
  meta["version"] = kFormatVersion;
  meta["cell"] = std::string(to_string(spec.cell));
  meta["input"] = spec.input;
  meta["hidden"] = spec.hidden;
  meta["dense"] = spec.dense;
  meta["frame_length"] = spec.frame_length;
  meta["parameters"] = model.parameter_count();
  if (train_cfg) {
    meta["train"] = {{"epochs", train_cfg->epochs},
                     {"batch_size", train_cfg->batch_size},
                     {"learning_rate", train_cfg->learning_rate},
                     {"seed", train_cfg->seed},
                     {"validation_fraction", train_cfg->validation_fraction},
                     {"gradient_reduction", std::string(to_string(train_cfg->reduction))},
                     {"loss", "categorical_crossentropy"},
                     {"optimizer", "gradient_descent"}};
  }
  std::ofstream side(path.string() + ".json");
  if (!side) fail(Errc::Io, "cannot write model sidecar for " + path.string());
  side << meta.dump(2) << '\n';
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open model " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) fail(Errc::Model, "not a capstream model file");
  const auto version = get<std::uint32_t>(in);
  if (version != kFormatVersion) fail(Errc::Model, "unsupported model format version " + std::to_string(version));
  ModelSpec spec;
  const auto cell = get<std::uint32_t>(in);
  if (cell > 1) fail(Errc::Model, "unknown cell type in model file");
  spec.cell = cell == 0 ? CellType::GRU : CellType::LSTM;
  spec.input = get<std::int32_t>(in);
  spec.hidden = get<std::int32_t>(in);
  spec.frame_length = get<std::int32_t>(in);
  const auto n_dense = get<std::int32_t>(in);
  if (n_dense <= 0 || n_dense > 64) fail(Errc::Model, "implausible dense layer count");
  spec.dense.clear();
  for (int i = 0; i < n_dense; ++i) spec.dense.push_back(get<std::int32_t>(in));
  Model model(spec);
  const auto n_blocks = get<std::int32_t>(in);
  if (n_blocks != static_cast<std::int32_t>(model.params().size())) fail(Errc::Model, "parameter block count mismatch");
  for (auto& block : model.params()) {
    const auto rows = get<std::int64_t>(in);
    const auto cols = get<std::int64_t>(in);
    if (rows != block.rows() || cols != block.cols()) fail(Errc::Model, "parameter block shape mismatch");
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) block(r, c) = get<double>(in);
    }
  }
  if (!model.finite()) fail(Errc::Model, "model contains non-finite parameters");
  return model;
}

}  // namespace capstream
