#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace capstream {

enum class CellType { GRU, LSTM };

std::string_view to_string(CellType cell);
CellType parse_cell_type(std::string_view name);

struct ModelSpec {
  CellType cell = CellType::GRU;
  int input = 4;
  int hidden = 20;
  std::vector<int> dense{32, 64, 32, 10};  // relu on all but the last (softmax)
  int frame_length = 64;                   // T expected by the model

  int gates() const noexcept { return cell == CellType::GRU ? 3 : 4; }
  int classes() const noexcept { return dense.empty() ? hidden : dense.back(); }
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Recurrent cell followed by a dense stack. Parameters are stored as a flat
/// list of blocks:
///   0: Wx  (gates*hidden x input)
///   1: Wh  (gates*hidden x hidden)
///   2: b   (gates*hidden x 1)
///   3+2l: W_l (width_l x width_{l-1}),  4+2l: b_l (width_l x 1)
/// Gate order is z, r, n for the GRU and i, f, g, o for the LSTM.
class Model {
 public:
  Model() = default;
  explicit Model(ModelSpec spec);  // all-zero parameters

  /// Glorot-uniform input and dense kernels, orthogonal recurrent blocks,
  /// zero biases (LSTM forget-gate bias 1).
  static Model initialize(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const noexcept { return spec_; }
  std::vector<Eigen::MatrixXd>& params() noexcept { return params_; }
  const std::vector<Eigen::MatrixXd>& params() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept;
  bool finite() const;

  /// Zero-filled blocks with the model's shapes.
  std::vector<Eigen::MatrixXd> zeros_like() const;

  friend bool operator==(const Model& a, const Model& b);

 private:
  ModelSpec spec_;
  std::vector<Eigen::MatrixXd> params_;
};

using Gradients = std::vector<Eigen::MatrixXd>;

/// Class probabilities for one sequence; x is input x T (one column per step).
Eigen::VectorXd forward(const Model& model, const Eigen::MatrixXd& x);

/// -log p[label], with the log argument clamped at 1e-12.
double cross_entropy(const Eigen::VectorXd& probs, int label);

/// Forward + backpropagation through time for one labelled sequence. Adds
/// dL/dparams into `grad` (which must be shaped like the model) and returns
/// the loss. `probs_out`, when given, receives the forward probabilities.
double accumulate_gradient(const Model& model, const Eigen::MatrixXd& x, int label, Gradients& grad,
                           Eigen::VectorXd* probs_out = nullptr);

}  // namespace capstream
