#include "capstream/nn.hpp"

#include <cmath>
#include <random>

#include "capstream/error.hpp"

namespace capstream {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

VectorXd softmax(const VectorXd& logits) {
  VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

// Per-step activations kept for the backward pass.
struct RecurrentTrace {
  MatrixXd h_prev;  // H x T
  MatrixXd c_prev;  // H x T (LSTM)
  MatrixXd gates;   // G*H x T, post-activation
  MatrixXd rh;      // H x T, r * h_prev (GRU)
  MatrixXd cell;    // H x T, c_t (LSTM)
  VectorXd h_last;
};

RecurrentTrace run_recurrent(const Model& model, const MatrixXd& x, bool keep_trace) {
  const auto& spec = model.spec();
  const auto& p = model.params();
  const int H = spec.hidden;
  const auto T = x.cols();
  const MatrixXd& Wx = p[0];
  const MatrixXd& Wh = p[1];
  const MatrixXd& b = p[2];

  MatrixXd ax = Wx * x;
  ax.colwise() += b.col(0);

  RecurrentTrace tr;
  if (keep_trace) {
    tr.h_prev.resize(H, T);
    tr.gates.resize(spec.gates() * H, T);
    if (spec.cell == CellType::GRU) {
      tr.rh.resize(H, T);
    } else {
      tr.c_prev.resize(H, T);
      tr.cell.resize(H, T);
    }
  }

  VectorXd h = VectorXd::Zero(H), c = VectorXd::Zero(H);
  VectorXd a(spec.gates() * H), rh(H);
  for (Eigen::Index t = 0; t < T; ++t) {
    a = ax.col(t);
    if (spec.cell == CellType::GRU) {
      a.head(2 * H).noalias() += Wh.topRows(2 * H) * h;
      for (int k = 0; k < 2 * H; ++k) a[k] = sigmoid(a[k]);
      rh = a.segment(H, H).cwiseProduct(h);
      a.tail(H).noalias() += Wh.bottomRows(H) * rh;
      a.tail(H) = a.tail(H).array().tanh();
      if (keep_trace) {
        tr.h_prev.col(t) = h;
        tr.rh.col(t) = rh;
        tr.gates.col(t) = a;
      }
      const auto z = a.head(H).array();
      h = ((1.0 - z) * a.tail(H).array() + z * h.array()).matrix();
    } else {
      a.noalias() += Wh * h;
      for (int k = 0; k < 2 * H; ++k) a[k] = sigmoid(a[k]);
      a.segment(2 * H, H) = a.segment(2 * H, H).array().tanh();
      for (int k = 3 * H; k < 4 * H; ++k) a[k] = sigmoid(a[k]);
      if (keep_trace) {
        tr.h_prev.col(t) = h;
        tr.c_prev.col(t) = c;
        tr.gates.col(t) = a;
      }
      c = (a.segment(H, H).array() * c.array() + a.head(H).array() * a.segment(2 * H, H).array()).matrix();
      h = (a.tail(H).array() * c.array().tanh()).matrix();
      if (keep_trace) tr.cell.col(t) = c;
    }
  }
  tr.h_last = h;
  return tr;
}

}  // namespace

std::string_view to_string(CellType cell) { return cell == CellType::GRU ? "gru" : "lstm"; }

CellType parse_cell_type(std::string_view name) {
  if (name == "gru" || name == "GRU") return CellType::GRU;
  if (name == "lstm" || name == "LSTM") return CellType::LSTM;
  fail(Errc::Config, "unknown cell type: " + std::string(name));
}

void ModelSpec::validate() const {
  require(input > 0 && hidden > 0 && frame_length > 1, Errc::Model, "model dimensions must be positive");
  require(!dense.empty(), Errc::Model, "dense stack must end in the class layer");
  for (int w : dense) require(w > 0, Errc::Model, "dense widths must be positive");
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const int gh = spec_.gates() * spec_.hidden;
  params_.push_back(MatrixXd::Zero(gh, spec_.input));
  params_.push_back(MatrixXd::Zero(gh, spec_.hidden));
  params_.push_back(MatrixXd::Zero(gh, 1));
  int prev = spec_.hidden;
  for (int w : spec_.dense) {
    params_.push_back(MatrixXd::Zero(w, prev));
    params_.push_back(MatrixXd::Zero(w, 1));
    prev = w;
  }
}

Model Model::initialize(const ModelSpec& spec, std::uint64_t seed) {
  Model m(spec);
  std::mt19937_64 rng(seed);
  auto glorot = [&rng](MatrixXd& block, double fan_in, double fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index c = 0; c < block.cols(); ++c) {
      for (Eigen::Index r = 0; r < block.rows(); ++r) block(r, c) = dist(rng);
    }
  };
  const int H = spec.hidden;
  const int G = spec.gates();
  glorot(m.params_[0], spec.input, G * H);

  // Recurrent kernel: an orthogonal H x H block per gate.
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int g = 0; g < G; ++g) {
    MatrixXd a(H, H);
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      for (Eigen::Index r = 0; r < a.rows(); ++r) a(r, c) = normal(rng);
    }
    Eigen::HouseholderQR<MatrixXd> qr(a);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(H, H);
    const MatrixXd rdiag = qr.matrixQR().diagonal().asDiagonal();
    for (int k = 0; k < H; ++k) {
      if (rdiag(k, k) < 0) q.col(k) = -q.col(k);
    }
    m.params_[1].middleRows(g * H, H) = q;
  }
  if (spec.cell == CellType::LSTM) m.params_[2].middleRows(H, H).setOnes();

  for (std::size_t l = 0; l < spec.dense.size(); ++l) {
    auto& w = m.params_[3 + 2 * l];
    glorot(w, static_cast<double>(w.cols()), static_cast<double>(w.rows()));
  }
  return m;
}

std::size_t Model::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& b : params_) n += static_cast<std::size_t>(b.size());
  return n;
}

bool Model::finite() const {
  for (const auto& b : params_) {
    if (!b.allFinite()) return false;
  }
  return true;
}

std::vector<MatrixXd> Model::zeros_like() const {
  std::vector<MatrixXd> out;
  out.reserve(params_.size());
  for (const auto& b : params_) out.push_back(MatrixXd::Zero(b.rows(), b.cols()));
  return out;
}

bool operator==(const Model& a, const Model& b) {
  if (!(a.spec_ == b.spec_) || a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].rows() != b.params_[i].rows() || a.params_[i].cols() != b.params_[i].cols() ||
        a.params_[i] != b.params_[i]) {
      return false;
    }
  }
  return true;
}

VectorXd forward(const Model& model, const MatrixXd& x) {
  const auto& spec = model.spec();
  if (x.rows() != spec.input) fail(Errc::Model, "input has " + std::to_string(x.rows()) + " channels, model expects " + std::to_string(spec.input));
  if (x.cols() < 1) fail(Errc::Model, "empty input sequence");
  VectorXd a = run_recurrent(model, x, false).h_last;
  const auto& p = model.params();
  for (std::size_t l = 0; l < spec.dense.size(); ++l) {
    VectorXd z = p[3 + 2 * l] * a + p[4 + 2 * l].col(0);
    a = l + 1 < spec.dense.size() ? VectorXd(z.cwiseMax(0.0)) : z;
  }
  return softmax(a);
}

double cross_entropy(const VectorXd& probs, int label) {
  return -std::log(std::max(probs[label], 1e-12));
}

double accumulate_gradient(const Model& model, const MatrixXd& x, int label, Gradients& grad, VectorXd* probs_out) {
  const auto& spec = model.spec();
  const auto& p = model.params();
  if (x.rows() != spec.input) fail(Errc::Model, "input channel count does not match the model");
  require(label >= 0 && label < spec.classes(), Errc::Model, "label outside the model's classes");
  require(grad.size() == p.size(), Errc::Model, "gradient buffer shaped unlike the model");

  const int H = spec.hidden;
  const auto T = x.cols();
  RecurrentTrace tr = run_recurrent(model, x, true);

  // Dense stack forward, keeping pre-activations.
  const std::size_t L = spec.dense.size();
  std::vector<VectorXd> acts(L + 1), pre(L);
  acts[0] = tr.h_last;
  for (std::size_t l = 0; l < L; ++l) {
    pre[l] = p[3 + 2 * l] * acts[l] + p[4 + 2 * l].col(0);
    acts[l + 1] = l + 1 < L ? VectorXd(pre[l].cwiseMax(0.0)) : pre[l];
  }
  const VectorXd probs = softmax(acts[L]);
  if (probs_out) *probs_out = probs;
  const double loss = cross_entropy(probs, label);

  // Dense stack backward.
  VectorXd dz = probs;
  dz[label] -= 1.0;
  for (std::size_t l = L; l-- > 0;) {
    grad[3 + 2 * l].noalias() += dz * acts[l].transpose();
    grad[4 + 2 * l].col(0) += dz;
    VectorXd da = p[3 + 2 * l].transpose() * dz;
    if (l > 0) {
      dz = da.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    } else {
      dz = da;
    }
  }

  // Backpropagation through time; dz now holds dL/dh_T.
  const MatrixXd& Wh = p[1];
  const int G = spec.gates();
  MatrixXd dpre(G * H, T);
  VectorXd dh = dz;
  if (spec.cell == CellType::GRU) {
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const auto g = tr.gates.col(t);
      const auto z = g.head(H).array();
      const auto r = g.segment(H, H).array();
      const auto n = g.tail(H).array();
      const auto hp = tr.h_prev.col(t).array();
      const Eigen::ArrayXd dh_a = dh.array();

      Eigen::ArrayXd dan = dh_a * (1.0 - z) * (1.0 - n * n);
      Eigen::ArrayXd daz = dh_a * (hp - n) * z * (1.0 - z);
      VectorXd drh = Wh.bottomRows(H).transpose() * dan.matrix();
      Eigen::ArrayXd dar = drh.array() * hp * r * (1.0 - r);

      dpre.col(t).head(H) = daz.matrix();
      dpre.col(t).segment(H, H) = dar.matrix();
      dpre.col(t).tail(H) = dan.matrix();

      VectorXd dhp = (dh_a * z + drh.array() * r).matrix();
      dhp.noalias() += Wh.topRows(2 * H).transpose() * dpre.col(t).head(2 * H);
      dh = dhp;
    }
    grad[1].topRows(2 * H).noalias() += dpre.topRows(2 * H) * tr.h_prev.transpose();
    grad[1].bottomRows(H).noalias() += dpre.bottomRows(H) * tr.rh.transpose();
  } else {
    VectorXd dc = VectorXd::Zero(H);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const auto g = tr.gates.col(t);
      const auto i = g.head(H).array();
      const auto f = g.segment(H, H).array();
      const auto gg = g.segment(2 * H, H).array();
      const auto o = g.tail(H).array();
      const Eigen::ArrayXd tc = tr.cell.col(t).array().tanh();
      const Eigen::ArrayXd dh_a = dh.array();

      Eigen::ArrayXd dc_a = dc.array() + dh_a * o * (1.0 - tc * tc);
      dpre.col(t).head(H) = (dc_a * gg * i * (1.0 - i)).matrix();
      dpre.col(t).segment(H, H) = (dc_a * tr.c_prev.col(t).array() * f * (1.0 - f)).matrix();
      dpre.col(t).segment(2 * H, H) = (dc_a * i * (1.0 - gg * gg)).matrix();
      dpre.col(t).tail(H) = (dh_a * tc * o * (1.0 - o)).matrix();

      dc = (dc_a * f).matrix();
      dh.noalias() = Wh.transpose() * dpre.col(t);
    }
    grad[1].noalias() += dpre * tr.h_prev.transpose();
  }
  grad[0].noalias() += dpre * x.transpose();
  grad[2].col(0) += dpre.rowwise().sum();
  return loss;
}

}  // namespace capstream
