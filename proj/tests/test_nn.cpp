#include <cmath>

#include <gtest/gtest.h>

#include "capstream/error.hpp"
#include "capstream/nn.hpp"
#include "oracles.hpp"

using namespace capstream;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_input(std::mt19937_64& rng, int rows, int cols) {
  MatrixXd x(rows, cols);
  const auto v = oracle::random_vector(rng, static_cast<std::size_t>(rows * cols));
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) x(r, c) = v[static_cast<std::size_t>(c * rows + r)];
  }
  return x;
}

void randomize(Model& m, std::mt19937_64& rng, double scale) {
  for (auto& b : m.params()) {
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = scale * oracle::random_vector(rng, 1)[0];
  }
}

// Scalar-loop reference of the recurrent cell plus dense head.
std::vector<double> reference_forward(const Model& m, const MatrixXd& x) {
  const auto& spec = m.spec();
  const auto& p = m.params();
  const int H = spec.hidden, I = spec.input;
  std::vector<double> h(H, 0.0), c(H, 0.0);
  auto pre = [&](int row, int t, const std::vector<double>& state) {
    double s = p[2](row, 0);
    for (int i = 0; i < I; ++i) s += p[0](row, i) * x(i, t);
    for (int k = 0; k < H; ++k) s += p[1](row, k) * state[static_cast<std::size_t>(k)];
    return s;
  };
  for (int t = 0; t < x.cols(); ++t) {
    std::vector<double> next(H);
    if (spec.cell == CellType::GRU) {
      std::vector<double> z(H), r(H), rh(H);
      for (int k = 0; k < H; ++k) {
        z[k] = oracle::sigmoid(pre(k, t, h));
        r[k] = oracle::sigmoid(pre(H + k, t, h));
        rh[k] = r[k] * h[k];
      }
      for (int k = 0; k < H; ++k) {
        const double n = std::tanh(pre(2 * H + k, t, rh));
        next[k] = (1 - z[k]) * n + z[k] * h[k];
      }
    } else {
      std::vector<double> cn(H);
      for (int k = 0; k < H; ++k) {
        const double ig = oracle::sigmoid(pre(k, t, h));
        const double fg = oracle::sigmoid(pre(H + k, t, h));
        const double gg = std::tanh(pre(2 * H + k, t, h));
        const double og = oracle::sigmoid(pre(3 * H + k, t, h));
        cn[k] = fg * c[k] + ig * gg;
        next[k] = og * std::tanh(cn[k]);
      }
      c = cn;
    }
    h = next;
  }
  std::vector<double> a = h;
  for (std::size_t l = 0; l < spec.dense.size(); ++l) {
    const auto& W = p[3 + 2 * l];
    const auto& b = p[4 + 2 * l];
    std::vector<double> z(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      double s = b(r, 0);
      for (Eigen::Index k = 0; k < W.cols(); ++k) s += W(r, k) * a[static_cast<std::size_t>(k)];
      z[static_cast<std::size_t>(r)] = l + 1 < spec.dense.size() ? std::max(s, 0.0) : s;
    }
    a = z;
  }
  double mx = a[0], sum = 0;
  for (double v : a) mx = std::max(mx, v);
  for (double& v : a) sum += (v = std::exp(v - mx));
  for (double& v : a) v /= sum;
  return a;
}

ModelSpec toy_spec(CellType cell) {
  ModelSpec s;
  s.cell = cell;
  s.input = 4;
  s.hidden = 3;
  s.dense = {4, 2};
  s.frame_length = 5;
  return s;
}

double max_relative_gradient_error(CellType cell, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Model m = Model::initialize(toy_spec(cell), seed);
  randomize(m, rng, 0.8);
  const MatrixXd x = random_input(rng, 4, 5);
  const int label = 1;  // 0-based
  Gradients g = m.zeros_like();
  accumulate_gradient(m, x, label, g);

  const double h = 1e-4;
  double worst = 0;
  for (std::size_t b = 0; b < m.params().size(); ++b) {
    for (Eigen::Index i = 0; i < m.params()[b].size(); ++i) {
      double& w = m.params()[b].data()[i];
      const double saved = w;
      w = saved + h;
      const double up = cross_entropy(forward(m, x), label);
      w = saved - h;
      const double down = cross_entropy(forward(m, x), label);
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = g[b].data()[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST(ModelSpec, ShapesAndValidation) {
  const Model m(ModelSpec{});
  ASSERT_EQ(m.params().size(), 3u + 2 * 4);
  EXPECT_EQ(m.params()[0].rows(), 60);
  EXPECT_EQ(m.params()[0].cols(), 4);
  EXPECT_EQ(m.params()[1].cols(), 20);
  EXPECT_EQ(m.params()[3].rows(), 32);
  EXPECT_EQ(m.params()[9].rows(), 10);
  EXPECT_EQ(m.spec().classes(), 10);
  ModelSpec lstm;
  lstm.cell = CellType::LSTM;
  EXPECT_EQ(Model(lstm).params()[0].rows(), 80);
  ModelSpec bad;
  bad.hidden = 0;
  EXPECT_THROW(Model{bad}, Error);
  bad = {};
  bad.dense.clear();
  EXPECT_THROW(Model{bad}, Error);
  EXPECT_EQ(parse_cell_type("lstm"), CellType::LSTM);
  EXPECT_THROW(parse_cell_type("rnn"), Error);
}

TEST(Forward, ZeroModelIsUniform) {
  for (auto cell : {CellType::GRU, CellType::LSTM}) {
    ModelSpec s;
    s.cell = cell;
    const Model m(s);
    std::mt19937_64 rng(1);
    const auto p = forward(m, random_input(rng, 4, 64));
    for (Eigen::Index k = 0; k < p.size(); ++k) EXPECT_NEAR(p[k], 0.1, 1e-15);
  }
}

TEST(Forward, ProbabilitiesFormASimplex) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    ModelSpec s;
    s.cell = trial % 2 ? CellType::LSTM : CellType::GRU;
    Model m = Model::initialize(s, static_cast<std::uint64_t>(trial));
    const auto p = forward(m, random_input(rng, 4, 30) * 5.0);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_GE(p.minCoeff(), 0.0);
    EXPECT_TRUE(p.allFinite());
  }
}

TEST(Forward, MatchesScalarReference) {
  std::mt19937_64 rng(3);
  for (auto cell : {CellType::GRU, CellType::LSTM}) {
    for (int trial = 0; trial < 5; ++trial) {
      ModelSpec s;
      s.cell = cell;
      s.hidden = 6;
      s.dense = {5, 3};
      Model m(s);
      randomize(m, rng, 0.7);
      const MatrixXd x = random_input(rng, 4, 12);
      const auto got = forward(m, x);
      const auto ref = reference_forward(m, x);
      for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(got[static_cast<Eigen::Index>(k)], ref[k], 1e-12);
    }
  }
}

TEST(Forward, RejectsWrongShape) {
  const Model m(ModelSpec{});
  EXPECT_THROW(forward(m, MatrixXd::Zero(3, 10)), Error);
  EXPECT_THROW(forward(m, MatrixXd::Zero(4, 0)), Error);
}

TEST(CrossEntropy, ValuesAndClamp) {
  VectorXd p = VectorXd::Constant(10, 0.1);
  EXPECT_NEAR(cross_entropy(p, 3), std::log(10.0), 1e-12);
  p.setZero();
  p[4] = 1.0;
  EXPECT_DOUBLE_EQ(cross_entropy(p, 4), 0.0);
  EXPECT_NEAR(cross_entropy(p, 0), -std::log(1e-12), 1e-9);
}

TEST(Gradient, GruMatchesCentralDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) EXPECT_LE(max_relative_gradient_error(CellType::GRU, seed), 1e-4);
}

TEST(Gradient, LstmMatchesCentralDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) EXPECT_LE(max_relative_gradient_error(CellType::LSTM, seed), 1e-4);
}

TEST(Gradient, AccumulatesAndReturnsLoss) {
  std::mt19937_64 rng(4);
  Model m = Model::initialize(toy_spec(CellType::GRU), 4);
  const MatrixXd x = random_input(rng, 4, 5);
  Gradients once = m.zeros_like(), twice = m.zeros_like();
  VectorXd probs;
  const double l = accumulate_gradient(m, x, 1, once, &probs);
  accumulate_gradient(m, x, 1, twice);
  accumulate_gradient(m, x, 1, twice);
  EXPECT_NEAR(l, cross_entropy(forward(m, x), 1), 1e-12);
  EXPECT_NEAR((probs - forward(m, x)).norm(), 0.0, 1e-15);
  for (std::size_t b = 0; b < once.size(); ++b) EXPECT_NEAR((twice[b] - 2 * once[b]).norm(), 0.0, 1e-12);
}

TEST(Gradient, OneStepDecreasesLoss) {
  std::mt19937_64 rng(5);
  for (auto cell : {CellType::GRU, CellType::LSTM}) {
    ModelSpec s;
    s.cell = cell;
    Model m = Model::initialize(s, 5);
    const MatrixXd x = random_input(rng, 4, 20);
    Gradients g = m.zeros_like();
    const double before = accumulate_gradient(m, x, 7, g);
    for (std::size_t b = 0; b < g.size(); ++b) m.params()[b] -= 1e-3 * g[b];
    EXPECT_LT(cross_entropy(forward(m, x), 7), before);
  }
}

TEST(Initialize, DeterministicAndStructured) {
  ModelSpec s;
  s.cell = CellType::LSTM;
  const Model a = Model::initialize(s, 9), b = Model::initialize(s, 9), c = Model::initialize(s, 10);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  const int H = s.hidden;
  for (int g = 0; g < s.gates(); ++g) {
    const MatrixXd block = a.params()[1].middleRows(g * H, H);
    EXPECT_NEAR((block.transpose() * block - MatrixXd::Identity(H, H)).norm(), 0.0, 1e-10);
  }
  EXPECT_EQ(a.params()[2].middleRows(H, H), MatrixXd::Ones(H, 1));
  EXPECT_EQ(a.params()[2].topRows(H), MatrixXd::Zero(H, 1));
  const double bound = std::sqrt(6.0 / (s.input + 4 * H));
  EXPECT_LE(a.params()[0].cwiseAbs().maxCoeff(), bound);
  EXPECT_TRUE(a.finite());
}
