#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cimsim/nn.hpp"

#include <cmath>

using namespace cimsim;

namespace {

Parameters single_dense(Matrix w, Vector b) {
  Parameters p;
  p.dense.push_back({std::move(w), std::move(b)});
  return p;
}

// Cross-entropy straight from logits, independent of loss_and_grad.
double reference_loss(const NetworkSpec& net, const Parameters& p, const Matrix& x, const std::vector<int>& y) {
  const Matrix logits = forward_batch(net, p, x);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double m = logits.row(i).maxCoeff();
    double s = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) s += std::exp(logits(i, c) - m);
    total += m + std::log(s) - logits(i, y[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(logits.rows());
}

double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / scale;
}

}  // namespace

TEST_CASE("forward examples") {
  SUBCASE("identity dense then relu") {
    const NetworkSpec net({{LayerKind::dense, 2, 2}, {LayerKind::relu, 2, 2}});
    const auto p = single_dense(Matrix::Identity(2, 2), Vector::Zero(2));
    const Vector out = forward(net, p, Vector{{1.0, -2.0}});
    CHECK(out(0) == 1.0);
    CHECK(out(1) == 0.0);
  }
  SUBCASE("hand matmul") {
    const NetworkSpec net({{LayerKind::dense, 2, 2}});
    const auto p = single_dense(Matrix{{1, 2}, {3, 4}}, Vector{{1, 1}});
    const Vector out = forward(net, p, Vector{{1.0, 1.0}});
    CHECK(out(0) == 4.0);
    CHECK(out(1) == 8.0);
  }
  SUBCASE("sigmoid of zero") {
    const NetworkSpec net({{LayerKind::dense, 2, 2}, {LayerKind::sigmoid, 2, 2}});
    const auto p = single_dense(Matrix::Zero(2, 2), Vector::Zero(2));
    const Vector out = forward(net, p, Vector{{0.0, 0.0}});
    CHECK(out(0) == 0.5);
    CHECK(out(1) == 0.5);
  }
  SUBCASE("tensor overload matches vector path") {
    const NetworkSpec net({{LayerKind::dense, 2, 2}});
    const auto p = single_dense(Matrix{{1, 2}, {3, 4}}, Vector{{1, 1}});
    const Tensor out = forward(net, p, Tensor({2}, Vector{{1.0, 1.0}}));
    CHECK(out.data()(1) == 8.0);
  }
}

TEST_CASE("forward rejects bad shapes") {
  const NetworkSpec net({{LayerKind::dense, 2, 3}});
  const auto p = single_dense(Matrix::Zero(3, 2), Vector::Zero(3));
  CHECK_THROWS_AS(forward(net, p, Vector(Vector::Zero(3))), DimensionError);
  const auto wrong = single_dense(Matrix::Zero(2, 2), Vector::Zero(3));
  CHECK_THROWS_AS(forward(net, wrong, Vector(Vector::Zero(2))), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, Vector::Zero(3)), DimensionError);
  CHECK_THROWS_AS(Tensor({1}, Vector::Constant(1, std::nan(""))), DimensionError);
}

TEST_CASE("network spec validation") {
  CHECK_THROWS_AS(NetworkSpec(std::vector<LayerSpec>{}), ConfigError);
  CHECK_THROWS_AS(NetworkSpec({{LayerKind::dense, 2, 3}, {LayerKind::dense, 2, 1}}), ConfigError);
  CHECK_THROWS_AS(NetworkSpec({{LayerKind::relu, 2, 3}}), ConfigError);
  CHECK_THROWS_AS(NetworkSpec::mlp(4, 3, 2, LayerKind::dense), ConfigError);
  const auto mlp = NetworkSpec::mlp(4, 3, 2, LayerKind::sigmoid);
  CHECK(mlp.dense_count() == 2);
  CHECK(mlp.input_dim() == 4);
  CHECK(mlp.output_dim() == 2);
}

TEST_CASE("argmax_predict") {
  CHECK(argmax_predict(Vector{{0.1, 0.9, 0.3}}) == 1);
  CHECK(argmax_predict(Vector{{0.5, 0.5}}) == 0);
  CHECK(argmax_predict(Vector{{-3.0, -1.0, -2.0}}) == 1);
  CHECK_THROWS_AS(argmax_predict(Vector(0)), DimensionError);
}

TEST_CASE("loss_and_grad closed forms") {
  SUBCASE("uniform logits give ln C") {
    const NetworkSpec net({{LayerKind::dense, 3, 5}});
    const auto p = single_dense(Matrix::Zero(5, 3), Vector::Zero(5));
    const Matrix x = Matrix::Ones(2, 3);
    const std::vector<int> y{0, 4};
    CHECK(loss_and_grad(net, p, x, y).loss == doctest::Approx(std::log(5.0)).epsilon(1e-14));
  }
  SUBCASE("bias gradient of the true class") {
    const NetworkSpec net({{LayerKind::dense, 3, 4}});
    const auto p = single_dense(Matrix::Zero(4, 3), Vector::Zero(4));
    const Matrix x = Matrix::Ones(1, 3);
    const std::vector<int> y{2};
    const auto lg = loss_and_grad(net, p, x, y);
    CHECK(lg.grads[0].bias(2) == doctest::Approx(0.25 - 1.0).epsilon(1e-14));
    CHECK(lg.grads[0].bias(0) == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("label out of range") {
    const NetworkSpec net({{LayerKind::dense, 3, 4}});
    const auto p = single_dense(Matrix::Zero(4, 3), Vector::Zero(4));
    const std::vector<int> y{4};
    CHECK_THROWS_AS(loss_and_grad(net, p, Matrix(Matrix::Ones(1, 3)), y), std::out_of_range);
  }
}

TEST_CASE("gradients match central finite differences on random small nets") {
  Rng rng(12345);
  std::uniform_int_distribution<int> dim(1, 8), depth(1, 3), act(0, 1), batch(1, 4);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double h = 1e-5;
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LayerSpec> layers;
    Eigen::Index width = dim(rng);
    const Eigen::Index input = width;
    const int dense_layers = depth(rng);
    for (int k = 0; k < dense_layers; ++k) {
      const Eigen::Index out = k + 1 == dense_layers ? std::max(2, dim(rng)) : dim(rng);
      layers.push_back({LayerKind::dense, width, out});
      if (k + 1 < dense_layers) layers.push_back({act(rng) ? LayerKind::relu : LayerKind::sigmoid, out, out});
      width = out;
    }
    const NetworkSpec net(layers);
    Parameters p = init_parameters(net, static_cast<std::uint64_t>(trial));
    for (auto& d : p.dense) d.bias = Vector::NullaryExpr(d.bias.size(), [&] { return 0.3 * n01(rng); });
    const Eigen::Index b = batch(rng);
    const Matrix x = Matrix::NullaryExpr(b, input, [&] { return n01(rng); });
    std::uniform_int_distribution<int> label(0, static_cast<int>(width) - 1);
    std::vector<int> y;
    for (Eigen::Index i = 0; i < b; ++i) y.push_back(label(rng));

    const auto lg = loss_and_grad(net, p, x, y);
    CHECK(lg.loss == doctest::Approx(reference_loss(net, p, x, y)).epsilon(1e-12));
    for (std::size_t l = 0; l < p.size(); ++l) {
      auto check_entry = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double up = reference_loss(net, p, x, y);
        param = saved - h;
        const double down = reference_loss(net, p, x, y);
        param = saved;
        const double numeric = (up - down) / (2 * h);
        if (rel_err(numeric, analytic) >= 1e-4) ++failures;
      };
      for (Eigen::Index i = 0; i < p[l].weight.size(); ++i)
        check_entry(p[l].weight.data()[i], lg.grads[l].weight.data()[i]);
      for (Eigen::Index i = 0; i < p[l].bias.size(); ++i) check_entry(p[l].bias(i), lg.grads[l].bias(i));
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("sgd_step") {
  Parameters p = single_dense(Matrix::Constant(1, 1, 1.0), Vector::Zero(1));
  Parameters g = single_dense(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 1.0));
  CHECK(sgd_step(p, g, 0.0)[0].weight(0, 0) == 1.0);
  CHECK(sgd_step(p, g, 0.5)[0].weight(0, 0) == 0.0);
  CHECK(sgd_step(p, g, 0.5)[0].bias(0) == -0.5);

  Rng rng(3);
  std::normal_distribution<double> n01;
  p = single_dense(Matrix::NullaryExpr(3, 4, [&] { return n01(rng); }), Vector::NullaryExpr(3, [&] { return n01(rng); }));
  g = single_dense(Matrix::NullaryExpr(3, 4, [&] { return n01(rng); }), Vector::NullaryExpr(3, [&] { return n01(rng); }));
  const Parameters twice = sgd_step(sgd_step(p, g, 0.1), g, 0.1);
  const Parameters once = sgd_step(p, g, 0.2);
  CHECK((twice[0].weight - once[0].weight).cwiseAbs().maxCoeff() < 1e-15);

  Parameters bad = single_dense(Matrix::Zero(2, 2), Vector::Zero(2));
  CHECK_THROWS_AS(sgd_step(p, bad, 0.1), DimensionError);
}

TEST_CASE("init_parameters is seeded and Glorot-bounded") {
  const auto net = NetworkSpec::mlp(20, 10, 5, LayerKind::relu);
  const auto a = init_parameters(net, 7);
  const auto b = init_parameters(net, 7);
  const auto c = init_parameters(net, 8);
  CHECK(a[0].weight == b[0].weight);
  CHECK(a[0].weight != c[0].weight);
  CHECK(a[0].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 30.0));
  CHECK(a[1].bias.isZero());
}

TEST_CASE("accuracy and float instantiation") {
  const NetworkSpec net({{LayerKind::dense, 2, 2}});
  const auto p = single_dense(Matrix::Identity(2, 2), Vector::Zero(2));
  const Matrix x{{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}};
  const std::vector<int> y{0, 1, 1};
  CHECK(accuracy(net, p, x, y) == doctest::Approx(2.0 / 3.0));

  BasicParameters<float> pf;
  pf.dense.push_back({MatrixX<float>::Identity(2, 2), VectorX<float>::Zero(2)});
  const VectorX<float> out = forward(net, pf, VectorX<float>{{3.0f, 1.0f}});
  CHECK(out(0) == 3.0f);
}
