#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lamarl/mlp.hpp"
#include "lamarl/rng.hpp"

using namespace lamarl;

namespace {

using DMlp = Mlp<double>;
using DMat = DMlp::Mat;

// Naive reference forward pass: plain loops, no Eigen expressions shared
// with the implementation.
std::vector<double> reference_forward(const DMlp& net,
                                      const std::vector<double>& input) {
  std::vector<double> a = input;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].w;
    const auto& b = layers[l].b;
    std::vector<double> z(static_cast<std::size_t>(w.rows()), 0.0);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double acc = b(r);
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        acc += w(r, c) * a[static_cast<std::size_t>(c)];
      }
      z[static_cast<std::size_t>(r)] = acc;
    }
    if (l + 1 < layers.size()) {
      for (double& v : z) v = v > 0 ? v : 0.01 * v;
    } else if (net.output_activation() == OutputActivation::Tanh) {
      for (double& v : z) v = std::tanh(v);
    }
    a = std::move(z);
  }
  return a;
}

// Scalar loss for gradient checking: weighted sum of outputs over a batch.
double scalar_loss(const DMlp& net, const DMat& x, const DMat& w_out) {
  return (net.forward(x).cwiseProduct(w_out)).sum();
}

}  // namespace

TEST_CASE("zero networks produce zero outputs") {
  const DMlp tanh_net = DMlp::zeros({4, 3, 2}, OutputActivation::Tanh);
  DMat x(4, 1);
  x << 0.3, -0.7, 1.2, 0.1;
  const DMat y = tanh_net.forward(x);
  CHECK(y(0, 0) == 0.0);  // tanh(0)
  CHECK(y(1, 0) == 0.0);

  const DMlp lin_net = DMlp::zeros({6, 4, 1}, OutputActivation::Identity);
  DMat xc(6, 1);
  xc.setOnes();
  CHECK(lin_net.forward(xc)(0, 0) == 0.0);
}

TEST_CASE("tanh outputs stay inside (-1, 1)") {
  Rng seeds(1);
  for (int i = 0; i < 20; ++i) {
    const DMlp net = DMlp::random({5, 8, 2}, OutputActivation::Tanh, seeds.next_u64());
    DMat x(5, 7);
    Rng rng(i + 100);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.uniform(-5, 5);
    }
    const DMat y = net.forward(x);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      for (Eigen::Index c = 0; c < y.cols(); ++c) {
        CHECK(std::abs(y(r, c)) < 1.0);
      }
    }
  }
}

TEST_CASE("forward pass matches a naive loop oracle") {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const DMlp net =
        DMlp::random({6, 5, 4, 2}, i % 2 ? OutputActivation::Tanh
                                         : OutputActivation::Identity,
                     rng.next_u64());
    std::vector<double> input(6);
    for (double& v : input) v = rng.uniform(-2, 2);
    DMat x(6, 1);
    for (int k = 0; k < 6; ++k) x(k, 0) = input[k];
    const DMat y = net.forward(x);
    const std::vector<double> ref = reference_forward(net, input);
    for (int k = 0; k < 2; ++k) {
      CHECK(y(k, 0) == doctest::Approx(ref[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("dimension mismatches are rejected with sizes") {
  const DMlp net = DMlp::zeros({4, 3, 2}, OutputActivation::Tanh);
  DMat bad(5, 1);
  bad.setZero();
  CHECK_THROWS_WITH_AS(net.forward(bad), doctest::Contains("expected 4"), Error);
}

TEST_CASE("linear one-layer critic equals a hand dot product") {
  DMlp net = DMlp::zeros({3, 1}, OutputActivation::Identity);
  net.layers()[0].w << 0.5, -1.0, 2.0;
  net.layers()[0].b << 0.25;
  DMat x(3, 1);
  x << 2.0, 1.0, 0.5;
  CHECK(net.forward(x)(0, 0) == doctest::Approx(0.5 * 2 - 1 + 2 * 0.5 + 0.25));
}

TEST_CASE("backprop matches central finite differences") {
  // Small random nets, dims <= 8; relative error under 1e-4 per probe.
  Rng rng(3);
  int probes = 0;
  while (probes < 100) {
    const std::size_t in = 2 + rng.uniform_index(6);
    const std::size_t hid = 2 + rng.uniform_index(6);
    const std::size_t out = 1 + rng.uniform_index(2);
    DMlp net = DMlp::random({in, hid, hid, out},
                            probes % 2 ? OutputActivation::Tanh
                                       : OutputActivation::Identity,
                            rng.next_u64());
    const Eigen::Index batch = 1 + static_cast<Eigen::Index>(rng.uniform_index(4));
    DMat x(in, batch), w_out(out, batch);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < batch; ++c) x(r, c) = rng.uniform(-1, 1);
    }
    for (Eigen::Index r = 0; r < w_out.rows(); ++r) {
      for (Eigen::Index c = 0; c < batch; ++c) w_out(r, c) = rng.uniform(-1, 1);
    }

    DMlp::Cache cache;
    net.forward_cached(x, cache);
    const auto grads = net.backward(cache, w_out);

    // Probe one random weight, one random bias, and one random input.
    const std::size_t layer = rng.uniform_index(net.n_layers());
    auto& w = net.layers()[layer].w;
    auto& b = net.layers()[layer].b;
    const Eigen::Index wr = static_cast<Eigen::Index>(rng.uniform_index(w.rows()));
    const Eigen::Index wc = static_cast<Eigen::Index>(rng.uniform_index(w.cols()));
    const double h = 1e-6;

    const auto check_rel = [&](double analytic, double numeric) {
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      CHECK(std::abs(analytic - numeric) / denom < 1e-4);
    };

    {
      const double orig = w(wr, wc);
      w(wr, wc) = orig + h;
      const double up = scalar_loss(net, x, w_out);
      w(wr, wc) = orig - h;
      const double down = scalar_loss(net, x, w_out);
      w(wr, wc) = orig;
      check_rel(grads.dw[layer](wr, wc), (up - down) / (2 * h));
    }
    {
      const Eigen::Index br = static_cast<Eigen::Index>(rng.uniform_index(b.size()));
      const double orig = b(br);
      b(br) = orig + h;
      const double up = scalar_loss(net, x, w_out);
      b(br) = orig - h;
      const double down = scalar_loss(net, x, w_out);
      b(br) = orig;
      check_rel(grads.db[layer](br), (up - down) / (2 * h));
    }
    {
      const Eigen::Index xr = static_cast<Eigen::Index>(rng.uniform_index(in));
      const Eigen::Index xc = static_cast<Eigen::Index>(rng.uniform_index(
          static_cast<std::size_t>(batch)));
      DMat xp = x, xm = x;
      xp(xr, xc) += h;
      xm(xr, xc) -= h;
      check_rel(grads.dx(xr, xc),
                (scalar_loss(net, xp, w_out) - scalar_loss(net, xm, w_out)) /
                    (2 * h));
    }
    ++probes;
  }
}

TEST_CASE("soft update blends parameters") {
  const DMlp src = DMlp::random({3, 4, 2}, OutputActivation::Tanh, 77);
  SUBCASE("tau = 1 copies the source") {
    DMlp target = DMlp::random({3, 4, 2}, OutputActivation::Tanh, 78);
    target.soft_update_from(src, 1.0);
    for (std::size_t l = 0; l < target.n_layers(); ++l) {
      CHECK((target.layers()[l].w - src.layers()[l].w).norm() == 0.0);
    }
  }
  SUBCASE("tau = 0 is a no-op") {
    DMlp target = DMlp::random({3, 4, 2}, OutputActivation::Tanh, 79);
    const DMlp before = target;
    target.soft_update_from(src, 0.0);
    for (std::size_t l = 0; l < target.n_layers(); ++l) {
      CHECK((target.layers()[l].w - before.layers()[l].w).norm() == 0.0);
    }
  }
  SUBCASE("tau = 0.01 on scalar params 0 and 1 gives 0.01") {
    DMlp target = DMlp::zeros({1, 1}, OutputActivation::Identity);
    DMlp source = DMlp::zeros({1, 1}, OutputActivation::Identity);
    source.layers()[0].w(0, 0) = 1.0;
    source.layers()[0].b(0) = 1.0;
    target.soft_update_from(source, 0.01);
    CHECK(target.layers()[0].w(0, 0) == doctest::Approx(0.01));
    CHECK(target.layers()[0].b(0) == doctest::Approx(0.01));
  }
  SUBCASE("shape mismatches are rejected") {
    DMlp target = DMlp::zeros({3, 5, 2}, OutputActivation::Tanh);
    CHECK_THROWS_AS(target.soft_update_from(src, 0.5), Error);
  }
}

TEST_CASE("hex tensor round trip is bit exact") {
  Rng rng(4);
  std::vector<float> values;
  for (int i = 0; i < 257; ++i) {
    values.push_back(static_cast<float>(rng.uniform(-1e6, 1e6)));
  }
  values.push_back(0.0f);
  values.push_back(-0.0f);
  values.push_back(1e-38f);
  const std::string hex = floats_to_hex(values.data(), values.size());
  const std::vector<float> back = hex_to_floats(hex);
  REQUIRE(back.size() == values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    CHECK(std::memcmp(&back[i], &values[i], 4) == 0);
  }
}
