#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lamarl/region.hpp"  // Error
#include "lamarl/rng.hpp"

namespace lamarl {

enum class OutputActivation { Tanh, Identity };

// Fully connected network with Leaky-ReLU hidden layers. Dense math is
// Eigen; forward/backward passes are written out here so the gradients are
// exactly the ones the optimizer steps on (checked against finite
// differences in the tests). Samples are columns.
template <typename Scalar>
class Mlp {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Mat w;
    Vec b;
  };

  struct Cache {
    std::vector<Mat> activations;  // activations[0] is the input
    std::vector<Mat> pre;          // pre-activation per layer
  };

  struct Gradients {
    std::vector<Mat> dw;
    std::vector<Vec> db;
    Mat dx;  // gradient w.r.t. the input, needed to chain critics into actors
  };

  static constexpr Scalar kLeakySlope = Scalar(0.01);

  Mlp() = default;

  // sizes = {in, hidden..., out}; weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Mlp random(const std::vector<std::size_t>& sizes,
                    OutputActivation out_act, std::uint64_t seed) {
    if (sizes.size() < 2) throw Error("mlp needs at least input and output sizes");
    Mlp net;
    net.out_act_ = out_act;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      Layer layer;
      layer.w.resize(sizes[l + 1], sizes[l]);
      layer.b.resize(sizes[l + 1]);
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
      for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.w.cols(); ++c) {
          layer.w(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
        }
      }
      for (Eigen::Index r = 0; r < layer.b.size(); ++r) {
        layer.b(r) = static_cast<Scalar>(rng.uniform(-bound, bound));
      }
      net.layers_.push_back(std::move(layer));
    }
    return net;
  }

  static Mlp zeros(const std::vector<std::size_t>& sizes,
                   OutputActivation out_act) {
    Mlp net = random(sizes, out_act, 0);
    for (Layer& l : net.layers_) {
      l.w.setZero();
      l.b.setZero();
    }
    return net;
  }

  Eigen::Index in_dim() const { return layers_.front().w.cols(); }
  Eigen::Index out_dim() const { return layers_.back().w.rows(); }
  std::size_t n_layers() const { return layers_.size(); }
  OutputActivation output_activation() const { return out_act_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Mat forward(const Mat& x) const {
    Cache cache;
    return forward_cached(x, cache);
  }

  Mat forward_cached(const Mat& x, Cache& cache) const {
    if (x.rows() != in_dim()) {
      throw Error("mlp input has " + std::to_string(x.rows()) +
                  " rows, expected " + std::to_string(in_dim()));
    }
    cache.activations.clear();
    cache.pre.clear();
    cache.activations.push_back(x);
    Mat a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Mat z = (layers_[l].w * a).colwise() + layers_[l].b;
      cache.pre.push_back(z);
      if (l + 1 < layers_.size()) {
        a = z.unaryExpr([](Scalar v) { return v > Scalar(0) ? v : kLeakySlope * v; });
      } else if (out_act_ == OutputActivation::Tanh) {
        a = z.array().tanh().matrix();
      } else {
        a = z;
      }
      cache.activations.push_back(a);
    }
    return a;
  }

  // dy is dL/d(output), out_dim x batch; returns parameter gradients summed
  // over the batch and dL/d(input).
  Gradients backward(const Cache& cache, const Mat& dy) const {
    Gradients g;
    g.dw.resize(layers_.size());
    g.db.resize(layers_.size());

    Mat delta;  // dL/d(pre-activation) of the current layer
    const Mat& y = cache.activations.back();
    if (out_act_ == OutputActivation::Tanh) {
      delta = dy.cwiseProduct(
          (Scalar(1) - y.array().square()).matrix());
    } else {
      delta = dy;
    }

    for (std::size_t l = layers_.size(); l-- > 0;) {
      g.dw[l].noalias() = delta * cache.activations[l].transpose();
      g.db[l] = delta.rowwise().sum();
      Mat dx_l = layers_[l].w.transpose() * delta;
      if (l > 0) {
        delta = dx_l.cwiseProduct(cache.pre[l - 1].unaryExpr(
            [](Scalar v) { return v > Scalar(0) ? Scalar(1) : kLeakySlope; }));
      } else {
        g.dx = std::move(dx_l);
      }
    }
    return g;
  }

  // Plain SGD step: params -= lr * grad, after optional global-norm clipping.
  // Returns true when clipping fired.
  bool apply_gradients(const Gradients& g, Scalar lr, Scalar max_norm) {
    Scalar scale = Scalar(1);
    bool clipped = false;
    if (max_norm > Scalar(0)) {
      Scalar sq = Scalar(0);
      for (std::size_t l = 0; l < layers_.size(); ++l) {
        sq += g.dw[l].squaredNorm() + g.db[l].squaredNorm();
      }
      const Scalar norm = std::sqrt(sq);
      if (norm > max_norm) {
        scale = max_norm / norm;
        clipped = true;
      }
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      layers_[l].w -= lr * scale * g.dw[l];
      layers_[l].b -= lr * scale * g.db[l];
    }
    return clipped;
  }

  // target <- (1 - tau) * target + tau * source, elementwise.
  void soft_update_from(const Mlp& source, Scalar tau) {
    if (source.layers_.size() != layers_.size()) {
      throw Error("soft update across mismatched layer counts");
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (source.layers_[l].w.rows() != layers_[l].w.rows() ||
          source.layers_[l].w.cols() != layers_[l].w.cols()) {
        throw Error("soft update across mismatched layer shapes");
      }
      layers_[l].w = (Scalar(1) - tau) * layers_[l].w + tau * source.layers_[l].w;
      layers_[l].b = (Scalar(1) - tau) * layers_[l].b + tau * source.layers_[l].b;
    }
  }

 private:
  std::vector<Layer> layers_;
  OutputActivation out_act_ = OutputActivation::Identity;
};

// Bit-exact hex serialization for checkpoint tensors.
inline std::string floats_to_hex(const float* data, std::size_t n) {
  std::string out;
  out.reserve(n * 8);
  char buf[9];
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    std::snprintf(buf, sizeof(buf), "%08x", bits);
    out += buf;
  }
  return out;
}

inline std::vector<float> hex_to_floats(const std::string& hex) {
  if (hex.size() % 8 != 0) throw Error("hex tensor length not a multiple of 8");
  std::vector<float> out(hex.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (std::size_t k = 0; k < 8; ++k) {
      const char c = hex[i * 8 + k];
      std::uint32_t d;
      if (c >= '0' && c <= '9') d = c - '0';
      else if (c >= 'a' && c <= 'f') d = 10 + (c - 'a');
      else if (c >= 'A' && c <= 'F') d = 10 + (c - 'A');
      else throw Error("invalid hex digit in tensor data");
      bits = (bits << 4) | d;
    }
    std::memcpy(&out[i], &bits, 4);
  }
  return out;
}

}  // namespace lamarl
