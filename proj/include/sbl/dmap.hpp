#pragma once

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "sbl/activity.hpp"
#include "sbl/rng.hpp"

namespace sbl {

// Differentiable map over a concatenation of input blocks: an affine layer
// followed by a smooth soft-clip, optionally with one hidden layer of the
// same form. The soft clip s(z) = S*tanh(z/S) is near-identity for |z| << S
// and bounds every output to (-S, S), so trained maps stay finite no matter
// what the optimizer does. Weights start near zero: a fresh map emits a
// near-zero baseline for any input.
class DifferentiableMap {
 public:
  DifferentiableMap() = default;
  DifferentiableMap(std::vector<int> in_dims, int out_dim, int hidden = 0,
                    double squash_scale = 4.0)
      : in_dims_(std::move(in_dims)),
        out_dim_(out_dim),
        hidden_(hidden),
        scale_(squash_scale) {
    in_total_ = std::accumulate(in_dims_.begin(), in_dims_.end(), 0);
    const int l1_out = hidden_ > 0 ? hidden_ : out_dim_;
    W1.assign(static_cast<std::size_t>(l1_out) * in_total_, 0.0);
    b1.assign(static_cast<std::size_t>(l1_out), 0.0);
    if (hidden_ > 0) {
      W2.assign(static_cast<std::size_t>(out_dim_) * hidden_, 0.0);
      b2.assign(static_cast<std::size_t>(out_dim_), 0.0);
    }
  }

  void init(std::mt19937_64& gen, double scale = 0.01) {
    auto fill = [&](std::vector<double>& v) {
      for (double& x : v) x = uniform(gen, -scale, scale);
    };
    fill(W1);
    fill(b1);
    fill(W2);
    fill(b2);
  }

  int out_dim() const { return out_dim_; }
  int in_total() const { return in_total_; }
  const std::vector<int>& in_dims() const { return in_dims_; }
  std::size_t param_count() const { return W1.size() + b1.size() + W2.size() + b2.size(); }

  ActivityPattern evaluate(const std::vector<const ActivityPattern*>& blocks) const {
    Cache c;
    forward(blocks, c);
    return c.out;
  }

  // One gradient step on the mean squared error against `target`.
  // Returns the pre-step error.
  double tune_mse(const std::vector<const ActivityPattern*>& blocks,
                  const ActivityPattern& target, double lr) {
    Cache c;
    forward(blocks, c);
    const std::size_t n = c.out.size();
    std::vector<double> dout(n);
    double mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = c.out[i] - target[i];
      mse += e * e;
      dout[i] = 2.0 * e / static_cast<double>(n);
    }
    mse /= static_cast<double>(n);
    Grads g;
    backward(c, dout, &g, nullptr, -1);
    axpy(W1, g.dW1, -lr);
    axpy(b1, g.db1, -lr);
    axpy(W2, g.dW2, -lr);
    axpy(b2, g.db2, -lr);
    return mse;
  }

  // d(mse against target)/d(input block). This is the error-transport path:
  // an output-space mismatch pulled back through the map to one of its
  // input blocks.
  ActivityPattern input_gradient_mse(const std::vector<const ActivityPattern*>& blocks,
                                     const ActivityPattern& target, int block) const {
    Cache c;
    forward(blocks, c);
    const std::size_t n = c.out.size();
    std::vector<double> dout(n);
    for (std::size_t i = 0; i < n; ++i)
      dout[i] = 2.0 * (c.out[i] - target[i]) / static_cast<double>(n);
    ActivityPattern dx;
    backward(c, dout, nullptr, &dx, block);
    return dx;
  }

  // J^T v restricted to one input block (J = d out / d in).
  ActivityPattern jacobian_transpose_vec(const std::vector<const ActivityPattern*>& blocks,
                                         const std::vector<double>& v, int block) const {
    Cache c;
    forward(blocks, c);
    ActivityPattern dx;
    backward(c, v, nullptr, &dx, block);
    return dx;
  }

  // Flat parameter access (tests poke these for finite-difference checks).
  std::vector<double> W1, b1, W2, b2;

 private:
  struct Cache {
    std::vector<double> x;     // concatenated input
    std::vector<double> z1;    // pre-squash, layer 1
    std::vector<double> h;     // post-squash, layer 1 (hidden or output)
    std::vector<double> z2;    // pre-squash, layer 2
    std::vector<double> out;
  };
  struct Grads {
    std::vector<double> dW1, db1, dW2, db2;
  };

  double squash(double z) const { return scale_ * std::tanh(z / scale_); }
  double dsquash(double z) const {
    const double t = std::tanh(z / scale_);
    return 1.0 - t * t;
  }

  void forward(const std::vector<const ActivityPattern*>& blocks, Cache& c) const {
    c.x.clear();
    c.x.reserve(static_cast<std::size_t>(in_total_));
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      if (static_cast<int>(blocks[bi]->size()) != in_dims_[bi])
        fail(ErrorCode::DimensionMismatch,
             "map input block " + std::to_string(bi) + ": dim " +
                 std::to_string(blocks[bi]->size()) + " != " + std::to_string(in_dims_[bi]));
      c.x.insert(c.x.end(), blocks[bi]->begin(), blocks[bi]->end());
    }
    const int l1_out = hidden_ > 0 ? hidden_ : out_dim_;
    c.z1.assign(static_cast<std::size_t>(l1_out), 0.0);
    for (int i = 0; i < l1_out; ++i) {
      double s = b1[static_cast<std::size_t>(i)];
      const double* row = &W1[static_cast<std::size_t>(i) * in_total_];
      for (int j = 0; j < in_total_; ++j) s += row[j] * c.x[static_cast<std::size_t>(j)];
      c.z1[static_cast<std::size_t>(i)] = s;
    }
    c.h.resize(c.z1.size());
    for (std::size_t i = 0; i < c.z1.size(); ++i) c.h[i] = squash(c.z1[i]);
    if (hidden_ > 0) {
      c.z2.assign(static_cast<std::size_t>(out_dim_), 0.0);
      for (int i = 0; i < out_dim_; ++i) {
        double s = b2[static_cast<std::size_t>(i)];
        const double* row = &W2[static_cast<std::size_t>(i) * hidden_];
        for (int j = 0; j < hidden_; ++j) s += row[j] * c.h[static_cast<std::size_t>(j)];
        c.z2[static_cast<std::size_t>(i)] = s;
      }
      c.out.resize(c.z2.size());
      for (std::size_t i = 0; i < c.z2.size(); ++i) c.out[i] = squash(c.z2[i]);
    } else {
      c.out = c.h;
    }
  }

  // dout is dL/d(out). Fills parameter grads and/or the grad w.r.t. one
  // input block (block < 0 or dx == nullptr to skip).
  void backward(const Cache& c, const std::vector<double>& dout, Grads* g, ActivityPattern* dx,
                int block) const {
    std::vector<double> dz2;
    std::vector<double> dh;
    if (hidden_ > 0) {
      dz2.resize(static_cast<std::size_t>(out_dim_));
      for (int i = 0; i < out_dim_; ++i)
        dz2[static_cast<std::size_t>(i)] =
            dout[static_cast<std::size_t>(i)] * dsquash(c.z2[static_cast<std::size_t>(i)]);
      if (g) {
        g->dW2.assign(W2.size(), 0.0);
        g->db2 = dz2;
        for (int i = 0; i < out_dim_; ++i)
          for (int j = 0; j < hidden_; ++j)
            g->dW2[static_cast<std::size_t>(i) * hidden_ + j] =
                dz2[static_cast<std::size_t>(i)] * c.h[static_cast<std::size_t>(j)];
      }
      dh.assign(static_cast<std::size_t>(hidden_), 0.0);
      for (int i = 0; i < out_dim_; ++i) {
        const double* row = &W2[static_cast<std::size_t>(i) * hidden_];
        for (int j = 0; j < hidden_; ++j)
          dh[static_cast<std::size_t>(j)] += dz2[static_cast<std::size_t>(i)] * row[j];
      }
    } else {
      dh = dout;
    }

    const int l1_out = hidden_ > 0 ? hidden_ : out_dim_;
    std::vector<double> dz1(static_cast<std::size_t>(l1_out));
    for (int i = 0; i < l1_out; ++i)
      dz1[static_cast<std::size_t>(i)] =
          dh[static_cast<std::size_t>(i)] * dsquash(c.z1[static_cast<std::size_t>(i)]);
    if (g) {
      g->dW1.assign(W1.size(), 0.0);
      g->db1 = dz1;
      for (int i = 0; i < l1_out; ++i)
        for (int j = 0; j < in_total_; ++j)
          g->dW1[static_cast<std::size_t>(i) * in_total_ + j] =
              dz1[static_cast<std::size_t>(i)] * c.x[static_cast<std::size_t>(j)];
    }
    if (dx && block >= 0) {
      int off = 0;
      for (int bi = 0; bi < block; ++bi) off += in_dims_[static_cast<std::size_t>(bi)];
      const int bdim = in_dims_[static_cast<std::size_t>(block)];
      dx->assign(static_cast<std::size_t>(bdim), 0.0);
      for (int i = 0; i < l1_out; ++i) {
        const double* row = &W1[static_cast<std::size_t>(i) * in_total_];
        for (int j = 0; j < bdim; ++j)
          (*dx)[static_cast<std::size_t>(j)] += dz1[static_cast<std::size_t>(i)] * row[off + j];
      }
    }
  }

  static void axpy(std::vector<double>& y, const std::vector<double>& x, double a) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
  }

  std::vector<int> in_dims_;
  int out_dim_ = 0;
  int hidden_ = 0;
  int in_total_ = 0;
  double scale_ = 4.0;
};

}  // namespace sbl
