#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "qgrid/nn/tape.hpp"
#include "qgrid/util.hpp"

namespace qgrid::nn {

// Owns every parameter of a network; modules keep indices into it.
class ParamStore {
 public:
  int add(const std::string& name, Mat value) {
    if (index_.count(name))
      throw std::invalid_argument("duplicate parameter: " + name);
    index_[name] = static_cast<int>(params_.size());
    params_.emplace_back(std::make_unique<Param>(name, std::move(value)));
    return static_cast<int>(params_.size()) - 1;
  }

  int add_xavier(const std::string& name, int rows, int cols, Rng& rng) {
    double s = std::sqrt(6.0 / (rows + cols));
    Mat m(rows, cols);
    for (double& x : m.d) x = (2.0 * rng.uniform_real() - 1.0) * s;
    return add(name, std::move(m));
  }

  int add_zeros(const std::string& name, int rows, int cols) {
    return add(name, Mat(rows, cols));
  }

  int add_normal(const std::string& name, int rows, int cols, double stddev,
                 Rng& rng) {
    Mat m(rows, cols);
    for (double& x : m.d) x = rng.normal() * stddev;
    return add(name, std::move(m));
  }

  Param& at(int i) { return *params_[i]; }
  const Param& at(int i) const { return *params_[i]; }
  Param* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  size_t count() const { return params_.size(); }

  void zero_grad() {
    for (auto& p : params_) p->grad.zero();
  }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::map<std::string, int> index_;
};

struct Linear {
  int w = -1, b = -1;

  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int in, int out, Rng& rng)
      : w(ps.add_xavier(name + ".w", in, out, rng)),
        b(ps.add_zeros(name + ".b", 1, out)) {}

  Tape::Var operator()(Tape& t, ParamStore& ps, Tape::Var x) const {
    return t.add_bias(t.matmul(x, t.param(ps.at(w))), t.param(ps.at(b)));
  }
};

// two-layer head with relu in between
struct Mlp2 {
  Linear l1, l2;

  Mlp2() = default;
  Mlp2(ParamStore& ps, const std::string& name, int in, int hidden, int out,
       Rng& rng)
      : l1(ps, name + ".1", in, hidden, rng),
        l2(ps, name + ".2", hidden, out, rng) {}

  Tape::Var operator()(Tape& t, ParamStore& ps, Tape::Var x) const {
    return l2(t, ps, t.relu_(l1(t, ps, x)));
  }
};

struct GruCell {
  Linear xz, hz, xr, hr, xn, hn;
  int hidden = 0;

  GruCell() = default;
  GruCell(ParamStore& ps, const std::string& name, int in, int h, Rng& rng)
      : xz(ps, name + ".xz", in, h, rng),
        hz(ps, name + ".hz", h, h, rng),
        xr(ps, name + ".xr", in, h, rng),
        hr(ps, name + ".hr", h, h, rng),
        xn(ps, name + ".xn", in, h, rng),
        hn(ps, name + ".hn", h, h, rng),
        hidden(h) {}

  Tape::Var operator()(Tape& t, ParamStore& ps, Tape::Var x,
                       Tape::Var h) const {
    auto z = t.sigmoid_(t.add(xz(t, ps, x), hz(t, ps, h)));
    auto r = t.sigmoid_(t.add(xr(t, ps, x), hr(t, ps, h)));
    auto n = t.tanh_(t.add(xn(t, ps, x), t.mul(r, hn(t, ps, h))));
    // h' = n + z * (h - n)
    return t.add(n, t.mul(z, t.sub(h, n)));
  }
};

struct LstmCell {
  Linear xi, hi, xf, hf, xo, ho, xg, hg;
  int hidden = 0;

  LstmCell() = default;
  LstmCell(ParamStore& ps, const std::string& name, int in, int h, Rng& rng)
      : xi(ps, name + ".xi", in, h, rng),
        hi(ps, name + ".hi", h, h, rng),
        xf(ps, name + ".xf", in, h, rng),
        hf(ps, name + ".hf", h, h, rng),
        xo(ps, name + ".xo", in, h, rng),
        ho(ps, name + ".ho", h, h, rng),
        xg(ps, name + ".xg", in, h, rng),
        hg(ps, name + ".hg", h, h, rng),
        hidden(h) {}

  // returns (h', c')
  std::pair<Tape::Var, Tape::Var> operator()(Tape& t, ParamStore& ps,
                                             Tape::Var x, Tape::Var h,
                                             Tape::Var c) const {
    auto i = t.sigmoid_(t.add(xi(t, ps, x), hi(t, ps, h)));
    auto f = t.sigmoid_(t.add(xf(t, ps, x), hf(t, ps, h)));
    auto o = t.sigmoid_(t.add(xo(t, ps, x), ho(t, ps, h)));
    auto g = t.tanh_(t.add(xg(t, ps, x), hg(t, ps, h)));
    auto c2 = t.add(t.mul(f, c), t.mul(i, g));
    auto h2 = t.mul(o, t.tanh_(c2));
    return {h2, c2};
  }
};

// 2D convolution over a batch of square channel-last images, built on an
// index map plus one matmul. Inputs are stacked as (B*H*W) x C rows with a
// trailing all-zero row that padding indices point at.
struct Conv2d {
  int w = -1, b = -1;
  int in_channels, out_channels, ksize, pad;

  Conv2d(ParamStore& ps, const std::string& name, int in_c, int out_c, int k,
         int padding, Rng& rng)
      : in_channels(in_c), out_channels(out_c), ksize(k), pad(padding) {
    w = ps.add_xavier(name + ".w", k * k * in_c, out_c, rng);
    b = ps.add_zeros(name + ".b", 1, out_c);
  }

  int out_side(int side) const { return side + 2 * pad - ksize + 1; }

  // x: (B*side*side + 1) x C, last row zeros; returns (B*out*out) x out_c
  Tape::Var operator()(Tape& t, ParamStore& ps, Tape::Var x, int batch,
                       int side) const {
    int out = out_side(side);
    int zero_row = batch * side * side;
    std::vector<int> idx;
    idx.reserve(static_cast<size_t>(batch) * out * out * ksize * ksize);
    for (int img = 0; img < batch; ++img)
      for (int oy = 0; oy < out; ++oy)
        for (int ox = 0; ox < out; ++ox)
          for (int ky = 0; ky < ksize; ++ky)
            for (int kx = 0; kx < ksize; ++kx) {
              int iy = oy + ky - pad;
              int ix = ox + kx - pad;
              bool inside = iy >= 0 && iy < side && ix >= 0 && ix < side;
              idx.push_back(inside ? (img * side + iy) * side + ix
                                   : zero_row);
            }
    // rows of k*k*C patch values
    auto patches = t.gather_rows(x, std::move(idx));
    // fold the k*k taps into columns: reshape by gathering is avoided by
    // viewing each output pixel as k*k consecutive rows and concatenating
    int taps = ksize * ksize;
    std::vector<Tape::Var> cols;
    cols.reserve(taps);
    int n_out = batch * out * out;
    for (int tap = 0; tap < taps; ++tap) {
      std::vector<int> sel(n_out);
      for (int i = 0; i < n_out; ++i) sel[i] = i * taps + tap;
      cols.push_back(t.gather_rows(patches, std::move(sel)));
    }
    auto im2col = t.concat_cols(cols);  // n_out x (taps*C)
    return t.add_bias(t.matmul(im2col, t.param(ps.at(w))),
                      t.param(ps.at(b)));
  }
};

// 2x2 max pooling over (B*side*side) x C rows
inline Tape::Var maxpool2x2(Tape& t, Tape::Var x, int batch, int side) {
  int out = side / 2;
  std::vector<std::vector<int>> groups;
  groups.reserve(static_cast<size_t>(batch) * out * out);
  for (int img = 0; img < batch; ++img)
    for (int oy = 0; oy < out; ++oy)
      for (int ox = 0; ox < out; ++ox) {
        std::vector<int> g;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            g.push_back((img * side + oy * 2 + dy) * side + ox * 2 + dx);
        groups.push_back(std::move(g));
      }
  return t.max_rows_grouped(x, std::move(groups));
}

// flatten (B*cells) x C rows into B x (cells*C)
inline Tape::Var flatten_rows(Tape& t, Tape::Var x, int batch, int cells) {
  std::vector<Tape::Var> per_cell;
  per_cell.reserve(cells);
  for (int cell = 0; cell < cells; ++cell) {
    std::vector<int> sel(batch);
    for (int img = 0; img < batch; ++img) sel[img] = img * cells + cell;
    per_cell.push_back(t.gather_rows(x, std::move(sel)));
  }
  return t.concat_cols(per_cell);
}

class Adam {
 public:
  explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  void step(ParamStore& ps) {
    ++t_;
    double c1 = 1.0 - std::pow(beta1_, t_);
    double c2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < ps.count(); ++i) {
      Param& p = ps.at(static_cast<int>(i));
      for (size_t j = 0; j < p.value.size(); ++j) {
        double g = p.grad.d[j];
        p.m.d[j] = beta1_ * p.m.d[j] + (1.0 - beta1_) * g;
        p.v.d[j] = beta2_ * p.v.d[j] + (1.0 - beta2_) * g * g;
        double mhat = p.m.d[j] / c1;
        double vhat = p.v.d[j] / c2;
        p.value.d[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  int64_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace qgrid::nn
