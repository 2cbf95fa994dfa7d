#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qgrid/nn/tensor.hpp"

namespace qgrid::nn {

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m, v;  // optimizer state

  Param(std::string n, Mat val)
      : name(std::move(n)),
        value(std::move(val)),
        grad(value.rows, value.cols),
        m(value.rows, value.cols),
        v(value.rows, value.cols) {}
};

// Reverse-mode autodiff over a linear tape of matrix nodes. A Var is an
// index into the tape; one tape per forward pass (or per training
// minibatch, including the whole time unroll).
class Tape {
 public:
  using Var = int;

  void clear() {
    nodes_.clear();
    backs_.clear();
  }
  size_t size() const { return nodes_.size(); }

  const Mat& val(Var v) const { return nodes_[v].val; }
  Mat& grad(Var v) { return nodes_[v].grad; }

  Var leaf(Mat m) { return push(std::move(m), nullptr); }

  Var param(Param& p) {
    Var v = push(p.value, nullptr);
    Param* pp = &p;
    backs_[v] = [this, v, pp]() {
      Mat& g = nodes_[v].grad;
      for (size_t i = 0; i < g.size(); ++i) pp->grad.d[i] += g.d[i];
    };
    return v;
  }

  Var matmul(Var a, Var b) {
    Var out = push(nn::matmul(nodes_[a].val, nodes_[b].val), nullptr);
    backs_[out] = [this, a, b, out]() {
      const Mat& g = nodes_[out].grad;
      const Mat& av = nodes_[a].val;
      const Mat& bv = nodes_[b].val;
      Mat& ga = nodes_[a].grad;
      Mat& gb = nodes_[b].grad;
      // dA[i][j] = sum_k g[i][k] * B[j][k]
      for (int i = 0; i < av.rows; ++i)
        for (int j = 0; j < av.cols; ++j) {
          const double* grow = &g.d[static_cast<size_t>(i) * g.cols];
          const double* brow = &bv.d[static_cast<size_t>(j) * bv.cols];
          double s = 0;
          for (int k = 0; k < g.cols; ++k) s += grow[k] * brow[k];
          ga(i, j) += s;
        }
      // dB[j][k] = sum_i A[i][j] * g[i][k]
      for (int i = 0; i < av.rows; ++i)
        for (int j = 0; j < av.cols; ++j) {
          double avij = av(i, j);
          if (avij == 0.0) continue;
          const double* grow = &g.d[static_cast<size_t>(i) * g.cols];
          double* gbrow = &gb.d[static_cast<size_t>(j) * gb.cols];
          for (int k = 0; k < g.cols; ++k) gbrow[k] += avij * grow[k];
        }
    };
    return out;
  }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Mat out = nodes_[a].val;
    const Mat& bv = nodes_[b].val;
    for (size_t i = 0; i < out.size(); ++i) out.d[i] += bv.d[i];
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, b, o]() {
      const Mat& g = nodes_[o].grad;
      accumulate(a, g);
      accumulate(b, g);
    };
    return o;
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Mat out = nodes_[a].val;
    const Mat& bv = nodes_[b].val;
    for (size_t i = 0; i < out.size(); ++i) out.d[i] -= bv.d[i];
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, b, o]() {
      const Mat& g = nodes_[o].grad;
      accumulate(a, g);
      Mat& gb = nodes_[b].grad;
      for (size_t i = 0; i < g.size(); ++i) gb.d[i] -= g.d[i];
    };
    return o;
  }

  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    Mat out = nodes_[a].val;
    const Mat& bv = nodes_[b].val;
    for (size_t i = 0; i < out.size(); ++i) out.d[i] *= bv.d[i];
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, b, o]() {
      const Mat& g = nodes_[o].grad;
      Mat& ga = nodes_[a].grad;
      Mat& gb = nodes_[b].grad;
      const Mat& av = nodes_[a].val;
      const Mat& bv2 = nodes_[b].val;
      for (size_t i = 0; i < g.size(); ++i) {
        ga.d[i] += g.d[i] * bv2.d[i];
        gb.d[i] += g.d[i] * av.d[i];
      }
    };
    return o;
  }

  Var scale(Var a, double c) {
    Mat out = nodes_[a].val;
    for (double& x : out.d) x *= c;
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, c, o]() {
      const Mat& g = nodes_[o].grad;
      Mat& ga = nodes_[a].grad;
      for (size_t i = 0; i < g.size(); ++i) ga.d[i] += g.d[i] * c;
    };
    return o;
  }

  Var add_bias(Var a, Var bias) {  // bias: 1 x C, broadcast over rows
    const Mat& av = nodes_[a].val;
    const Mat& bv = nodes_[bias].val;
    if (bv.rows != 1 || bv.cols != av.cols)
      throw std::invalid_argument("add_bias shape");
    Mat out = av;
    for (int r = 0; r < out.rows; ++r)
      for (int c = 0; c < out.cols; ++c) out(r, c) += bv(0, c);
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, bias, o]() {
      const Mat& g = nodes_[o].grad;
      accumulate(a, g);
      Mat& gb = nodes_[bias].grad;
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) gb(0, c) += g(r, c);
    };
    return o;
  }

  Var row_scale(Var a, Var s) {  // s: R x 1, scales each row
    const Mat& av = nodes_[a].val;
    const Mat& sv = nodes_[s].val;
    if (sv.rows != av.rows || sv.cols != 1)
      throw std::invalid_argument("row_scale shape");
    Mat out = av;
    for (int r = 0; r < out.rows; ++r)
      for (int c = 0; c < out.cols; ++c) out(r, c) *= sv(r, 0);
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, s, o]() {
      const Mat& g = nodes_[o].grad;
      const Mat& av2 = nodes_[a].val;
      const Mat& sv2 = nodes_[s].val;
      Mat& ga = nodes_[a].grad;
      Mat& gs = nodes_[s].grad;
      for (int r = 0; r < g.rows; ++r) {
        double acc = 0;
        for (int c = 0; c < g.cols; ++c) {
          ga(r, c) += g(r, c) * sv2(r, 0);
          acc += g(r, c) * av2(r, c);
        }
        gs(r, 0) += acc;
      }
    };
    return o;
  }

  Var tanh_(Var a) {
    return unary(a, [](double x) { return std::tanh(x); },
                 [](double x, double y) {
                   (void)x;
                   return 1.0 - y * y;
                 });
  }
  Var sigmoid_(Var a) {
    return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                 [](double x, double y) {
                   (void)x;
                   return y * (1.0 - y);
                 });
  }
  Var relu_(Var a) {
    return unary(a, [](double x) { return x > 0 ? x : 0.0; },
                 [](double x, double y) {
                   (void)y;
                   return x > 0 ? 1.0 : 0.0;
                 });
  }
  Var exp_(Var a) {
    return unary(a, [](double x) { return std::exp(x); },
                 [](double x, double y) {
                   (void)x;
                   return y;
                 });
  }
  Var log_(Var a) {
    return unary(a, [](double x) { return std::log(x); },
                 [](double x, double y) {
                   (void)y;
                   return 1.0 / x;
                 });
  }

  Var clamp_(Var a, double lo, double hi) {
    return unary(a,
                 [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
                 [lo, hi](double x, double y) {
                   (void)y;
                   return (x >= lo && x <= hi) ? 1.0 : 0.0;
                 });
  }

  Var min_(Var a, Var b) {
    check_same(a, b, "min");
    const Mat& av = nodes_[a].val;
    const Mat& bv = nodes_[b].val;
    Mat out = av;
    for (size_t i = 0; i < out.size(); ++i) out.d[i] = std::min(av.d[i], bv.d[i]);
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, b, o]() {
      const Mat& g = nodes_[o].grad;
      const Mat& av2 = nodes_[a].val;
      const Mat& bv2 = nodes_[b].val;
      Mat& ga = nodes_[a].grad;
      Mat& gb = nodes_[b].grad;
      for (size_t i = 0; i < g.size(); ++i) {
        if (av2.d[i] <= bv2.d[i]) ga.d[i] += g.d[i];
        else gb.d[i] += g.d[i];
      }
    };
    return o;
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    int cols = nodes_[parts[0]].val.cols;
    int rows = 0;
    for (Var p : parts) {
      if (nodes_[p].val.cols != cols)
        throw std::invalid_argument("concat_rows: column mismatch");
      rows += nodes_[p].val.rows;
    }
    Mat out(rows, cols);
    int r0 = 0;
    for (Var p : parts) {
      const Mat& pv = nodes_[p].val;
      std::copy(pv.d.begin(), pv.d.end(),
                out.d.begin() + static_cast<size_t>(r0) * cols);
      r0 += pv.rows;
    }
    Var o = push(std::move(out), nullptr);
    std::vector<Var> ps = parts;
    backs_[o] = [this, ps, o]() {
      const Mat& g = nodes_[o].grad;
      int r = 0;
      for (Var p : ps) {
        Mat& gp = nodes_[p].grad;
        for (int i = 0; i < gp.rows; ++i)
          for (int c = 0; c < gp.cols; ++c) gp(i, c) += g(r + i, c);
        r += gp.rows;
      }
    };
    return o;
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    int rows = nodes_[parts[0]].val.rows;
    int cols = 0;
    for (Var p : parts) {
      if (nodes_[p].val.rows != rows)
        throw std::invalid_argument("concat_cols: row mismatch");
      cols += nodes_[p].val.cols;
    }
    Mat out(rows, cols);
    int c0 = 0;
    for (Var p : parts) {
      const Mat& pv = nodes_[p].val;
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < pv.cols; ++c) out(r, c0 + c) = pv(r, c);
      c0 += pv.cols;
    }
    Var o = push(std::move(out), nullptr);
    std::vector<Var> ps = parts;
    backs_[o] = [this, ps, o]() {
      const Mat& g = nodes_[o].grad;
      int c0b = 0;
      for (Var p : ps) {
        Mat& gp = nodes_[p].grad;
        for (int r = 0; r < gp.rows; ++r)
          for (int c = 0; c < gp.cols; ++c) gp(r, c) += g(r, c0b + c);
        c0b += gp.cols;
      }
    };
    return o;
  }

  Var sub_scalar(Var a, Var s) {  // s: 1x1, broadcast subtract
    if (nodes_[s].val.rows != 1 || nodes_[s].val.cols != 1)
      throw std::invalid_argument("sub_scalar: s must be 1x1");
    Mat out = nodes_[a].val;
    double sv = nodes_[s].val(0, 0);
    for (double& x : out.d) x -= sv;
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, s, o]() {
      const Mat& g = nodes_[o].grad;
      accumulate(a, g);
      double acc = 0;
      for (double x : g.d) acc += x;
      nodes_[s].grad(0, 0) -= acc;
    };
    return o;
  }

  Var slice_cols(Var a, int c0, int c1) {
    const Mat& av = nodes_[a].val;
    Mat out(av.rows, c1 - c0);
    for (int r = 0; r < av.rows; ++r)
      for (int c = c0; c < c1; ++c) out(r, c - c0) = av(r, c);
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, c0, o]() {
      const Mat& g = nodes_[o].grad;
      Mat& ga = nodes_[a].grad;
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) ga(r, c0 + c) += g(r, c);
    };
    return o;
  }

  // out[i] = dot(a.row(map[i]), b.row(i)); pairs rows of two matrices
  Var rows_dot(Var a, Var b, std::vector<int> map) {
    const Mat& av = nodes_[a].val;
    const Mat& bv = nodes_[b].val;
    if (av.cols != bv.cols) throw std::invalid_argument("rows_dot: cols");
    Mat out(bv.rows, 1);
    for (int i = 0; i < bv.rows; ++i) {
      double s = 0;
      for (int c = 0; c < av.cols; ++c) s += av(map[i], c) * bv(i, c);
      out(i, 0) = s;
    }
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, b, map = std::move(map), o]() {
      const Mat& g = nodes_[o].grad;
      const Mat& av2 = nodes_[a].val;
      const Mat& bv2 = nodes_[b].val;
      Mat& ga = nodes_[a].grad;
      Mat& gb = nodes_[b].grad;
      for (int i = 0; i < g.rows; ++i) {
        double gi = g(i, 0);
        if (gi == 0.0) continue;
        for (int c = 0; c < av2.cols; ++c) {
          ga(map[i], c) += gi * bv2(i, c);
          gb(i, c) += gi * av2(map[i], c);
        }
      }
    };
    return o;
  }

  Var slice_rows(Var a, int r0, int r1) {
    const Mat& av = nodes_[a].val;
    Mat out(r1 - r0, av.cols);
    for (int r = r0; r < r1; ++r)
      for (int c = 0; c < av.cols; ++c) out(r - r0, c) = av(r, c);
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, r0, o]() {
      const Mat& g = nodes_[o].grad;
      Mat& ga = nodes_[a].grad;
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) ga(r0 + r, c) += g(r, c);
    };
    return o;
  }

  Var gather_rows(Var a, std::vector<int> idx) {
    const Mat& av = nodes_[a].val;
    Mat out(static_cast<int>(idx.size()), av.cols);
    for (size_t r = 0; r < idx.size(); ++r)
      for (int c = 0; c < av.cols; ++c)
        out(static_cast<int>(r), c) = av(idx[r], c);
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, idx = std::move(idx), o]() {
      const Mat& g = nodes_[o].grad;
      Mat& ga = nodes_[a].grad;
      for (size_t r = 0; r < idx.size(); ++r)
        for (int c = 0; c < g.cols; ++c)
          ga(idx[r], c) += g(static_cast<int>(r), c);
    };
    return o;
  }

  Var gather_elems(Var a, std::vector<std::pair<int, int>> pos) {
    const Mat& av = nodes_[a].val;
    Mat out(static_cast<int>(pos.size()), 1);
    for (size_t i = 0; i < pos.size(); ++i)
      out(static_cast<int>(i), 0) = av(pos[i].first, pos[i].second);
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, pos = std::move(pos), o]() {
      const Mat& g = nodes_[o].grad;
      Mat& ga = nodes_[a].grad;
      for (size_t i = 0; i < pos.size(); ++i)
        ga(pos[i].first, pos[i].second) += g(static_cast<int>(i), 0);
    };
    return o;
  }

  Var segment_sum(Var a, std::vector<int> seg, int nseg) {
    const Mat& av = nodes_[a].val;
    Mat out(nseg, av.cols);
    for (int r = 0; r < av.rows; ++r)
      for (int c = 0; c < av.cols; ++c) out(seg[r], c) += av(r, c);
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, seg = std::move(seg), o]() {
      const Mat& g = nodes_[o].grad;
      Mat& ga = nodes_[a].grad;
      for (int r = 0; r < ga.rows; ++r)
        for (int c = 0; c < ga.cols; ++c) ga(r, c) += g(seg[r], c);
    };
    return o;
  }

  Var segment_mean(Var a, const std::vector<int>& seg, int nseg) {
    std::vector<double> cnt(nseg, 0.0);
    for (int s : seg) cnt[s] += 1.0;
    Var summed = segment_sum(a, seg, nseg);
    Mat inv(nseg, 1);
    for (int i = 0; i < nseg; ++i) inv(i, 0) = cnt[i] > 0 ? 1.0 / cnt[i] : 0.0;
    return row_scale(summed, leaf(std::move(inv)));
  }

  Var row_sum(Var a) {
    const Mat& av = nodes_[a].val;
    Mat out(av.rows, 1);
    for (int r = 0; r < av.rows; ++r) {
      double s = 0;
      for (int c = 0; c < av.cols; ++c) s += av(r, c);
      out(r, 0) = s;
    }
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, o]() {
      const Mat& g = nodes_[o].grad;
      Mat& ga = nodes_[a].grad;
      for (int r = 0; r < ga.rows; ++r)
        for (int c = 0; c < ga.cols; ++c) ga(r, c) += g(r, 0);
    };
    return o;
  }

  Var row_log_softmax(Var a) {
    const Mat& av = nodes_[a].val;
    Mat out = av;
    for (int r = 0; r < av.rows; ++r) {
      double mx = av(r, 0);
      for (int c = 1; c < av.cols; ++c) mx = std::max(mx, av(r, c));
      double lse = 0;
      for (int c = 0; c < av.cols; ++c) lse += std::exp(av(r, c) - mx);
      lse = mx + std::log(lse);
      for (int c = 0; c < av.cols; ++c) out(r, c) = av(r, c) - lse;
    }
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, o]() {
      const Mat& g = nodes_[o].grad;
      const Mat& yv = nodes_[o].val;
      Mat& ga = nodes_[a].grad;
      for (int r = 0; r < g.rows; ++r) {
        double gsum = 0;
        for (int c = 0; c < g.cols; ++c) gsum += g(r, c);
        for (int c = 0; c < g.cols; ++c)
          ga(r, c) += g(r, c) - std::exp(yv(r, c)) * gsum;
      }
    };
    return o;
  }

  // log sum exp over row subsets of a column vector: out[i] = lse(a[groups[i]])
  Var subset_logsumexp(Var a, std::vector<std::vector<int>> groups) {
    const Mat& av = nodes_[a].val;
    if (av.cols != 1) throw std::invalid_argument("subset_logsumexp: column");
    Mat out(static_cast<int>(groups.size()), 1);
    for (size_t i = 0; i < groups.size(); ++i) {
      double mx = -1e300;
      for (int r : groups[i]) mx = std::max(mx, av(r, 0));
      double s = 0;
      for (int r : groups[i]) s += std::exp(av(r, 0) - mx);
      out(static_cast<int>(i), 0) = mx + std::log(s);
    }
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, groups = std::move(groups), o]() {
      const Mat& g = nodes_[o].grad;
      const Mat& yv = nodes_[o].val;
      const Mat& av2 = nodes_[a].val;
      Mat& ga = nodes_[a].grad;
      for (size_t i = 0; i < groups.size(); ++i) {
        double gi = g(static_cast<int>(i), 0);
        if (gi == 0.0) continue;
        double yi = yv(static_cast<int>(i), 0);
        for (int r : groups[i]) ga(r, 0) += gi * std::exp(av2(r, 0) - yi);
      }
    };
    return o;
  }

  Var max_rows_grouped(Var a, std::vector<std::vector<int>> groups) {
    const Mat& av = nodes_[a].val;
    Mat out(static_cast<int>(groups.size()), av.cols);
    auto argmax = std::make_shared<std::vector<int>>(groups.size() * av.cols);
    for (size_t i = 0; i < groups.size(); ++i)
      for (int c = 0; c < av.cols; ++c) {
        int best = groups[i][0];
        for (int r : groups[i])
          if (av(r, c) > av(best, c)) best = r;
        out(static_cast<int>(i), c) = av(best, c);
        (*argmax)[i * av.cols + c] = best;
      }
    Var o = push(std::move(out), nullptr);
    int cols = av.cols;
    backs_[o] = [this, a, argmax, cols, o]() {
      const Mat& g = nodes_[o].grad;
      Mat& ga = nodes_[a].grad;
      for (int i = 0; i < g.rows; ++i)
        for (int c = 0; c < cols; ++c)
          ga((*argmax)[static_cast<size_t>(i) * cols + c], c) += g(i, c);
    };
    return o;
  }

  Var sum_all(Var a) {
    const Mat& av = nodes_[a].val;
    double s = 0;
    for (double x : av.d) s += x;
    Var o = push(Mat(1, 1, {s}), nullptr);
    backs_[o] = [this, a, o]() {
      double g = nodes_[o].grad(0, 0);
      Mat& ga = nodes_[a].grad;
      for (double& x : ga.d) x += g;
    };
    return o;
  }

  Var mean_all(Var a) {
    double n = static_cast<double>(nodes_[a].val.size());
    return scale(sum_all(a), 1.0 / n);
  }

  void backward(Var loss) {
    if (nodes_[loss].val.rows != 1 || nodes_[loss].val.cols != 1)
      throw std::invalid_argument("backward: loss must be a scalar");
    for (auto& n : nodes_) {
      n.grad = Mat(n.val.rows, n.val.cols);
    }
    nodes_[loss].grad(0, 0) = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i)
      if (backs_[i]) backs_[i]();
  }

 private:
  struct Node {
    Mat val;
    Mat grad;
  };

  Var push(Mat val, std::nullptr_t) {
    nodes_.push_back(Node{std::move(val), Mat()});
    backs_.push_back(nullptr);
    return static_cast<Var>(nodes_.size() - 1);
  }

  void check_same(Var a, Var b, const char* what) {
    if (!nodes_[a].val.same_shape(nodes_[b].val))
      throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }

  void accumulate(Var a, const Mat& g) {
    Mat& ga = nodes_[a].grad;
    for (size_t i = 0; i < g.size(); ++i) ga.d[i] += g.d[i];
  }

  template <typename F, typename DF>
  Var unary(Var a, F f, DF df) {
    Mat out = nodes_[a].val;
    for (double& x : out.d) x = f(x);
    Var o = push(std::move(out), nullptr);
    backs_[o] = [this, a, o, df]() {
      const Mat& g = nodes_[o].grad;
      const Mat& xv = nodes_[a].val;
      const Mat& yv = nodes_[o].val;
      Mat& ga = nodes_[a].grad;
      for (size_t i = 0; i < g.size(); ++i)
        ga.d[i] += g.d[i] * df(xv.d[i], yv.d[i]);
    };
    return o;
  }

  std::vector<Node> nodes_;
  std::vector<std::function<void()>> backs_;
};

}  // namespace qgrid::nn
