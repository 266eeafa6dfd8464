// Copyright (c) 2026 The sasvkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sasv/tensor.h"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace sasv {

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::make(Mat value, bool needs_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Mat value, bool needs_grad) {
  return make(std::move(value), needs_grad, nullptr);
}

Var Tape::scalar(double value, bool needs_grad) {
  Mat m(1, 1);
  m(0, 0) = value;
  return input(std::move(m), needs_grad);
}

const Mat& Tape::val(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("Tape::val: invalid var");
  }
  return nodes_[v.id].value;
}

Mat Tape::grad_of(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accum(int id, const Mat& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) {
  Node& r = nodes_.at(root.id);
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw std::invalid_argument("Tape::backward: root must be 1x1");
  }
  r.grad = Mat::Ones(1, 1);
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.back || n.grad.size() == 0 || !n.needs_grad) continue;
    n.back();
  }
}

Var Tape::add(Var a, Var b) {
  check_same_shape(v(a.id), v(b.id), "add");
  bool ng = wants(a.id) || wants(b.id);
  Var out = make(v(a.id) + v(b.id), ng, nullptr);
  int oi = out.id, ai = a.id, bi = b.id;
  nodes_[oi].back = [this, oi, ai, bi]() {
    accum(ai, g(oi));
    accum(bi, g(oi));
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(v(a.id), v(b.id), "sub");
  bool ng = wants(a.id) || wants(b.id);
  Var out = make(v(a.id) - v(b.id), ng, nullptr);
  int oi = out.id, ai = a.id, bi = b.id;
  nodes_[oi].back = [this, oi, ai, bi]() {
    accum(ai, g(oi));
    accum(bi, Mat(-g(oi)));
  };
  return out;
}

Var Tape::neg(Var a) { return scale(a, -1.0); }

Var Tape::mul(Var a, Var b) {
  check_same_shape(v(a.id), v(b.id), "mul");
  bool ng = wants(a.id) || wants(b.id);
  Var out = make(v(a.id).cwiseProduct(v(b.id)), ng, nullptr);
  int oi = out.id, ai = a.id, bi = b.id;
  nodes_[oi].back = [this, oi, ai, bi]() {
    accum(ai, g(oi).cwiseProduct(v(bi)));
    accum(bi, g(oi).cwiseProduct(v(ai)));
  };
  return out;
}

Var Tape::div(Var a, Var b) {
  check_same_shape(v(a.id), v(b.id), "div");
  bool ng = wants(a.id) || wants(b.id);
  Var out = make(v(a.id).cwiseQuotient(v(b.id)), ng, nullptr);
  int oi = out.id, ai = a.id, bi = b.id;
  nodes_[oi].back = [this, oi, ai, bi]() {
    accum(ai, g(oi).cwiseQuotient(v(bi)));
    Mat db = -g(oi).cwiseProduct(v(ai)).cwiseQuotient(v(bi).cwiseProduct(v(bi)));
    accum(bi, db);
  };
  return out;
}

Var Tape::scale(Var a, double c) {
  Var out = make(v(a.id) * c, wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai, c]() { accum(ai, Mat(g(oi) * c)); };
  return out;
}

Var Tape::add_scalar(Var a, double c) {
  Var out = make(Mat(v(a.id).array() + c), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai]() { accum(ai, g(oi)); };
  return out;
}

Var Tape::add_n(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("add_n: empty list");
  bool ng = false;
  Mat sum = v(xs[0].id);
  ng = wants(xs[0].id);
  for (size_t i = 1; i < xs.size(); ++i) {
    check_same_shape(sum, v(xs[i].id), "add_n");
    sum += v(xs[i].id);
    ng = ng || wants(xs[i].id);
  }
  Var out = make(std::move(sum), ng, nullptr);
  int oi = out.id;
  std::vector<int> ids;
  ids.reserve(xs.size());
  for (Var x : xs) ids.push_back(x.id);
  nodes_[oi].back = [this, oi, ids]() {
    for (int id : ids) accum(id, g(oi));
  };
  return out;
}

Var Tape::matmul(Var a, Var b) {
  if (v(a.id).cols() != v(b.id).rows()) {
    throw std::invalid_argument("matmul: inner dimension mismatch");
  }
  bool ng = wants(a.id) || wants(b.id);
  Var out = make(v(a.id) * v(b.id), ng, nullptr);
  int oi = out.id, ai = a.id, bi = b.id;
  nodes_[oi].back = [this, oi, ai, bi]() {
    accum(ai, Mat(g(oi) * v(bi).transpose()));
    accum(bi, Mat(v(ai).transpose() * g(oi)));
  };
  return out;
}

Var Tape::transpose(Var a) {
  Var out = make(v(a.id).transpose(), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai]() { accum(ai, Mat(g(oi).transpose())); };
  return out;
}

Var Tape::relu(Var a) {
  Var out = make(v(a.id).cwiseMax(0.0), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai]() {
    Mat mask = (v(ai).array() > 0.0).cast<double>().matrix();
    accum(ai, g(oi).cwiseProduct(mask));
  };
  return out;
}

Var Tape::sigmoid(Var a) {
  Mat s = v(a.id).unaryExpr([](double x) { return stable_sigmoid(x); });
  Var out = make(std::move(s), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai]() {
    const Mat& s = v(oi);
    Mat ds = (s.array() * (1.0 - s.array())).matrix();
    accum(ai, g(oi).cwiseProduct(ds));
  };
  return out;
}

Var Tape::log_m(Var a) {
  Var out = make(Mat(v(a.id).array().log()), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai]() {
    accum(ai, g(oi).cwiseQuotient(v(ai)));
  };
  return out;
}

Var Tape::sqrt_m(Var a) {
  Var out = make(Mat(v(a.id).array().sqrt()), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai]() {
    Mat d = (0.5 * v(oi).array().inverse()).matrix();
    accum(ai, g(oi).cwiseProduct(d));
  };
  return out;
}

Var Tape::clamp(Var a, double lo, double hi) {
  Mat c = v(a.id).cwiseMax(lo).cwiseMin(hi);
  Var out = make(std::move(c), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai, lo, hi]() {
    Mat mask =
        ((v(ai).array() > lo) && (v(ai).array() < hi)).cast<double>().matrix();
    accum(ai, g(oi).cwiseProduct(mask));
  };
  return out;
}

Var Tape::sum_all(Var a) {
  Mat s(1, 1);
  s(0, 0) = v(a.id).sum();
  Var out = make(std::move(s), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai]() {
    double go = g(oi)(0, 0);
    accum(ai, Mat(Mat::Constant(v(ai).rows(), v(ai).cols(), go)));
  };
  return out;
}

Var Tape::mean_rows(Var a) {
  Mat m = v(a.id).colwise().mean();
  Var out = make(std::move(m), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai]() {
    double inv = 1.0 / static_cast<double>(v(ai).rows());
    Mat da = Mat::Ones(v(ai).rows(), 1) * (g(oi) * inv);
    accum(ai, da);
  };
  return out;
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty list");
  Eigen::Index rows = v(xs[0].id).rows();
  Eigen::Index cols = 0;
  bool ng = false;
  for (Var x : xs) {
    if (v(x.id).rows() != rows) {
      throw std::invalid_argument("concat_cols: row mismatch");
    }
    cols += v(x.id).cols();
    ng = ng || wants(x.id);
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (Var x : xs) {
    out.middleCols(at, v(x.id).cols()) = v(x.id);
    at += v(x.id).cols();
  }
  Var o = make(std::move(out), ng, nullptr);
  int oi = o.id;
  std::vector<int> ids;
  for (Var x : xs) ids.push_back(x.id);
  nodes_[oi].back = [this, oi, ids]() {
    Eigen::Index at = 0;
    for (int id : ids) {
      Eigen::Index c = v(id).cols();
      accum(id, Mat(g(oi).middleCols(at, c)));
      at += c;
    }
  };
  return o;
}

Var Tape::concat_rows(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty list");
  Eigen::Index cols = v(xs[0].id).cols();
  Eigen::Index rows = 0;
  bool ng = false;
  for (Var x : xs) {
    if (v(x.id).cols() != cols) {
      throw std::invalid_argument("concat_rows: column mismatch");
    }
    rows += v(x.id).rows();
    ng = ng || wants(x.id);
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (Var x : xs) {
    out.middleRows(at, v(x.id).rows()) = v(x.id);
    at += v(x.id).rows();
  }
  Var o = make(std::move(out), ng, nullptr);
  int oi = o.id;
  std::vector<int> ids;
  for (Var x : xs) ids.push_back(x.id);
  nodes_[oi].back = [this, oi, ids]() {
    Eigen::Index at = 0;
    for (int id : ids) {
      Eigen::Index r = v(id).rows();
      accum(id, Mat(g(oi).middleRows(at, r)));
      at += r;
    }
  };
  return o;
}

Var Tape::slice_cols(Var a, int start, int n) {
  Var out = make(v(a.id).middleCols(start, n), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai, start, n]() {
    Mat da = Mat::Zero(v(ai).rows(), v(ai).cols());
    da.middleCols(start, n) = g(oi);
    accum(ai, da);
  };
  return out;
}

Var Tape::pick(Var a, int i, int j) {
  Mat p(1, 1);
  p(0, 0) = v(a.id)(i, j);
  Var out = make(std::move(p), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai, i, j]() {
    Mat da = Mat::Zero(v(ai).rows(), v(ai).cols());
    da(i, j) = g(oi)(0, 0);
    accum(ai, da);
  };
  return out;
}

Var Tape::add_row(Var x, Var r) {
  if (v(r.id).rows() != 1 || v(r.id).cols() != v(x.id).cols()) {
    throw std::invalid_argument("add_row: r must be 1 x cols(x)");
  }
  Mat out = v(x.id).rowwise() + v(r.id).row(0);
  bool ng = wants(x.id) || wants(r.id);
  Var o = make(std::move(out), ng, nullptr);
  int oi = o.id, xi = x.id, ri = r.id;
  nodes_[oi].back = [this, oi, xi, ri]() {
    accum(xi, g(oi));
    accum(ri, Mat(g(oi).colwise().sum()));
  };
  return o;
}

Var Tape::row_broadcast_mul(Var x, Var r) {
  if (v(r.id).rows() != 1 || v(r.id).cols() != v(x.id).cols()) {
    throw std::invalid_argument("row_broadcast_mul: r must be 1 x cols(x)");
  }
  Mat out = (v(x.id).array().rowwise() * v(r.id).row(0).array()).matrix();
  bool ng = wants(x.id) || wants(r.id);
  Var o = make(std::move(out), ng, nullptr);
  int oi = o.id, xi = x.id, ri = r.id;
  nodes_[oi].back = [this, oi, xi, ri]() {
    Mat dx = (g(oi).array().rowwise() * v(ri).row(0).array()).matrix();
    accum(xi, dx);
    Mat dr = (g(oi).cwiseProduct(v(xi))).colwise().sum();
    accum(ri, dr);
  };
  return o;
}

Var Tape::softmax_rows(Var a) {
  const Mat& x = v(a.id);
  Mat y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mx = x.row(i).maxCoeff();
    Eigen::RowVectorXd e = (x.row(i).array() - mx).exp().matrix();
    y.row(i) = e / e.sum();
  }
  Var out = make(std::move(y), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai]() {
    const Mat& y = v(oi);
    const Mat& go = g(oi);
    Mat da(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      double dot = go.row(i).cwiseProduct(y.row(i)).sum();
      da.row(i) = (y.row(i).array() * (go.row(i).array() - dot)).matrix();
    }
    accum(ai, da);
  };
  return out;
}

Var Tape::log_softmax_rows(Var a) {
  const Mat& x = v(a.id);
  Mat y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mx = x.row(i).maxCoeff();
    double lse = std::log((x.row(i).array() - mx).exp().sum()) + mx;
    y.row(i) = (x.row(i).array() - lse).matrix();
  }
  Var out = make(std::move(y), wants(a.id), nullptr);
  int oi = out.id, ai = a.id;
  nodes_[oi].back = [this, oi, ai]() {
    const Mat& y = v(oi);
    const Mat& go = g(oi);
    Mat da(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      double s = go.row(i).sum();
      da.row(i) = (go.row(i).array() - y.row(i).array().exp() * s).matrix();
    }
    accum(ai, da);
  };
  return out;
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Mat& xm = v(x.id);
  if (v(gain.id).rows() != 1 || v(gain.id).cols() != xm.cols() ||
      v(bias.id).rows() != 1 || v(bias.id).cols() != xm.cols()) {
    throw std::invalid_argument("layer_norm: gain/bias must be 1 x cols(x)");
  }
  Eigen::VectorXd mu = xm.rowwise().mean();
  Mat xc = xm.colwise() - mu;
  Eigen::VectorXd var = xc.array().square().rowwise().mean().matrix();
  Eigen::VectorXd inv = (var.array() + eps).rsqrt().matrix();
  Mat xhat = (xc.array().colwise() * inv.array()).matrix();
  Mat y = ((xhat.array().rowwise() * v(gain.id).row(0).array()).rowwise() +
           v(bias.id).row(0).array())
              .matrix();
  bool ng = wants(x.id) || wants(gain.id) || wants(bias.id);
  Var out = make(std::move(y), ng, nullptr);
  int oi = out.id, xi = x.id, gi = gain.id, bi = bias.id;
  nodes_[oi].back = [this, oi, xi, gi, bi, eps]() {
    // Recompute the normalization statistics from the stored input.
    const Mat& xm = v(xi);
    Eigen::VectorXd mu = xm.rowwise().mean();
    Mat xc = xm.colwise() - mu;
    Eigen::VectorXd var = xc.array().square().rowwise().mean().matrix();
    Eigen::VectorXd inv = (var.array() + eps).rsqrt().matrix();
    Mat xhat = (xc.array().colwise() * inv.array()).matrix();
    const Mat& go = g(oi);
    accum(gi, Mat(go.cwiseProduct(xhat).colwise().sum()));
    accum(bi, Mat(go.colwise().sum()));
    if (wants(xi)) {
      Mat dxhat = (go.array().rowwise() * v(gi).row(0).array()).matrix();
      Eigen::VectorXd m1 = dxhat.rowwise().mean();
      Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
      Mat centered = dxhat.colwise() - m1;
      Mat proj = (xhat.array().colwise() * m2.array()).matrix();
      Mat dx = ((centered - proj).array().colwise() * inv.array()).matrix();
      accum(xi, dx);
    }
  };
  return out;
}

Var Tape::conv1d(Var x, Var w, Var b, int kernel, int dilation) {
  const Mat& xm = v(x.id);
  const Mat& wm = v(w.id);
  Eigen::Index frames = xm.rows();
  Eigen::Index din = xm.cols();
  if (kernel < 1 || kernel % 2 == 0) {
    throw std::invalid_argument("conv1d: kernel must be odd and positive");
  }
  if (dilation < 1) throw std::invalid_argument("conv1d: dilation must be >= 1");
  if (wm.rows() != static_cast<Eigen::Index>(kernel) * din) {
    throw std::invalid_argument("conv1d: weight rows must be kernel*din");
  }
  Eigen::Index dout = wm.cols();
  if (v(b.id).rows() != 1 || v(b.id).cols() != dout) {
    throw std::invalid_argument("conv1d: bias must be 1 x dout");
  }
  int pad = dilation * (kernel - 1) / 2;
  Mat y = Mat::Zero(frames, dout);
  for (int j = 0; j < kernel; ++j) {
    int shift = j * dilation - pad;
    Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    Eigen::Index hi = std::min<Eigen::Index>(frames, frames - shift);
    if (hi <= lo) continue;
    y.middleRows(lo, hi - lo) +=
        xm.middleRows(lo + shift, hi - lo) * wm.middleRows(j * din, din);
  }
  y.rowwise() += v(b.id).row(0);
  bool ng = wants(x.id) || wants(w.id) || wants(b.id);
  Var out = make(std::move(y), ng, nullptr);
  int oi = out.id, xi = x.id, wi = w.id, bi = b.id;
  nodes_[oi].back = [this, oi, xi, wi, bi, kernel, dilation, pad]() {
    const Mat& xm = v(xi);
    const Mat& wm = v(wi);
    const Mat& go = g(oi);
    Eigen::Index frames = xm.rows();
    Eigen::Index din = xm.cols();
    Mat dx = Mat::Zero(frames, din);
    Mat dw = Mat::Zero(wm.rows(), wm.cols());
    for (int j = 0; j < kernel; ++j) {
      int shift = j * dilation - pad;
      Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
      Eigen::Index hi = std::min<Eigen::Index>(frames, frames - shift);
      if (hi <= lo) continue;
      dx.middleRows(lo + shift, hi - lo) +=
          go.middleRows(lo, hi - lo) * wm.middleRows(j * din, din).transpose();
      dw.middleRows(j * din, din) +=
          xm.middleRows(lo + shift, hi - lo).transpose() *
          go.middleRows(lo, hi - lo);
    }
    accum(xi, dx);
    accum(wi, dw);
    accum(bi, Mat(go.colwise().sum()));
  };
  return out;
}

// ---- ParamStore ----

void ParamStore::add(const std::string& name, Mat value) {
  if (has(name)) {
    throw std::invalid_argument("ParamStore::add: duplicate tensor " + name);
  }
  tensors_.emplace_back(name, std::move(value));
}

bool ParamStore::has(const std::string& name) const {
  return index_of(name) >= 0;
}

int ParamStore::index_of(const std::string& name) const {
  for (size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].first == name) return static_cast<int>(i);
  }
  return -1;
}

Mat& ParamStore::at(const std::string& name) {
  int i = index_of(name);
  if (i < 0) throw std::invalid_argument("ParamStore: no tensor " + name);
  return tensors_[i].second;
}

const Mat& ParamStore::at(const std::string& name) const {
  int i = index_of(name);
  if (i < 0) throw std::invalid_argument("ParamStore: no tensor " + name);
  return tensors_[i].second;
}

Var BoundParams::of(const std::string& name) const {
  int i = store->index_of(name);
  if (i < 0) throw std::invalid_argument("BoundParams: no tensor " + name);
  return vars[i];
}

BoundParams bind_params(Tape& tape, const ParamStore& params, bool needs_grad) {
  BoundParams bound;
  bound.store = &params;
  bound.vars.reserve(params.size());
  for (const auto& [name, value] : params.tensors()) {
    bound.vars.push_back(tape.input(value, needs_grad));
  }
  return bound;
}

std::vector<Mat> collect_grads(const Tape& tape, const BoundParams& bound) {
  std::vector<Mat> grads;
  grads.reserve(bound.vars.size());
  for (Var v : bound.vars) grads.push_back(tape.grad_of(v));
  return grads;
}

Var dot_rows(Tape& t, Var a, Var b) { return t.sum_all(t.mul(a, b)); }

Var cosine_rows(Tape& t, Var a, Var b) {
  constexpr double kFloor = 1e-24;
  Var num = dot_rows(t, a, b);
  Var na = t.sqrt_m(t.add_scalar(t.sum_all(t.mul(a, a)), kFloor));
  Var nb = t.sqrt_m(t.add_scalar(t.sum_all(t.mul(b, b)), kFloor));
  return t.div(num, t.mul(na, nb));
}

}  // namespace sasv
