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

#ifndef SASV_TENSOR_H_
#define SASV_TENSOR_H_

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace sasv {

using Mat = Eigen::MatrixXd;

// Handle into a Tape. Valid only for the tape that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff tape over dense double matrices. Nodes are appended
// in creation order, so walking ids backwards from the loss node is a valid
// reverse-topological order. A tape is built per batch, run backward once,
// and discarded (or clear()ed).
//
// Gradients are accumulated lazily: a node whose gradient was never touched
// contributes nothing and its backward closure is skipped.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Mat value, bool needs_grad = false);
  Var constant(Mat value) { return input(std::move(value), false); }
  Var scalar(double value, bool needs_grad = false);

  const Mat& val(Var v) const;
  // Gradient of the last backward() root w.r.t. v. Zero matrix if untouched.
  Mat grad_of(Var v) const;

  // Seeds d(root)/d(root) = 1 and propagates. root must be 1x1. Call once
  // per tape.
  void backward(Var root);

  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // ---- elementwise / arithmetic ----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var neg(Var a);
  Var mul(Var a, Var b);  // elementwise
  Var div(Var a, Var b);  // elementwise
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var add_n(const std::vector<Var>& xs);  // elementwise sum of same-shape vars

  // ---- linear algebra ----
  Var matmul(Var a, Var b);
  Var transpose(Var a);

  // ---- nonlinearities ----
  Var relu(Var a);
  Var sigmoid(Var a);           // numerically stable
  Var log_m(Var a);             // elementwise natural log
  Var sqrt_m(Var a);            // elementwise sqrt
  Var clamp(Var a, double lo, double hi);  // pass-through gradient inside

  // ---- reductions / shape ----
  Var sum_all(Var a);                       // -> 1x1
  Var mean_rows(Var a);                     // R x C -> 1 x C
  Var concat_cols(const std::vector<Var>& xs);
  Var concat_rows(const std::vector<Var>& xs);
  Var slice_cols(Var a, int start, int n);
  Var pick(Var a, int i, int j);            // -> 1x1

  // ---- row-vector broadcast ----
  Var add_row(Var x, Var r);            // x + 1*r   (r is 1 x C)
  Var row_broadcast_mul(Var x, Var r);  // x .* (1*r)

  // ---- structured ops ----
  // Row-wise softmax with max subtraction.
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  // Per-row layer normalization over columns, then gain/bias (1 x C each).
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-12);
  // Same-length 1-D convolution over time (rows). w is (k*din) x dout with
  // tap j occupying rows [j*din, (j+1)*din); b is 1 x dout. Zero padding.
  Var conv1d(Var x, Var w, Var b, int kernel, int dilation = 1);

 private:
  struct Node {
    Mat value;
    Mat grad;  // empty until touched
    bool needs_grad = false;
    std::function<void()> back;  // empty for leaves
  };

  Var make(Mat value, bool needs_grad, std::function<void()> back);
  void accum(int id, const Mat& g);
  const Mat& v(int id) const { return nodes_[id].value; }
  Mat& g(int id) { return nodes_[id].grad; }
  bool wants(int id) const { return nodes_[id].needs_grad; }

  std::vector<Node> nodes_;
};

// Ordered named parameter container. Iteration order is insertion order and
// defines the layout used by the optimizer and the checkpoint format.
class ParamStore {
 public:
  void add(const std::string& name, Mat value);
  bool has(const std::string& name) const;
  int index_of(const std::string& name) const;  // -1 if absent
  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  Mat& at(int index) { return tensors_[index].second; }
  const Mat& at(int index) const { return tensors_[index].second; }
  const std::string& name_of(int index) const { return tensors_[index].first; }
  size_t size() const { return tensors_.size(); }

  const std::vector<std::pair<std::string, Mat>>& tensors() const {
    return tensors_;
  }

 private:
  std::vector<std::pair<std::string, Mat>> tensors_;
};

// Parameters registered on a tape. vars[i] corresponds to store tensor i.
struct BoundParams {
  const ParamStore* store = nullptr;
  std::vector<Var> vars;
  Var of(const std::string& name) const;
};

BoundParams bind_params(Tape& tape, const ParamStore& params, bool needs_grad);

// Gradients for every tensor after backward(), in store order (zero matrices
// where a parameter did not participate).
std::vector<Mat> collect_grads(const Tape& tape, const BoundParams& bound);

// ---- composed helpers ----

// Dot product of two row vectors -> 1x1.
Var dot_rows(Tape& t, Var a, Var b);
// Cosine similarity of two row vectors -> 1x1. A tiny floor inside the
// square roots keeps the zero-vector case finite.
Var cosine_rows(Tape& t, Var a, Var b);

}  // namespace sasv

#endif  // SASV_TENSOR_H_
