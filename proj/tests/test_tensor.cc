#include <doctest.h>

#include <cmath>

#include "sasv/rng.h"
#include "sasv/tensor.h"
#include "test_util.h"

using namespace sasv;
using testutil::max_grad_rel_err;
using testutil::random_matrix;

TEST_SUITE("tensor") {

TEST_CASE("forward values of basic ops") {
  Tape t;
  Mat a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  Var va = t.input(a), vb = t.input(b);
  CHECK(t.val(t.add(va, vb))(1, 1) == 12.0);
  CHECK(t.val(t.mul(va, vb))(0, 1) == 12.0);
  CHECK(t.val(t.matmul(va, vb))(0, 0) == doctest::Approx(19.0));
  CHECK(t.val(t.sum_all(va))(0, 0) == 10.0);
  CHECK(t.val(t.mean_rows(va))(0, 0) == 2.0);
  CHECK(t.val(t.transpose(va))(0, 1) == 3.0);
}

TEST_CASE("gradients of elementwise and reduction ops match finite differences") {
  Rng rng(11);
  Mat x = random_matrix(rng, 4, 5);
  Mat other = random_matrix(rng, 4, 5);

  auto check = [&](const std::function<Var(Tape&, Var)>& build) {
    CHECK(max_grad_rel_err(build, x) < 1e-6);
  };

  check([&](Tape& t, Var v) { return t.sum_all(t.mul(v, t.input(other))); });
  check([&](Tape& t, Var v) {
    return t.sum_all(t.div(t.input(other), t.add_scalar(t.mul(v, v), 3.0)));
  });
  check([&](Tape& t, Var v) { return t.sum_all(t.relu(v)); });
  check([&](Tape& t, Var v) { return t.sum_all(t.sigmoid(v)); });
  check([&](Tape& t, Var v) {
    return t.sum_all(t.sqrt_m(t.add_scalar(t.mul(v, v), 1.0)));
  });
  check([&](Tape& t, Var v) {
    return t.sum_all(t.log_m(t.add_scalar(t.mul(v, v), 1.0)));
  });
  check([&](Tape& t, Var v) { return t.sum_all(t.mean_rows(t.mul(v, v))); });
  check([&](Tape& t, Var v) {
    return t.sum_all(t.mul(t.softmax_rows(v), t.input(other)));
  });
  check([&](Tape& t, Var v) {
    return t.sum_all(t.mul(t.log_softmax_rows(v), t.input(other)));
  });
}

TEST_CASE("matmul / transpose / concat / slice gradients") {
  Rng rng(12);
  Mat x = random_matrix(rng, 3, 4);
  Mat w = random_matrix(rng, 4, 2);

  CHECK(max_grad_rel_err(
            [&](Tape& t, Var v) {
              return t.sum_all(t.matmul(v, t.input(w)));
            },
            x) < 1e-6);
  CHECK(max_grad_rel_err(
            [&](Tape& t, Var v) {
              return t.sum_all(t.matmul(t.transpose(v), v));
            },
            x) < 1e-6);
  CHECK(max_grad_rel_err(
            [&](Tape& t, Var v) {
              Var s1 = t.slice_cols(v, 0, 2);
              Var s2 = t.slice_cols(v, 2, 2);
              return t.sum_all(t.mul(t.concat_cols({s1, s2}), v));
            },
            x) < 1e-6);
  CHECK(max_grad_rel_err(
            [&](Tape& t, Var v) {
              return t.pick(t.matmul(v, t.input(w)), 1, 1);
            },
            x) < 1e-6);
}

TEST_CASE("row broadcast ops") {
  Rng rng(13);
  Mat x = random_matrix(rng, 5, 3);
  Mat r = random_matrix(rng, 1, 3);

  CHECK(max_grad_rel_err(
            [&](Tape& t, Var v) {
              return t.sum_all(t.mul(t.add_row(v, t.input(r)), v));
            },
            x) < 1e-6);
  // Gradient w.r.t. the broadcast row itself.
  CHECK(max_grad_rel_err(
            [&](Tape& t, Var v) {
              return t.sum_all(t.row_broadcast_mul(t.input(x), v));
            },
            r) < 1e-6);
}

TEST_CASE("layer_norm normalizes per frame and its gradient is exact") {
  Rng rng(14);
  Mat x = random_matrix(rng, 6, 8, 2.0);
  Tape t;
  Var g = t.input(Mat::Ones(1, 8));
  Var b = t.input(Mat::Zero(1, 8));
  Var y = t.layer_norm(t.input(x), g, b);
  const Mat& ym = t.val(y);
  for (int i = 0; i < ym.rows(); ++i) {
    CHECK(std::abs(ym.row(i).mean()) < 1e-9);
    double var = (ym.row(i).array() - ym.row(i).mean()).square().mean();
    CHECK(std::abs(var - 1.0) < 1e-6);
  }

  Mat gain = random_matrix(rng, 1, 8);
  Mat bias = random_matrix(rng, 1, 8);
  CHECK(max_grad_rel_err(
            [&](Tape& tt, Var v) {
              return tt.sum_all(tt.mul(
                  tt.layer_norm(v, tt.input(gain), tt.input(bias)), v));
            },
            x) < 1e-5);
  // Gain and bias gradients.
  CHECK(max_grad_rel_err(
            [&](Tape& tt, Var v) {
              return tt.sum_all(tt.mul(
                  tt.layer_norm(tt.input(x), v, tt.input(bias)), tt.input(x)));
            },
            gain) < 1e-6);
  CHECK(max_grad_rel_err(
            [&](Tape& tt, Var v) {
              return tt.sum_all(tt.mul(
                  tt.layer_norm(tt.input(x), tt.input(gain), v), tt.input(x)));
            },
            bias) < 1e-6);
}

TEST_CASE("layer_norm is invariant to positive input scaling with unit gain") {
  Rng rng(15);
  Mat x = random_matrix(rng, 4, 6);
  Tape t;
  Var g = t.input(Mat::Ones(1, 6));
  Var b = t.input(Mat::Zero(1, 6));
  Mat y1 = t.val(t.layer_norm(t.input(x), g, b));
  Mat y2 = t.val(t.layer_norm(t.input(Mat(3.7 * x)), g, b));
  CHECK((y1 - y2).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("conv1d matches a direct computation and its gradients are exact") {
  Rng rng(16);
  const int frames = 7, din = 3, dout = 2, kernel = 3;
  Mat x = random_matrix(rng, frames, din);
  Mat w = random_matrix(rng, kernel * din, dout);
  Mat b = random_matrix(rng, 1, dout);

  for (int dilation : {1, 2}) {
    Tape t;
    Var y = t.conv1d(t.input(x), t.input(w), t.input(b), kernel, dilation);
    const Mat& ym = t.val(y);
    REQUIRE(ym.rows() == frames);
    REQUIRE(ym.cols() == dout);
    int pad = dilation * (kernel - 1) / 2;
    for (int tt = 0; tt < frames; ++tt) {
      for (int o = 0; o < dout; ++o) {
        double acc = b(0, o);
        for (int j = 0; j < kernel; ++j) {
          int src = tt + j * dilation - pad;
          if (src < 0 || src >= frames) continue;
          for (int c = 0; c < din; ++c) {
            acc += x(src, c) * w(j * din + c, o);
          }
        }
        CHECK(ym(tt, o) == doctest::Approx(acc).epsilon(1e-12));
      }
    }

    auto wrap_x = [&](Tape& tt2, Var v) {
      return tt2.sum_all(tt2.sigmoid(
          tt2.conv1d(v, tt2.input(w), tt2.input(b), kernel, dilation)));
    };
    CHECK(max_grad_rel_err(wrap_x, x) < 1e-6);
    auto wrap_w = [&](Tape& tt2, Var v) {
      return tt2.sum_all(tt2.sigmoid(
          tt2.conv1d(tt2.input(x), v, tt2.input(b), kernel, dilation)));
    };
    CHECK(max_grad_rel_err(wrap_w, w) < 1e-6);
    auto wrap_b = [&](Tape& tt2, Var v) {
      return tt2.sum_all(tt2.sigmoid(
          tt2.conv1d(tt2.input(x), tt2.input(w), v, kernel, dilation)));
    };
    CHECK(max_grad_rel_err(wrap_b, b) < 1e-6);
  }
}

TEST_CASE("gradient accumulates over shared subexpressions") {
  Mat x(1, 1);
  x << 2.0;
  Tape t;
  Var v = t.input(x, true);
  Var y = t.add(t.mul(v, v), v);  // x^2 + x -> dy/dx = 2x + 1 = 5
  t.backward(y);
  CHECK(t.grad_of(v)(0, 0) == doctest::Approx(5.0));
}

TEST_CASE("cosine_rows is 1 for parallel and 0 for orthogonal vectors") {
  Tape t;
  Mat a(1, 4), b(1, 4);
  a << 1, 0, 2, 0;
  b << 0, 3, 0, 1;
  Var ca = t.input(a), cb = t.input(b);
  CHECK(t.val(cosine_rows(t, ca, ca))(0, 0) == doctest::Approx(1.0));
  CHECK(t.val(cosine_rows(t, ca, cb))(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("clamp passes gradient only inside the active range") {
  Mat x(1, 3);
  x << 0.5, -2.0, 3.0;
  Tape t;
  Var v = t.input(x, true);
  Var y = t.sum_all(t.clamp(v, 0.0, 1.0));
  t.backward(y);
  Mat g = t.grad_of(v);
  CHECK(g(0, 0) == 1.0);
  CHECK(g(0, 1) == 0.0);
  CHECK(g(0, 2) == 0.0);
}

}  // TEST_SUITE
