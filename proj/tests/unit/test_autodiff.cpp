#include <doctest.h>

#include "gradcheck.hpp"
#include "pfss/autodiff.hpp"
#include "pfss/errors.hpp"

using namespace pfss::ad;
using testing::random_mat;

namespace {

// Builds out = op(inputs) on a fresh tape, reduces it with fixed weights and
// compares reverse-mode gradients of every input against central differences.
void check_op(std::vector<Parameter> inputs, const std::function<Var(Tape&, std::vector<Var>&)>& op,
              double tol = 1e-6) {
  Mat weights;
  auto forward = [&](bool record) {
    Tape t(record);
    std::vector<Var> vars;
    for (auto& p : inputs) vars.push_back(t.param(p));
    const Var out = op(t, vars);
    if (weights.size() == 0) {
      std::mt19937_64 gen(99);
      weights = random_mat(gen, static_cast<int>(t.value(out).rows()), static_cast<int>(t.value(out).cols()));
    }
    const Var loss = testing::weighted_sum(t, out, weights);
    if (record) t.backward(loss);
    return t.value(loss)(0, 0);
  };
  for (auto& p : inputs) p.zero_grad();
  forward(true);
  for (auto& p : inputs) {
    const Mat fd = testing::numeric_gradient(p, [&] { return forward(false); });
    INFO("input " << p.name);
    CHECK(testing::relative_error(p.grad, fd) < tol);
  }
}

Parameter rp(std::mt19937_64& gen, const char* name, int r, int c, double scale = 1.0) {
  return Parameter(name, random_mat(gen, r, c, scale));
}

}  // namespace

TEST_CASE("elementwise and matrix products") {
  std::mt19937_64 gen(1);
  check_op({rp(gen, "a", 3, 4), rp(gen, "b", 4, 2)}, [](Tape& t, auto& v) { return matmul(t, v[0], v[1]); });
  check_op({rp(gen, "a", 3, 4), rp(gen, "b", 5, 4)}, [](Tape& t, auto& v) { return matmul_nt(t, v[0], v[1]); });
  check_op({rp(gen, "a", 3, 4), rp(gen, "b", 3, 4)}, [](Tape& t, auto& v) { return add(t, v[0], v[1]); });
  check_op({rp(gen, "a", 3, 4), rp(gen, "b", 3, 4)}, [](Tape& t, auto& v) { return sub(t, v[0], v[1]); });
  check_op({rp(gen, "a", 3, 4), rp(gen, "b", 3, 4)}, [](Tape& t, auto& v) { return mul(t, v[0], v[1]); });
  check_op({rp(gen, "a", 3, 4)}, [](Tape& t, auto& v) { return scale(t, v[0], -2.5); });
  check_op({rp(gen, "a", 3, 4)}, [](Tape& t, auto& v) { return mul(t, v[0], v[0]); });
}

TEST_CASE("activations") {
  std::mt19937_64 gen(2);
  check_op({rp(gen, "a", 4, 5)}, [](Tape& t, auto& v) { return relu(t, v[0]); });
  check_op({rp(gen, "a", 4, 5, 3.0)}, [](Tape& t, auto& v) { return sigmoid(t, v[0]); });
  check_op({rp(gen, "a", 4, 5, 2.0)}, [](Tape& t, auto& v) { return tanh(t, v[0]); });
  check_op({rp(gen, "a", 3, 6, 2.0)}, [](Tape& t, auto& v) { return softmax_rows(t, v[0]); });
}

TEST_CASE("row gathering, segments, concatenation and slices") {
  std::mt19937_64 gen(3);
  check_op({rp(gen, "a", 4, 3)}, [](Tape& t, auto& v) { return gather_rows(t, v[0], {3, 0, 0, 2, 3, 3}); });
  for (Reduce mode : {Reduce::kMean, Reduce::kSum, Reduce::kMax})
    check_op({rp(gen, "a", 7, 3)}, [mode](Tape& t, auto& v) { return segment_reduce(t, v[0], {0, 2, 2, 7}, mode); });
  check_op({rp(gen, "a", 3, 2), rp(gen, "b", 3, 4)}, [](Tape& t, auto& v) {
    const Var parts[] = {v[0], v[1], v[0]};
    return concat_cols(t, parts);
  });
  check_op({rp(gen, "a", 2, 3), rp(gen, "b", 4, 3)}, [](Tape& t, auto& v) {
    const Var parts[] = {v[1], v[0]};
    return concat_rows(t, parts);
  });
  check_op({rp(gen, "a", 5, 6)}, [](Tape& t, auto& v) { return slice_cols(t, slice_rows(t, v[0], 1, 3), 2, 3); });
}

TEST_CASE("segment reduce values") {
  Tape t(false);
  Mat a(4, 2);
  a << 1, 5, 3, -1, 2, 2, 7, 0;
  const Var x = t.constant(a);
  const Mat mean = t.value(segment_reduce(t, x, {0, 3, 3, 4}, Reduce::kMean));
  CHECK(mean(0, 0) == doctest::Approx(2.0));
  CHECK(mean(1, 0) == 0.0);
  CHECK(mean(2, 1) == 0.0);
  const Mat mx = t.value(segment_reduce(t, x, {0, 3, 4}, Reduce::kMax));
  CHECK(mx(0, 0) == 3);
  CHECK(mx(0, 1) == 5);
}

TEST_CASE("normalizations") {
  std::mt19937_64 gen(4);
  auto gamma = [&] { return Parameter("gamma", Mat::Ones(1, 4) + random_mat(gen, 1, 4, 0.3)); };
  check_op({rp(gen, "x", 6, 4, 2.0), gamma(), rp(gen, "beta", 1, 4)},
           [](Tape& t, auto& v) { return batch_norm_train(t, v[0], v[1], v[2], 1e-5, nullptr); });
  check_op({rp(gen, "x", 5, 4, 2.0), gamma(), rp(gen, "beta", 1, 4)},
           [](Tape& t, auto& v) { return layer_norm(t, v[0], v[1], v[2], 1e-5); });
  const Eigen::RowVectorXd mean = random_mat(gen, 1, 4).row(0);
  const Eigen::RowVectorXd var = (Mat::Ones(1, 4) + random_mat(gen, 1, 4, 0.5)).row(0);
  check_op({rp(gen, "x", 5, 4, 2.0), gamma(), rp(gen, "beta", 1, 4)},
           [&](Tape& t, auto& v) { return batch_norm_eval(t, v[0], v[1], v[2], mean, var, 1e-5); });
}

TEST_CASE("batch norm statistics") {
  Tape t(false);
  Mat x(4, 2);
  x << 1, 10, 2, 10, 3, 10, 6, 10;
  BatchStats stats;
  const Mat y = t.value(batch_norm_train(t, t.constant(x), t.constant(Mat::Ones(1, 2)), t.constant(Mat::Zero(1, 2)),
                                         1e-5, &stats));
  CHECK(stats.mean(0) == doctest::Approx(3.0));
  CHECK(stats.var(0) == doctest::Approx(3.5));  // biased: (4 + 1 + 0 + 9) / 4
  CHECK(stats.var(1) == 0.0);
  CHECK(y.col(0).mean() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(y(0, 1) == 0.0);
}

TEST_CASE("fused attention and pointer logits") {
  std::mt19937_64 gen(5);
  const std::vector<int> qo{0, 3, 4, 6}, ko{0, 2, 5, 9};
  check_op({rp(gen, "q", 6, 4), rp(gen, "k", 9, 4), rp(gen, "v", 9, 4)},
           [&](Tape& t, auto& v) { return segmented_attention(t, v[0], v[1], v[2], qo, ko, 2); });
  check_op({rp(gen, "q", 6, 4, 2.0), rp(gen, "k", 9, 4, 2.0)},
           [&](Tape& t, auto& v) { return segmented_pointer_logits(t, v[0], v[1], qo, ko, 4, 10.0); });

  SUBCASE("matches per-group dense attention") {
    Tape t(false);
    const Mat q = random_mat(gen, 6, 4), k = random_mat(gen, 9, 4), v = random_mat(gen, 9, 4);
    const Mat out = t.value(segmented_attention(t, t.constant(q), t.constant(k), t.constant(v), qo, ko, 2));
    for (size_t g = 0; g + 1 < qo.size(); ++g)
      for (int r = qo[g]; r < qo[g + 1]; ++r)
        for (int h = 0; h < 2; ++h) {
          std::vector<double> w;
          double z = 0;
          for (int j = ko[g]; j < ko[g + 1]; ++j) {
            w.push_back(std::exp(q.row(r).segment(2 * h, 2).dot(k.row(j).segment(2 * h, 2)) / std::sqrt(2.0)));
            z += w.back();
          }
          for (int c = 0; c < 2; ++c) {
            double expect = 0;
            for (int j = ko[g]; j < ko[g + 1]; ++j) expect += w[j - ko[g]] / z * v(j, 2 * h + c);
            CHECK(out(r, 2 * h + c) == doctest::Approx(expect).epsilon(1e-12));
          }
        }
  }
  SUBCASE("pointer logits stay within the clip and pad with zeros") {
    Tape t(false);
    const Mat u = t.value(segmented_pointer_logits(t, t.constant(random_mat(gen, 6, 4, 50.0)),
                                                   t.constant(random_mat(gen, 9, 4, 50.0)), qo, ko, 4, 10.0));
    CHECK(u.cwiseAbs().maxCoeff() <= 10.0);
    CHECK(u(0, 2) == 0.0);
    CHECK(u(0, 3) == 0.0);
  }
}

TEST_CASE("masked negative log-likelihood") {
  std::mt19937_64 gen(6);
  Mask allowed(3, 4);
  allowed << 1, 1, 1, 1, 0, 1, 1, 0, 0, 0, 1, 0;
  check_op({rp(gen, "u", 3, 4, 3.0)}, [&](Tape& t, auto& v) {
    return masked_nll(t, v[0], allowed, {2, 1, 2});
  });

  SUBCASE("uniform logits cost log k per row") {
    Tape t(false);
    const Var l = masked_nll(t, t.constant(Mat::Zero(3, 4)), allowed, {0, 2, 2});
    CHECK(t.value(l)(0, 0) == doctest::Approx(std::log(4.0) + std::log(2.0) + 0.0));
  }
  SUBCASE("masked target is a data error") {
    Tape t(false);
    CHECK_THROWS_AS(masked_nll(t, t.constant(Mat::Zero(3, 4)), allowed, {0, 0, 2}), pfss::DataError);
  }
  SUBCASE("masked softmax zeroes masked entries exactly") {
    const Mat p = masked_softmax(random_mat(gen, 3, 4, 5.0), allowed);
    CHECK(p(1, 0) == 0.0);
    CHECK(p(2, 2) == 1.0);
    for (int r = 0; r < 3; ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-14));
    Mask none = Mask::Zero(1, 2);
    CHECK_THROWS_AS(masked_softmax(Mat::Zero(1, 2), none), pfss::ValidationError);
  }
}

TEST_CASE("tape bookkeeping") {
  Parameter p("p", Mat::Constant(2, 2, 1.5));
  SUBCASE("gradients accumulate across backward calls") {
    for (int k = 0; k < 2; ++k) {
      Tape t;
      const Var x = t.param(p);
      t.backward(testing::weighted_sum(t, x, Mat::Ones(2, 2)));
    }
    CHECK(p.grad(0, 0) == 2.0);
    p.zero_grad();
    CHECK(p.grad.isZero());
  }
  SUBCASE("non-recording tapes leave gradients alone") {
    Tape t(false);
    const Var x = t.param(p);
    CHECK_FALSE(t.requires_grad(x));
    CHECK_FALSE(t.requires_grad(relu(t, x)));
  }
  SUBCASE("constants do not require gradients") {
    Tape t;
    const Var c = t.constant(Mat::Ones(2, 2));
    CHECK_FALSE(t.requires_grad(add(t, c, c)));
    CHECK(t.requires_grad(add(t, c, t.param(p))));
    CHECK_THROWS_AS(t.backward(c), pfss::ValidationError);
  }
}
