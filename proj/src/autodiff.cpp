#include "pfss/autodiff.hpp"

#include <cmath>
#include <limits>

#include "pfss/errors.hpp"

namespace pfss::ad {

Var Tape::constant(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat(), nullptr, false, nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const Parameter& p) {
  nodes_.push_back(Node{p.value, Mat(), nullptr, record_, record_ ? const_cast<Parameter*>(&p) : nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Mat Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Mat& Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::push(Mat value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  if (record_)
    for (Var v : inputs) needs = needs || nodes_[v.id].requires_grad;
  nodes_.push_back(Node{std::move(value), Mat(), needs ? std::move(backward) : nullptr, needs, nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Mat value, std::initializer_list<Var> inputs, Backward backward) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) throw ValidationError("backward() needs a scalar loss");
  grad_buffer(loss)(0, 0) += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param) n.param->grad += n.grad;
  }
}

namespace {
// Accumulates only into inputs that take part in differentiation.
inline bool wants(Tape& t, Var v) { return t.requires_grad(v); }
}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  Mat out = t.value(a) * t.value(b);
  return t.push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.upstream(self);
    if (wants(t, a)) t.grad_buffer(a).noalias() += g * t.value(b).transpose();
    if (wants(t, b)) t.grad_buffer(b).noalias() += t.value(a).transpose() * g;
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  Mat out = t.value(a) * t.value(b).transpose();
  return t.push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.upstream(self);
    if (wants(t, a)) t.grad_buffer(a).noalias() += g * t.value(b);
    if (wants(t, b)) t.grad_buffer(b).noalias() += g.transpose() * t.value(a);
  });
}

Var add(Tape& t, Var a, Var b) {
  Mat out = t.value(a) + t.value(b);
  return t.push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.upstream(self);
    if (wants(t, a)) t.grad_buffer(a) += g;
    if (wants(t, b)) t.grad_buffer(b) += g;
  });
}

Var sub(Tape& t, Var a, Var b) {
  Mat out = t.value(a) - t.value(b);
  return t.push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.upstream(self);
    if (wants(t, a)) t.grad_buffer(a) += g;
    if (wants(t, b)) t.grad_buffer(b) -= g;
  });
}

Var mul(Tape& t, Var a, Var b) {
  Mat out = t.value(a).cwiseProduct(t.value(b));
  return t.push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.upstream(self);
    if (wants(t, a)) t.grad_buffer(a) += g.cwiseProduct(t.value(b));
    if (wants(t, b)) t.grad_buffer(b) += g.cwiseProduct(t.value(a));
  });
}

Var scale(Tape& t, Var a, double c) {
  Mat out = t.value(a) * c;
  return t.push(std::move(out), {a}, [a, c](Tape& t, int self) { t.grad_buffer(a) += t.upstream(self) * c; });
}

Var relu(Tape& t, Var a) {
  Mat out = t.value(a).cwiseMax(0.0);
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    const Mat& x = t.value(a);
    t.grad_buffer(a) += (x.array() > 0.0).select(t.upstream(self), 0.0);
  });
}

Var sigmoid(Tape& t, Var a) {
  Mat out = (1.0 / (1.0 + (-t.value(a).array()).exp())).matrix();
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    const Mat& s = t.value(Var{self});
    t.grad_buffer(a).array() += t.upstream(self).array() * s.array() * (1.0 - s.array());
  });
}

Var tanh(Tape& t, Var a) {
  Mat out = t.value(a).array().tanh().matrix();
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    const Mat& y = t.value(Var{self});
    t.grad_buffer(a).array() += t.upstream(self).array() * (1.0 - y.array().square());
  });
}

Var gather_rows(Tape& t, Var a, std::vector<int> index) {
  const Mat& src = t.value(a);
  Mat out(static_cast<Eigen::Index>(index.size()), src.cols());
  for (size_t r = 0; r < index.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = src.row(index[r]);
  return t.push(std::move(out), {a}, [a, index = std::move(index)](Tape& t, int self) {
    const Mat& g = t.upstream(self);
    Mat& ga = t.grad_buffer(a);
    for (size_t r = 0; r < index.size(); ++r) ga.row(index[r]) += g.row(static_cast<Eigen::Index>(r));
  });
}

Var segment_reduce(Tape& t, Var a, std::vector<int> offsets, Reduce mode) {
  const Mat& src = t.value(a);
  const Eigen::Index segments = static_cast<Eigen::Index>(offsets.size()) - 1;
  Mat out = Mat::Zero(segments, src.cols());
  std::vector<int> argmax;
  if (mode == Reduce::kMax) argmax.assign(static_cast<size_t>(segments * src.cols()), -1);
  for (Eigen::Index s = 0; s < segments; ++s) {
    const int lo = offsets[s];
    const int cnt = offsets[s + 1] - lo;
    if (cnt == 0) continue;
    if (mode == Reduce::kMax) {
      for (Eigen::Index c = 0; c < src.cols(); ++c) {
        int best = lo;
        for (int r = lo + 1; r < lo + cnt; ++r)
          if (src(r, c) > src(best, c)) best = r;
        out(s, c) = src(best, c);
        argmax[static_cast<size_t>(s * src.cols() + c)] = best;
      }
    } else {
      out.row(s) = src.middleRows(lo, cnt).colwise().sum();
      if (mode == Reduce::kMean) out.row(s) /= static_cast<double>(cnt);
    }
  }
  return t.push(std::move(out), {a},
                [a, offsets = std::move(offsets), mode, argmax = std::move(argmax)](Tape& t, int self) {
                  const Mat& g = t.upstream(self);
                  Mat& ga = t.grad_buffer(a);
                  const Eigen::Index segments = static_cast<Eigen::Index>(offsets.size()) - 1;
                  for (Eigen::Index s = 0; s < segments; ++s) {
                    const int lo = offsets[s];
                    const int cnt = offsets[s + 1] - lo;
                    if (cnt == 0) continue;
                    if (mode == Reduce::kMax) {
                      for (Eigen::Index c = 0; c < g.cols(); ++c)
                        ga(argmax[static_cast<size_t>(s * g.cols() + c)], c) += g(s, c);
                    } else {
                      const double w = mode == Reduce::kMean ? 1.0 / cnt : 1.0;
                      ga.middleRows(lo, cnt).rowwise() += g.row(s) * w;
                    }
                  }
                });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  Eigen::Index rows = t.value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (t.value(p).rows() != rows) throw ValidationError("concat_cols: row mismatch");
    cols += t.value(p).cols();
  }
  Mat out(rows, cols);
  std::vector<Var> in(parts.begin(), parts.end());
  Eigen::Index c = 0;
  for (Var p : in) {
    out.middleCols(c, t.value(p).cols()) = t.value(p);
    c += t.value(p).cols();
  }
  return t.push(std::move(out), std::span<const Var>(in), [in](Tape& t, int self) {
    const Mat& g = t.upstream(self);
    Eigen::Index c = 0;
    for (Var p : in) {
      const Eigen::Index w = t.value(p).cols();
      if (wants(t, p)) t.grad_buffer(p) += g.middleCols(c, w);
      c += w;
    }
  });
}

Var concat_rows(Tape& t, std::span<const Var> parts) {
  Eigen::Index cols = t.value(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    if (t.value(p).cols() != cols) throw ValidationError("concat_rows: column mismatch");
    rows += t.value(p).rows();
  }
  Mat out(rows, cols);
  std::vector<Var> in(parts.begin(), parts.end());
  Eigen::Index r = 0;
  for (Var p : in) {
    out.middleRows(r, t.value(p).rows()) = t.value(p);
    r += t.value(p).rows();
  }
  return t.push(std::move(out), std::span<const Var>(in), [in](Tape& t, int self) {
    const Mat& g = t.upstream(self);
    Eigen::Index r = 0;
    for (Var p : in) {
      const Eigen::Index h = t.value(p).rows();
      if (wants(t, p)) t.grad_buffer(p) += g.middleRows(r, h);
      r += h;
    }
  });
}

Var slice_cols(Tape& t, Var a, int start, int count) {
  Mat out = t.value(a).middleCols(start, count);
  return t.push(std::move(out), {a}, [a, start, count](Tape& t, int self) {
    t.grad_buffer(a).middleCols(start, count) += t.upstream(self);
  });
}

Var slice_rows(Tape& t, Var a, int start, int count) {
  Mat out = t.value(a).middleRows(start, count);
  return t.push(std::move(out), {a}, [a, start, count](Tape& t, int self) {
    t.grad_buffer(a).middleRows(start, count) += t.upstream(self);
  });
}

Var softmax_rows(Tape& t, Var a) {
  const Mat& x = t.value(a);
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    const Mat& p = t.value(Var{self});
    const Mat& g = t.upstream(self);
    const Eigen::VectorXd dot = g.cwiseProduct(p).rowwise().sum();
    t.grad_buffer(a).array() += p.array() * (g.colwise() - dot).array();
  });
}

namespace {

// Shared backward of x_hat = (x - mean) * inv_std along one axis, where the
// statistics depend on x. `cols` selects column-wise (batch) statistics.
void norm_backward(const Mat& dxhat, const Mat& xhat, const Eigen::RowVectorXd& inv_std_cols,
                   const Eigen::VectorXd& inv_std_rows, bool cols, Mat& dx) {
  if (cols) {
    const double N = static_cast<double>(dxhat.rows());
    const Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
    const Eigen::RowVectorXd sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
    Mat term = (dxhat * N).rowwise() - sum_d;
    term -= xhat.array().rowwise().operator*(sum_dx.array()).matrix();
    dx.array() += (term.array().rowwise() * (inv_std_cols.array() / N));
  } else {
    const double D = static_cast<double>(dxhat.cols());
    const Eigen::VectorXd sum_d = dxhat.rowwise().sum();
    const Eigen::VectorXd sum_dx = dxhat.cwiseProduct(xhat).rowwise().sum();
    Mat term = (dxhat * D).colwise() - sum_d;
    term -= (xhat.array().colwise() * sum_dx.array()).matrix();
    dx.array() += term.array().colwise() * (inv_std_rows.array() / D);
  }
}

Var affine(Tape& t, Mat xhat, Var x, Var gamma, Var beta, std::function<void(Tape&, const Mat&, const Mat&)> dx_fn) {
  const Eigen::RowVectorXd g = t.value(gamma).row(0);
  const Eigen::RowVectorXd b = t.value(beta).row(0);
  Mat out = (xhat.array().rowwise() * g.array()).rowwise() + b.array();
  return t.push(std::move(out), {x, gamma, beta},
                [x, gamma, beta, xhat = std::move(xhat), dx_fn = std::move(dx_fn)](Tape& t, int self) {
                  const Mat& dy = t.upstream(self);
                  if (wants(t, beta)) t.grad_buffer(beta).row(0) += dy.colwise().sum();
                  if (wants(t, gamma)) t.grad_buffer(gamma).row(0) += dy.cwiseProduct(xhat).colwise().sum();
                  if (wants(t, x)) {
                    const Eigen::RowVectorXd gv = t.value(gamma).row(0);
                    Mat dxhat = dy.array().rowwise() * gv.array();
                    dx_fn(t, dxhat, xhat);
                  }
                });
}

}  // namespace

Var batch_norm_train(Tape& t, Var x, Var gamma, Var beta, double eps, BatchStats* stats_out) {
  const Mat& v = t.value(x);
  const Eigen::RowVectorXd mean = v.colwise().mean();
  const Mat centered = v.rowwise() - mean;
  const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
  const Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt();
  Mat xhat = centered.array().rowwise() * inv_std.array();
  if (stats_out) *stats_out = BatchStats{mean, var};
  return affine(t, std::move(xhat), x, gamma, beta, [x, inv_std](Tape& t, const Mat& dxhat, const Mat& xhat) {
    norm_backward(dxhat, xhat, inv_std, Eigen::VectorXd(), true, t.grad_buffer(x));
  });
}

Var batch_norm_eval(Tape& t, Var x, Var gamma, Var beta, const Eigen::RowVectorXd& running_mean,
                    const Eigen::RowVectorXd& running_var, double eps) {
  const Eigen::RowVectorXd inv_std = (running_var.array() + eps).rsqrt();
  Mat xhat = (t.value(x).rowwise() - running_mean).array().rowwise() * inv_std.array();
  return affine(t, std::move(xhat), x, gamma, beta, [x, inv_std](Tape& t, const Mat& dxhat, const Mat&) {
    t.grad_buffer(x).array() += dxhat.array().rowwise() * inv_std.array();
  });
}

Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps) {
  const Mat& v = t.value(x);
  const Eigen::VectorXd mean = v.rowwise().mean();
  const Mat centered = v.colwise() - mean;
  const Eigen::VectorXd var = centered.array().square().rowwise().mean();
  const Eigen::VectorXd inv_std = (var.array() + eps).rsqrt();
  Mat xhat = centered.array().colwise() * inv_std.array();
  return affine(t, std::move(xhat), x, gamma, beta, [x, inv_std](Tape& t, const Mat& dxhat, const Mat& xhat) {
    norm_backward(dxhat, xhat, Eigen::RowVectorXd(), inv_std, false, t.grad_buffer(x));
  });
}

Var masked_nll(Tape& t, Var logits, const Mask& allowed, std::vector<int> targets) {
  const Mat& u = t.value(logits);
  if (allowed.rows() != u.rows() || allowed.cols() != u.cols() || static_cast<Eigen::Index>(targets.size()) != u.rows())
    throw ValidationError("masked_nll: shape mismatch");
  Mat probs = Mat::Zero(u.rows(), u.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    const int target = targets[r];
    if (target < 0 || target >= u.cols() || !allowed(r, target))
      throw DataError("target action " + std::to_string(target) + " is masked at decode step " + std::to_string(r));
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < u.cols(); ++c)
      if (allowed(r, c)) mx = std::max(mx, u(r, c));
    double z = 0.0;
    for (Eigen::Index c = 0; c < u.cols(); ++c)
      if (allowed(r, c)) z += (probs(r, c) = std::exp(u(r, c) - mx));
    probs.row(r) /= z;
    loss += (mx + std::log(z)) - u(r, target);
  }
  Mat out(1, 1);
  out(0, 0) = loss;
  return t.push(std::move(out), {logits}, [logits, probs = std::move(probs), targets = std::move(targets)](Tape& t, int self) {
    const double g = t.upstream(self)(0, 0);
    Mat& gl = t.grad_buffer(logits);
    gl += probs * g;
    for (size_t r = 0; r < targets.size(); ++r) gl(static_cast<Eigen::Index>(r), targets[r]) -= g;
  });
}

Var segmented_attention(Tape& t, Var q, Var k, Var v, std::vector<int> query_offsets, std::vector<int> key_offsets,
                        int heads) {
  const Mat& Q = t.value(q);
  const Mat& K = t.value(k);
  const Mat& V = t.value(v);
  if (Q.cols() != K.cols() || K.cols() != V.cols() || K.rows() != V.rows() || Q.cols() % heads != 0)
    throw ValidationError("segmented_attention: shape mismatch");
  const int dh = static_cast<int>(Q.cols()) / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  const size_t groups = query_offsets.size() - 1;
  Mat out = Mat::Zero(Q.rows(), Q.cols());
  std::vector<Mat> weights(groups * heads);
  for (size_t g = 0; g < groups; ++g) {
    const int q0 = query_offsets[g], qn = query_offsets[g + 1] - q0;
    const int k0 = key_offsets[g], kn = key_offsets[g + 1] - k0;
    if (qn == 0) continue;
    for (int h = 0; h < heads; ++h) {
      Mat a = Q.block(q0, h * dh, qn, dh) * K.block(k0, h * dh, kn, dh).transpose() * s;
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        a.row(r) = (a.row(r).array() - a.row(r).maxCoeff()).exp().matrix();
        a.row(r) /= a.row(r).sum();
      }
      out.block(q0, h * dh, qn, dh).noalias() = a * V.block(k0, h * dh, kn, dh);
      weights[g * heads + h] = std::move(a);
    }
  }
  return t.push(std::move(out), {q, k, v},
                [q, k, v, qo = std::move(query_offsets), ko = std::move(key_offsets), heads, dh, s,
                 weights = std::move(weights)](Tape& t, int self) {
                  const Mat& G = t.upstream(self);
                  const Mat& Q = t.value(q);
                  const Mat& K = t.value(k);
                  const Mat& V = t.value(v);
                  Mat dQ = Mat::Zero(Q.rows(), Q.cols());
                  Mat dK = Mat::Zero(K.rows(), K.cols());
                  Mat dV = Mat::Zero(V.rows(), V.cols());
                  for (size_t g = 0; g + 1 < qo.size(); ++g) {
                    const int q0 = qo[g], qn = qo[g + 1] - q0;
                    const int k0 = ko[g], kn = ko[g + 1] - k0;
                    if (qn == 0) continue;
                    for (int h = 0; h < heads; ++h) {
                      const Mat& a = weights[g * heads + h];
                      const Mat go = G.block(q0, h * dh, qn, dh);
                      dV.block(k0, h * dh, kn, dh).noalias() += a.transpose() * go;
                      const Mat da = go * V.block(k0, h * dh, kn, dh).transpose();
                      const Eigen::VectorXd dot = da.cwiseProduct(a).rowwise().sum();
                      const Mat ds = (a.array() * (da.colwise() - dot).array()).matrix() * s;
                      dQ.block(q0, h * dh, qn, dh).noalias() += ds * K.block(k0, h * dh, kn, dh);
                      dK.block(k0, h * dh, kn, dh).noalias() += ds.transpose() * Q.block(q0, h * dh, qn, dh);
                    }
                  }
                  if (t.requires_grad(q)) t.grad_buffer(q) += dQ;
                  if (t.requires_grad(k)) t.grad_buffer(k) += dK;
                  if (t.requires_grad(v)) t.grad_buffer(v) += dV;
                });
}

Var segmented_pointer_logits(Tape& t, Var q, Var k, std::vector<int> query_offsets, std::vector<int> key_offsets,
                             int width, double clip) {
  const Mat& Q = t.value(q);
  const Mat& K = t.value(k);
  if (Q.cols() != K.cols()) throw ValidationError("segmented_pointer_logits: shape mismatch");
  const double s = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
  Mat out = Mat::Zero(Q.rows(), width);
  for (size_t g = 0; g + 1 < query_offsets.size(); ++g) {
    const int q0 = query_offsets[g], qn = query_offsets[g + 1] - q0;
    const int k0 = key_offsets[g], kn = key_offsets[g + 1] - k0;
    if (kn > width) throw ValidationError("segmented_pointer_logits: group wider than output");
    if (qn == 0) continue;
    out.block(q0, 0, qn, kn) =
        ((Q.middleRows(q0, qn) * K.middleRows(k0, kn).transpose()) * s).array().tanh().matrix() * clip;
  }
  return t.push(std::move(out), {q, k},
                [q, k, qo = std::move(query_offsets), ko = std::move(key_offsets), s, clip](Tape& t, int self) {
                  const Mat& G = t.upstream(self);
                  const Mat& U = t.value(Var{self});
                  const Mat& Q = t.value(q);
                  const Mat& K = t.value(k);
                  Mat dQ = Mat::Zero(Q.rows(), Q.cols());
                  Mat dK = Mat::Zero(K.rows(), K.cols());
                  for (size_t g = 0; g + 1 < qo.size(); ++g) {
                    const int q0 = qo[g], qn = qo[g + 1] - q0;
                    const int k0 = ko[g], kn = ko[g + 1] - k0;
                    if (qn == 0) continue;
                    const auto y = U.block(q0, 0, qn, kn).array() / clip;
                    const Mat dz = (G.block(q0, 0, qn, kn).array() * clip * (1.0 - y.square()) * s).matrix();
                    dQ.middleRows(q0, qn).noalias() += dz * K.middleRows(k0, kn);
                    dK.middleRows(k0, kn).noalias() += dz.transpose() * Q.middleRows(q0, qn);
                  }
                  if (t.requires_grad(q)) t.grad_buffer(q) += dQ;
                  if (t.requires_grad(k)) t.grad_buffer(k) += dK;
                });
}

Mat masked_softmax(const Mat& logits, const Mask& allowed) {
  Mat p = Mat::Zero(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      if (allowed(r, c)) mx = std::max(mx, logits(r, c));
    if (!std::isfinite(mx)) throw ValidationError("masked_softmax: every entry of a row is masked");
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      if (allowed(r, c)) z += (p(r, c) = std::exp(logits(r, c) - mx));
    p.row(r) /= z;
  }
  return p;
}

}  // namespace pfss::ad
