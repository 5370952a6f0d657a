#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation as a node holding its value and a backward
// closure. Rows are items (nodes, edges, decode steps), columns are features.
// Parameters live outside the tape; Tape::param copies the value in and
// backward() accumulates into Parameter::grad.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pfss::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v) : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct Var {
  int id = -1;
};

class Tape {
 public:
  // Called with the node's own id; reads upstream(self), accumulates into inputs.
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(bool record = true) : record_(record) { nodes_.reserve(256); }

  bool recording() const { return record_; }
  Var constant(Mat value);
  // While recording, gradients reaching this node are added to p.grad.
  Var param(const Parameter& p);

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  // Gradient accumulated so far (zero matrix if none reached the node).
  Mat grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Seeds d(loss)/d(loss) = 1 for a 1x1 loss and runs all closures in reverse.
  void backward(Var loss);

  // For op implementations: appends a node whose gradient flows to `inputs`.
  Var push(Mat value, std::initializer_list<Var> inputs, Backward backward);
  Var push(Mat value, std::span<const Var> inputs, Backward backward);
  // Mutable gradient buffer of v, allocated as zeros on first use.
  Mat& grad_buffer(Var v);
  const Mat& upstream(int id) const { return nodes_[id].grad; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    bool requires_grad = false;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
  bool record_;
};

enum class Reduce { kMean, kSum, kMax };

Var matmul(Tape& t, Var a, Var b);     // a * b
Var matmul_nt(Tape& t, Var a, Var b);  // a * b^T
inline Var linear(Tape& t, Var x, Var w) { return matmul_nt(t, x, w); }
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);  // elementwise
Var scale(Tape& t, Var a, double c);
Var relu(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
Var tanh(Tape& t, Var a);

// out.row(r) = a.row(index[r])
Var gather_rows(Tape& t, Var a, std::vector<int> index);
// out.row(s) = reduce of a.rows(offsets[s] .. offsets[s+1]); empty segments give zeros.
Var segment_reduce(Tape& t, Var a, std::vector<int> offsets, Reduce mode);
Var concat_cols(Tape& t, std::span<const Var> parts);
Var concat_rows(Tape& t, std::span<const Var> parts);
Var slice_cols(Tape& t, Var a, int start, int count);
Var slice_rows(Tape& t, Var a, int start, int count);
Var softmax_rows(Tape& t, Var a);

// Normalises each column over all rows. With running statistics supplied
// (eval mode) those are used instead of batch statistics.
struct BatchStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd var;  // biased variance of the batch
};
Var batch_norm_train(Tape& t, Var x, Var gamma, Var beta, double eps, BatchStats* stats_out);
Var batch_norm_eval(Tape& t, Var x, Var gamma, Var beta, const Eigen::RowVectorXd& running_mean,
                    const Eigen::RowVectorXd& running_var, double eps);
// Normalises each row over its columns.
Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps);

// Sum over rows of -log softmax(logits.row(r))[targets[r]], softmax taken over
// entries with allowed(r, j) != 0. Returns a 1x1 node.
using Mask = Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
Var masked_nll(Tape& t, Var logits, const Mask& allowed, std::vector<int> targets);

// Per-group multi-head attention. Group g pairs query rows
// [query_offsets[g], query_offsets[g+1]) with key/value rows
// [key_offsets[g], key_offsets[g+1]); heads split the columns evenly and
// scores are scaled by 1/sqrt(columns per head). Output has q's shape.
Var segmented_attention(Tape& t, Var q, Var k, Var v, std::vector<int> query_offsets, std::vector<int> key_offsets,
                        int heads);
// out(r, j) = clip * tanh(q.row(r) . k.row(key_offsets[g] + j) / sqrt(cols)) for
// row r in group g and j < group size; columns beyond the group size are 0.
Var segmented_pointer_logits(Tape& t, Var q, Var k, std::vector<int> query_offsets, std::vector<int> key_offsets,
                             int width, double clip);

// Row-wise masked softmax of plain values: masked entries get exactly 0.
Mat masked_softmax(const Mat& logits, const Mask& allowed);

}  // namespace pfss::ad
