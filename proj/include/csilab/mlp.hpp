#pragma once

// Small fully connected classifier/regressor with exact gradients.

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "csilab/common.hpp"
#include "csilab/rng.hpp"

namespace csilab {

// kSoftmax emits a probability vector over codeword indices, kLogSpectrum a
// raw real vector interpreted as a log angular power spectrum.
enum class OutputHead { kSoftmax, kLogSpectrum };

struct MlpModel {
  std::vector<int> layer_dims;  // [d_in, hidden..., d_out]
  std::vector<MatR> weights;    // weights[l] maps dims[l] -> dims[l+1]
  std::vector<VecR> biases;
  OutputHead head = OutputHead::kSoftmax;

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
      n += static_cast<std::size_t>(weights[l].size()) + biases[l].size();
    return n;
  }
};

inline MlpModel make_mlp(std::vector<int> layer_dims, OutputHead head, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw std::invalid_argument("make_mlp: need at least two layer dims");
  for (int d : layer_dims)
    if (d < 1) throw std::invalid_argument("make_mlp: layer dims must be positive");
  MlpModel m;
  m.layer_dims = std::move(layer_dims);
  m.head = head;
  Rng rng(derive_seed(seed, 0x6d6c70));
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    const int fan_in = m.layer_dims[l];
    const int fan_out = m.layer_dims[l + 1];
    MatR w(fan_out, fan_in);
    const double scale = std::sqrt(2.0 / fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) w(i, j) = scale * rng.normal();
    m.weights.push_back(std::move(w));
    m.biases.push_back(VecR::Zero(fan_out));
  }
  return m;
}

namespace detail {

inline VecR softmax(const VecR& logits) {
  const VecR shifted = logits.array() - logits.maxCoeff();
  VecR p = shifted.array().exp();
  return p / p.sum();
}

// Row-wise stable softmax for a batch of logits.
inline MatR softmax_rows(const MatR& logits) {
  MatR p = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
  const VecR row_sums = p.rowwise().sum();
  p.array().colwise() /= row_sums.array();
  return p;
}

struct MlpTrace {
  std::vector<MatR> activations;  // activations[0] = input batch, one per layer after
  MatR logits;                    // pre-head output
};

inline MlpTrace mlp_forward_batch(const MlpModel& m, const MatR& x) {
  if (x.cols() != m.input_dim()) throw std::invalid_argument("mlp_forward: input width mismatch");
  if (!x.allFinite()) throw DegenerateInputError("mlp_forward: non-finite input");
  MlpTrace tr;
  tr.activations.push_back(x);
  MatR a = x;
  for (int l = 0; l < m.num_layers(); ++l) {
    MatR z = (a * m.weights[l].transpose()).rowwise() + m.biases[l].transpose();
    if (l + 1 < m.num_layers()) {
      a = z.cwiseMax(0.0);
      tr.activations.push_back(a);
    } else {
      tr.logits = std::move(z);
    }
  }
  return tr;
}

}  // namespace detail

inline VecR mlp_forward(const MlpModel& m, const VecR& x) {
  const detail::MlpTrace tr = detail::mlp_forward_batch(m, x.transpose());
  VecR logits = tr.logits.row(0).transpose();
  return m.head == OutputHead::kSoftmax ? detail::softmax(logits) : logits;
}

inline MatR mlp_forward_batch(const MlpModel& m, const MatR& x) {
  const detail::MlpTrace tr = detail::mlp_forward_batch(m, x);
  return m.head == OutputHead::kSoftmax ? detail::softmax_rows(tr.logits) : tr.logits;
}

inline std::vector<int> predict_topk(const MlpModel& m, const VecR& x, int k) {
  const int kk = m.output_dim();
  if (k < 1 || k > kk) throw std::invalid_argument("predict_topk: k out of range");
  const VecR p = mlp_forward(m, x);
  std::vector<int> order(kk);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });
  order.resize(k);
  return order;
}

struct MlpGradients {
  std::vector<MatR> weights;
  std::vector<VecR> biases;
  double loss = 0.0;
};

namespace detail {

inline void check_labels(const std::vector<int>& labels, int num_classes) {
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw std::out_of_range("label out of range");
}

inline double ce_loss_rows(const MatR& logits, const std::vector<int>& labels) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    loss += lse - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  return loss / static_cast<double>(logits.rows());
}

// Shared backward pass: dlogits is d(loss)/d(pre-head output), already
// normalized by the batch.
inline MlpGradients mlp_backward(const MlpModel& m, const MlpTrace& tr, MatR dlogits,
                                 double loss) {
  MlpGradients g;
  g.loss = loss;
  g.weights.resize(m.num_layers());
  g.biases.resize(m.num_layers());
  MatR delta = std::move(dlogits);
  for (int l = m.num_layers() - 1; l >= 0; --l) {
    g.weights[l] = delta.transpose() * tr.activations[static_cast<std::size_t>(l)];
    g.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      MatR da = delta * m.weights[l];
      delta = da.array() * (tr.activations[static_cast<std::size_t>(l)].array() > 0.0).cast<double>();
    }
  }
  return g;
}

}  // namespace detail

// Mean cross-entropy over the batch (softmax head).
inline double mlp_loss(const MlpModel& m, const MatR& x, const std::vector<int>& labels) {
  if (x.rows() == 0) throw std::invalid_argument("mlp_loss: empty batch");
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw std::invalid_argument("mlp_loss: label count mismatch");
  detail::check_labels(labels, m.output_dim());
  const detail::MlpTrace tr = detail::mlp_forward_batch(m, x);
  return detail::ce_loss_rows(tr.logits, labels);
}

// Mean squared error per output coordinate (spectrum head; targets are raw).
inline double mlp_loss(const MlpModel& m, const MatR& x, const MatR& targets) {
  if (x.rows() == 0) throw std::invalid_argument("mlp_loss: empty batch");
  if (targets.rows() != x.rows() || targets.cols() != m.output_dim())
    throw std::invalid_argument("mlp_loss: target shape mismatch");
  const detail::MlpTrace tr = detail::mlp_forward_batch(m, x);
  return (tr.logits - targets).squaredNorm() / static_cast<double>(targets.size());
}

inline MlpGradients mlp_gradients(const MlpModel& m, const MatR& x,
                                  const std::vector<int>& labels) {
  if (x.rows() == 0) throw std::invalid_argument("mlp_gradients: empty batch");
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw std::invalid_argument("mlp_gradients: label count mismatch");
  detail::check_labels(labels, m.output_dim());
  const detail::MlpTrace tr = detail::mlp_forward_batch(m, x);
  const double loss = detail::ce_loss_rows(tr.logits, labels);
  MatR dlogits = detail::softmax_rows(tr.logits);
  for (Eigen::Index i = 0; i < x.rows(); ++i) dlogits(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  dlogits /= static_cast<double>(x.rows());
  return detail::mlp_backward(m, tr, std::move(dlogits), loss);
}

inline MlpGradients mlp_gradients(const MlpModel& m, const MatR& x, const MatR& targets) {
  if (x.rows() == 0) throw std::invalid_argument("mlp_gradients: empty batch");
  if (targets.rows() != x.rows() || targets.cols() != m.output_dim())
    throw std::invalid_argument("mlp_gradients: target shape mismatch");
  const detail::MlpTrace tr = detail::mlp_forward_batch(m, x);
  const MatR resid = tr.logits - targets;
  const double loss = resid.squaredNorm() / static_cast<double>(targets.size());
  MatR dlogits = 2.0 * resid / static_cast<double>(targets.size());
  return detail::mlp_backward(m, tr, std::move(dlogits), loss);
}

// Flattened parameter access, row-major weights then bias per layer.
inline VecR mlp_pack(const MlpModel& m) {
  VecR v(static_cast<Eigen::Index>(m.num_params()));
  Eigen::Index at = 0;
  for (int l = 0; l < m.num_layers(); ++l) {
    const MatR& w = m.weights[static_cast<std::size_t>(l)];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) v[at++] = w(i, j);
    const VecR& b = m.biases[static_cast<std::size_t>(l)];
    v.segment(at, b.size()) = b;
    at += b.size();
  }
  return v;
}

inline void mlp_unpack(MlpModel& m, const VecR& v) {
  if (v.size() != static_cast<Eigen::Index>(m.num_params()))
    throw std::invalid_argument("mlp_unpack: size mismatch");
  Eigen::Index at = 0;
  for (int l = 0; l < m.num_layers(); ++l) {
    MatR& w = m.weights[static_cast<std::size_t>(l)];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = v[at++];
    VecR& b = m.biases[static_cast<std::size_t>(l)];
    b = v.segment(at, b.size());
    at += b.size();
  }
}

inline VecR mlp_pack_gradients(const MlpModel& m, const MlpGradients& g) {
  MlpModel shell = m;
  shell.weights = g.weights;
  shell.biases = g.biases;
  return mlp_pack(shell);
}

}  // namespace csilab
