#pragma once

// Gated recurrent encoder-decoder with decoder output feedback and exact
// backpropagation through time.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "csilab/common.hpp"
#include "csilab/mlp.hpp"
#include "csilab/rng.hpp"

namespace csilab {

struct GruCell {
  int input_dim = 0;
  int hidden_dim = 0;
  MatR wz, wr, wn;  // hidden x input
  MatR uz, ur, un;  // hidden x hidden
  VecR bz, br, bn;

  std::size_t num_params() const {
    return 3 * static_cast<std::size_t>(hidden_dim) * (input_dim + hidden_dim + 1);
  }
};

struct GruSeq2Seq {
  GruCell encoder;  // consumes feature vectors
  GruCell decoder;  // consumes its own previous output
  MatR w_out;       // output_dim x hidden
  VecR b_out;
  OutputHead head = OutputHead::kSoftmax;

  int feature_dim() const { return encoder.input_dim; }
  int hidden_dim() const { return encoder.hidden_dim; }
  int output_dim() const { return static_cast<int>(w_out.rows()); }
  std::size_t num_params() const {
    return encoder.num_params() + decoder.num_params() +
           static_cast<std::size_t>(w_out.size()) + static_cast<std::size_t>(b_out.size());
  }
};

namespace detail {

inline GruCell make_gru_cell(int input_dim, int hidden_dim, Rng& rng) {
  GruCell c;
  c.input_dim = input_dim;
  c.hidden_dim = hidden_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  const auto mat = [&](int rows, int cols) {
    MatR m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    return m;
  };
  c.wz = mat(hidden_dim, input_dim);
  c.wr = mat(hidden_dim, input_dim);
  c.wn = mat(hidden_dim, input_dim);
  c.uz = mat(hidden_dim, hidden_dim);
  c.ur = mat(hidden_dim, hidden_dim);
  c.un = mat(hidden_dim, hidden_dim);
  c.bz = VecR::Zero(hidden_dim);
  c.br = VecR::Zero(hidden_dim);
  c.bn = VecR::Zero(hidden_dim);
  return c;
}

}  // namespace detail

inline GruSeq2Seq make_gru(int feature_dim, int hidden_dim, int output_dim, OutputHead head,
                           std::uint64_t seed) {
  if (feature_dim < 1 || hidden_dim < 1 || output_dim < 1)
    throw std::invalid_argument("make_gru: dims must be positive");
  Rng rng(derive_seed(seed, 0x677275));
  GruSeq2Seq m;
  m.encoder = detail::make_gru_cell(feature_dim, hidden_dim, rng);
  m.decoder = detail::make_gru_cell(output_dim, hidden_dim, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  m.w_out = MatR(output_dim, hidden_dim);
  for (int i = 0; i < output_dim; ++i)
    for (int j = 0; j < hidden_dim; ++j) m.w_out(i, j) = rng.uniform(-bound, bound);
  m.b_out = VecR::Zero(output_dim);
  m.head = head;
  return m;
}

namespace detail {

struct GruStepTrace {
  VecR x, h_prev, z, r, n, unh, h;
};

inline GruStepTrace gru_cell_step(const GruCell& c, const VecR& x, const VecR& h_prev) {
  GruStepTrace t;
  t.x = x;
  t.h_prev = h_prev;
  t.z = (1.0 / (1.0 + (-(c.wz * x + c.uz * h_prev + c.bz)).array().exp())).matrix();
  t.r = (1.0 / (1.0 + (-(c.wr * x + c.ur * h_prev + c.br)).array().exp())).matrix();
  t.unh = c.un * h_prev;
  t.n = (c.wn * x + c.bn + t.r.cwiseProduct(t.unh)).array().tanh().matrix();
  t.h = (VecR::Ones(c.hidden_dim) - t.z).cwiseProduct(t.n) + t.z.cwiseProduct(h_prev);
  return t;
}

struct GruCellGrads {
  MatR wz, wr, wn, uz, ur, un;
  VecR bz, br, bn;

  explicit GruCellGrads(const GruCell& c)
      : wz(MatR::Zero(c.hidden_dim, c.input_dim)),
        wr(MatR::Zero(c.hidden_dim, c.input_dim)),
        wn(MatR::Zero(c.hidden_dim, c.input_dim)),
        uz(MatR::Zero(c.hidden_dim, c.hidden_dim)),
        ur(MatR::Zero(c.hidden_dim, c.hidden_dim)),
        un(MatR::Zero(c.hidden_dim, c.hidden_dim)),
        bz(VecR::Zero(c.hidden_dim)),
        br(VecR::Zero(c.hidden_dim)),
        bn(VecR::Zero(c.hidden_dim)) {}
};

// Accumulates parameter gradients for one step; returns (dh_prev, dx).
inline std::pair<VecR, VecR> gru_cell_backward(const GruCell& c, const GruStepTrace& t,
                                               const VecR& dh, GruCellGrads& g) {
  const VecR dz = dh.cwiseProduct(t.h_prev - t.n);
  const VecR dn = dh.cwiseProduct(VecR::Ones(c.hidden_dim) - t.z);
  VecR dh_prev = dh.cwiseProduct(t.z);

  const VecR dn_pre = dn.cwiseProduct(VecR::Ones(c.hidden_dim) - t.n.cwiseProduct(t.n));
  const VecR dr = dn_pre.cwiseProduct(t.unh);
  const VecR dunh = dn_pre.cwiseProduct(t.r);
  const VecR dz_pre = dz.cwiseProduct(t.z.cwiseProduct(VecR::Ones(c.hidden_dim) - t.z));
  const VecR dr_pre = dr.cwiseProduct(t.r.cwiseProduct(VecR::Ones(c.hidden_dim) - t.r));

  g.wn += dn_pre * t.x.transpose();
  g.bn += dn_pre;
  g.un += dunh * t.h_prev.transpose();
  g.wz += dz_pre * t.x.transpose();
  g.uz += dz_pre * t.h_prev.transpose();
  g.bz += dz_pre;
  g.wr += dr_pre * t.x.transpose();
  g.ur += dr_pre * t.h_prev.transpose();
  g.br += dr_pre;

  dh_prev += c.un.transpose() * dunh + c.uz.transpose() * dz_pre + c.ur.transpose() * dr_pre;
  VecR dx = c.wz.transpose() * dz_pre + c.wr.transpose() * dr_pre + c.wn.transpose() * dn_pre;
  return {std::move(dh_prev), std::move(dx)};
}

struct GruTrace {
  std::vector<GruStepTrace> enc, dec;
  std::vector<VecR> logits;   // decoder pre-head outputs
  std::vector<VecR> outputs;  // post-head outputs (fed back)
};

inline GruTrace gru_forward_trace(const GruSeq2Seq& m, const MatR& inputs, int horizon) {
  if (inputs.rows() < 1) throw std::invalid_argument("gru_forward: empty input sequence");
  if (inputs.cols() != m.feature_dim())
    throw std::invalid_argument("gru_forward: feature width mismatch");
  if (!inputs.allFinite()) throw DegenerateInputError("gru_forward: non-finite input");
  if (horizon < 1) throw std::invalid_argument("gru_forward: horizon must be >= 1");
  GruTrace tr;
  VecR h = VecR::Zero(m.hidden_dim());
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    tr.enc.push_back(gru_cell_step(m.encoder, inputs.row(t).transpose(), h));
    h = tr.enc.back().h;
  }
  VecR prev = VecR::Zero(m.output_dim());
  for (int s = 0; s < horizon; ++s) {
    tr.dec.push_back(gru_cell_step(m.decoder, prev, h));
    h = tr.dec.back().h;
    VecR logits = m.w_out * h + m.b_out;
    tr.outputs.push_back(m.head == OutputHead::kSoftmax ? softmax(logits) : logits);
    tr.logits.push_back(std::move(logits));
    prev = tr.outputs.back();
  }
  return tr;
}

}  // namespace detail

// Rows are decoder steps; probability vectors under the softmax head, raw
// log-spectrum predictions otherwise.
inline MatR gru_forward(const GruSeq2Seq& m, const MatR& inputs, int horizon) {
  const detail::GruTrace tr = detail::gru_forward_trace(m, inputs, horizon);
  MatR out(horizon, m.output_dim());
  for (int s = 0; s < horizon; ++s) out.row(s) = tr.outputs[static_cast<std::size_t>(s)].transpose();
  return out;
}

// One training sequence: per-record decoder steps to score, with a class
// label (softmax head) or a raw target row (spectrum head) per scored step.
struct GruRecord {
  MatR inputs;                 // L_in x feature_dim
  std::vector<int> steps;      // scored decoder steps, ascending
  std::vector<int> labels;     // softmax targets, one per scored step
  MatR targets;                // spectrum targets, one row per scored step
  int horizon = 0;             // decoder unroll length; 0 means max(steps)+1
};

struct GruGradients {
  detail::GruCellGrads encoder, decoder;
  MatR w_out;
  VecR b_out;
  double loss = 0.0;

  explicit GruGradients(const GruSeq2Seq& m)
      : encoder(m.encoder),
        decoder(m.decoder),
        w_out(MatR::Zero(m.w_out.rows(), m.w_out.cols())),
        b_out(VecR::Zero(m.b_out.size())) {}
};

namespace detail {

inline int record_horizon(const GruRecord& rec) {
  if (rec.steps.empty()) throw std::invalid_argument("gru record: no scored steps");
  int mx = 0;
  for (int s : rec.steps) {
    if (s < 0) throw std::invalid_argument("gru record: negative step");
    mx = std::max(mx, s);
  }
  const int horizon = rec.horizon > 0 ? rec.horizon : mx + 1;
  if (mx >= horizon) throw std::invalid_argument("gru record: step beyond horizon");
  return horizon;
}

inline void check_record_targets(const GruSeq2Seq& m, const GruRecord& rec) {
  if (m.head == OutputHead::kSoftmax) {
    if (rec.labels.size() != rec.steps.size())
      throw std::invalid_argument("gru record: label count mismatch");
  } else if (static_cast<std::size_t>(rec.targets.rows()) != rec.steps.size() ||
             rec.targets.cols() != m.output_dim()) {
    throw std::invalid_argument("gru record: target shape mismatch");
  }
}

}  // namespace detail

inline double gru_loss(const GruSeq2Seq& m, const std::vector<GruRecord>& batch) {
  if (batch.empty()) throw std::invalid_argument("gru_loss: empty batch");
  double loss = 0.0;
  std::size_t scored = 0;
  for (const GruRecord& rec : batch) {
    detail::check_record_targets(m, rec);
    const int horizon = detail::record_horizon(rec);
    const detail::GruTrace tr = detail::gru_forward_trace(m, rec.inputs, horizon);
    for (std::size_t i = 0; i < rec.steps.size(); ++i) {
      const auto s = static_cast<std::size_t>(rec.steps[i]);
      if (m.head == OutputHead::kSoftmax) {
        const int y = rec.labels.at(i);
        if (y < 0 || y >= m.output_dim()) throw std::out_of_range("label out of range");
        const VecR& logits = tr.logits[s];
        const double mx = logits.maxCoeff();
        loss += mx + std::log((logits.array() - mx).exp().sum()) - logits[y];
        ++scored;
      } else {
        loss += (tr.logits[s] - rec.targets.row(static_cast<Eigen::Index>(i)).transpose())
                    .squaredNorm();
        scored += static_cast<std::size_t>(m.output_dim());
      }
    }
  }
  return loss / static_cast<double>(scored);
}

inline GruGradients gru_gradients(const GruSeq2Seq& m, const std::vector<GruRecord>& batch) {
  if (batch.empty()) throw std::invalid_argument("gru_gradients: empty batch");
  GruGradients g(m);
  std::size_t scored = 0;
  for (const GruRecord& rec : batch) {
    detail::check_record_targets(m, rec);
    if (m.head == OutputHead::kSoftmax) {
      detail::check_labels(rec.labels, m.output_dim());
      scored += rec.steps.size();
    } else {
      scored += rec.steps.size() * static_cast<std::size_t>(m.output_dim());
    }
  }
  const double norm = 1.0 / static_cast<double>(scored);

  for (const GruRecord& rec : batch) {
    const int horizon = detail::record_horizon(rec);
    const detail::GruTrace tr = detail::gru_forward_trace(m, rec.inputs, horizon);

    std::vector<VecR> dloss_logits(static_cast<std::size_t>(horizon));
    for (std::size_t i = 0; i < rec.steps.size(); ++i) {
      const auto s = static_cast<std::size_t>(rec.steps[i]);
      const VecR& logits = tr.logits[s];
      if (m.head == OutputHead::kSoftmax) {
        const int y = rec.labels[i];
        const double mx = logits.maxCoeff();
        g.loss += norm * (mx + std::log((logits.array() - mx).exp().sum()) - logits[y]);
        VecR d = detail::softmax(logits) * norm;
        d[y] -= norm;
        dloss_logits[s] = dloss_logits[s].size() ? VecR(dloss_logits[s] + d) : d;
      } else {
        const VecR resid = logits - rec.targets.row(static_cast<Eigen::Index>(i)).transpose();
        g.loss += norm * resid.squaredNorm();
        const VecR d = 2.0 * norm * resid;
        dloss_logits[s] = dloss_logits[s].size() ? VecR(dloss_logits[s] + d) : d;
      }
    }

    VecR dh = VecR::Zero(m.hidden_dim());
    VecR dfeedback = VecR::Zero(m.output_dim());  // grad wrt out[s], from step s+1's input
    for (int s = horizon - 1; s >= 0; --s) {
      const auto su = static_cast<std::size_t>(s);
      VecR dout = dfeedback;
      VecR dlogits = VecR::Zero(m.output_dim());
      if (m.head == OutputHead::kSoftmax) {
        // Feedback path goes through the softmax jacobian; the loss term was
        // formed directly in logit space.
        const VecR& p = tr.outputs[su];
        dlogits = (p.array() * (dout.array() - dout.dot(p))).matrix();
      } else {
        dlogits = dout;
      }
      if (dloss_logits[su].size()) dlogits += dloss_logits[su];

      g.w_out += dlogits * tr.dec[su].h.transpose();
      g.b_out += dlogits;
      dh += m.w_out.transpose() * dlogits;

      auto [dh_prev, dx] = detail::gru_cell_backward(m.decoder, tr.dec[su], dh, g.decoder);
      dh = std::move(dh_prev);
      dfeedback = std::move(dx);
    }

    for (auto t = static_cast<Eigen::Index>(tr.enc.size()) - 1; t >= 0; --t) {
      std::pair<VecR, VecR> back =
          detail::gru_cell_backward(m.encoder, tr.enc[static_cast<std::size_t>(t)], dh, g.encoder);
      dh = std::move(back.first);
    }
  }
  return g;
}

namespace detail {

template <typename CellT>
inline void pack_cell(const CellT& c, VecR& v, Eigen::Index& at) {
  for (const MatR* m : {&c.wz, &c.uz, &c.wr, &c.ur, &c.wn, &c.un})
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) v[at++] = (*m)(i, j);
  for (const VecR* b : {&c.bz, &c.br, &c.bn}) {
    v.segment(at, b->size()) = *b;
    at += b->size();
  }
}

template <typename CellT>
inline void unpack_cell(CellT& c, const VecR& v, Eigen::Index& at) {
  for (MatR* m : {&c.wz, &c.uz, &c.wr, &c.ur, &c.wn, &c.un})
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = v[at++];
  for (VecR* b : {&c.bz, &c.br, &c.bn}) {
    *b = v.segment(at, b->size());
    at += b->size();
  }
}

}  // namespace detail

inline VecR gru_pack(const GruSeq2Seq& m) {
  VecR v(static_cast<Eigen::Index>(m.num_params()));
  Eigen::Index at = 0;
  detail::pack_cell(m.encoder, v, at);
  detail::pack_cell(m.decoder, v, at);
  for (Eigen::Index i = 0; i < m.w_out.rows(); ++i)
    for (Eigen::Index j = 0; j < m.w_out.cols(); ++j) v[at++] = m.w_out(i, j);
  v.segment(at, m.b_out.size()) = m.b_out;
  return v;
}

inline void gru_unpack(GruSeq2Seq& m, const VecR& v) {
  if (v.size() != static_cast<Eigen::Index>(m.num_params()))
    throw std::invalid_argument("gru_unpack: size mismatch");
  Eigen::Index at = 0;
  detail::unpack_cell(m.encoder, v, at);
  detail::unpack_cell(m.decoder, v, at);
  for (Eigen::Index i = 0; i < m.w_out.rows(); ++i)
    for (Eigen::Index j = 0; j < m.w_out.cols(); ++j) m.w_out(i, j) = v[at++];
  m.b_out = v.segment(at, m.b_out.size());
}

inline VecR gru_pack_gradients(const GruSeq2Seq& m, const GruGradients& g) {
  VecR v(static_cast<Eigen::Index>(m.num_params()));
  Eigen::Index at = 0;
  detail::pack_cell(g.encoder, v, at);
  detail::pack_cell(g.decoder, v, at);
  for (Eigen::Index i = 0; i < g.w_out.rows(); ++i)
    for (Eigen::Index j = 0; j < g.w_out.cols(); ++j) v[at++] = g.w_out(i, j);
  v.segment(at, g.b_out.size()) = g.b_out;
  return v;
}

}  // namespace csilab
