#include "s2p/ops.hpp"

#include <algorithm>
#include <cmath>

#include "s2p/error.hpp"

namespace s2p {

namespace {

void require_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) throw Error(ErrorKind::invalid_input, "non-finite logit");
}

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) throw Error(ErrorKind::shape, what);
}

}  // namespace

Vec softmax(std::span<const double> logits) {
  require_finite(logits);
  if (logits.empty()) return {};
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

Vec log_softmax(std::span<const double> logits) {
  require_finite(logits);
  if (logits.empty()) return {};
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  Vec out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::invalid_input, "argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

LossGrad cross_entropy(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) throw Error(ErrorKind::index, "cross-entropy target out of range");
  Vec logp = log_softmax(logits);
  LossGrad out;
  out.loss = -logp[target];
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logp[i]);
  out.grad[target] -= 1.0;
  return out;
}

LossGrad soft_cross_entropy(std::span<const double> logits, std::span<const double> target) {
  require_size(target.size(), logits.size(), "soft cross-entropy size mismatch");
  Vec logp = log_softmax(logits);
  LossGrad out;
  out.grad.resize(logits.size());
  double mass = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (target[i] > 0.0) out.loss -= target[i] * logp[i];
    mass += target[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = mass * std::exp(logp[i]) - target[i];
  return out;
}

GumbelSample gumbel_softmax_st(std::span<const double> logits, double temperature, RngStream& rng) {
  Vec noise(logits.size());
  for (double& g : noise) g = rng.gumbel();
  return gumbel_softmax_st(logits, temperature, noise);
}

GumbelSample gumbel_softmax_st(std::span<const double> logits, double temperature,
                               std::span<const double> noise) {
  if (!(temperature > 0.0)) throw Error(ErrorKind::invalid_parameter, "temperature must be positive");
  require_size(noise.size(), logits.size(), "gumbel noise size mismatch");
  GumbelSample s;
  s.noise.assign(noise.begin(), noise.end());
  Vec perturbed(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) perturbed[i] = (logits[i] + noise[i]) / temperature;
  s.soft = softmax(perturbed);
  s.index = argmax(s.soft);
  s.hard.assign(logits.size(), 0.0);
  s.hard[s.index] = 1.0;
  return s;
}

Vec gumbel_softmax_st_backward(const GumbelSample& sample, double temperature,
                               std::span<const double> grad_hard) {
  require_size(grad_hard.size(), sample.soft.size(), "gumbel gradient size mismatch");
  const Vec& s = sample.soft;
  double inner = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) inner += s[i] * grad_hard[i];
  Vec out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] * (grad_hard[i] - inner) / temperature;
  return out;
}

Vec tanh_forward(std::span<const double> x) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

Vec tanh_backward(std::span<const double> y, std::span<const double> dy) {
  require_size(dy.size(), y.size(), "tanh gradient size mismatch");
  Vec dx(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
  return dx;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

GruWeights GruWeights::bind(const ParameterSet& params, std::string_view prefix) {
  auto get = [&](const char* n) { return &params.value(std::string(prefix) + n); };
  return {get("wz"), get("uz"), get("bz"), get("wr"), get("ur"),
          get("br"), get("wh"), get("uh"), get("bh")};
}

GruGrads GruGrads::bind(Gradients& grads, std::string_view prefix) {
  auto get = [&](const char* n) { return grads.find(std::string(prefix) + n); };
  return {get("wz"), get("uz"), get("bz"), get("wr"), get("ur"),
          get("br"), get("wh"), get("uh"), get("bh")};
}

void add_gru_parameters(ParameterSet& params, std::string_view prefix, std::size_t input_size,
                        std::size_t state_size, RngStream& rng) {
  const std::string p(prefix);
  for (const char* gate : {"z", "r", "h"}) {
    params.add(p + "w" + gate, state_size, input_size, Init::glorot_uniform, rng);
    params.add(p + "u" + gate, state_size, state_size, Init::glorot_uniform, rng);
    params.add(p + "b" + gate, state_size, 1, Init::zeros, rng);
  }
}

Vec gru_step(std::span<const double> h, std::span<const double> x, const GruWeights& w,
             GruCache* cache) {
  const std::size_t n = w.state_size();
  if (h.size() != n || x.size() != w.input_size())
    throw Error(ErrorKind::shape, "gru_step dimension mismatch");

  Vec z(w.bz->values().begin(), w.bz->values().end());
  Vec r(w.br->values().begin(), w.br->values().end());
  blas::gemv_acc(*w.wz, x, z);
  blas::gemv_acc(*w.uz, h, z);
  blas::gemv_acc(*w.wr, x, r);
  blas::gemv_acc(*w.ur, h, r);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = sigmoid(z[i]);
    r[i] = sigmoid(r[i]);
  }
  Vec rh(n);
  for (std::size_t i = 0; i < n; ++i) rh[i] = r[i] * h[i];
  Vec cand(w.bh->values().begin(), w.bh->values().end());
  blas::gemv_acc(*w.wh, x, cand);
  blas::gemv_acc(*w.uh, rh, cand);
  for (double& c : cand) c = std::tanh(c);

  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (1.0 - z[i]) * h[i] + z[i] * cand[i];

  if (cache) {
    cache->h.assign(h.begin(), h.end());
    cache->x.assign(x.begin(), x.end());
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->rh = std::move(rh);
    cache->candidate = std::move(cand);
    cache->out = out;
  }
  return out;
}

Vec gru_step(std::span<const double> h, std::span<const double> x, const ParameterSet& params,
             std::string_view prefix) {
  return gru_step(h, x, GruWeights::bind(params, prefix));
}

void gru_step_backward(const GruCache& c, const GruWeights& w, std::span<const double> dout,
                       GruGrads* grads, Vec& dh, Vec& dx) {
  const std::size_t n = w.state_size();
  require_size(dout.size(), n, "gru backward dimension mismatch");
  dh.assign(n, 0.0);
  dx.assign(w.input_size(), 0.0);

  Vec dcand_pre(n), dz_pre(n);
  for (std::size_t i = 0; i < n; ++i) {
    dh[i] = dout[i] * (1.0 - c.z[i]);
    const double dz = dout[i] * (c.candidate[i] - c.h[i]);
    const double dcand = dout[i] * c.z[i];
    dcand_pre[i] = dcand * (1.0 - c.candidate[i] * c.candidate[i]);
    dz_pre[i] = dz * c.z[i] * (1.0 - c.z[i]);
  }
  // Candidate path: Wh x + Uh (r*h).
  Vec drh(n, 0.0);
  blas::gemv_t_acc(*w.uh, dcand_pre, drh);
  blas::gemv_t_acc(*w.wh, dcand_pre, dx);
  Vec dr_pre(n);
  for (std::size_t i = 0; i < n; ++i) {
    dh[i] += drh[i] * c.r[i];
    const double dr = drh[i] * c.h[i];
    dr_pre[i] = dr * c.r[i] * (1.0 - c.r[i]);
  }
  blas::gemv_t_acc(*w.wz, dz_pre, dx);
  blas::gemv_t_acc(*w.uz, dz_pre, dh);
  blas::gemv_t_acc(*w.wr, dr_pre, dx);
  blas::gemv_t_acc(*w.ur, dr_pre, dh);

  if (grads) {
    auto acc_bias = [](Array* b, const Vec& d) {
      if (b) blas::axpy(1.0, d, b->values());
    };
    if (grads->wz) blas::ger_acc(*grads->wz, dz_pre, c.x);
    if (grads->uz) blas::ger_acc(*grads->uz, dz_pre, c.h);
    acc_bias(grads->bz, dz_pre);
    if (grads->wr) blas::ger_acc(*grads->wr, dr_pre, c.x);
    if (grads->ur) blas::ger_acc(*grads->ur, dr_pre, c.h);
    acc_bias(grads->br, dr_pre);
    if (grads->wh) blas::ger_acc(*grads->wh, dcand_pre, c.x);
    if (grads->uh) blas::ger_acc(*grads->uh, dcand_pre, c.rh);
    acc_bias(grads->bh, dcand_pre);
  }
}

Vec affine(const Array& w, const Array& b, std::span<const double> x) {
  if (b.size() != w.rows()) throw Error(ErrorKind::shape, "affine bias mismatch");
  Vec y(b.values().begin(), b.values().end());
  blas::gemv_acc(w, x, y);
  return y;
}

void affine_backward(const Array& w, std::span<const double> x, std::span<const double> dy,
                     Array* dw, Array* db, Vec* dx) {
  if (dw) blas::ger_acc(*dw, dy, x);
  if (db) blas::axpy(1.0, dy, db->values());
  if (dx) {
    dx->assign(w.cols(), 0.0);
    blas::gemv_t_acc(w, dy, *dx);
  }
}

}  // namespace s2p
