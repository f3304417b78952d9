#pragma once

#include <span>
#include <string>
#include <string_view>

#include "s2p/rng.hpp"
#include "s2p/tensor.hpp"

namespace s2p {

// Numerically stable softmax (max-subtracted). Throws invalid_input on
// non-finite logits.
Vec softmax(std::span<const double> logits);
Vec log_softmax(std::span<const double> logits);
std::size_t argmax(std::span<const double> values);  // lowest index on ties

struct LossGrad {
  double loss = 0.0;
  Vec grad;  // w.r.t. logits
};

// -log softmax(logits)[target]; gradient softmax - onehot(target).
LossGrad cross_entropy(std::span<const double> logits, std::size_t target);
// -sum_k target_k log softmax(logits)_k for a probability vector target.
LossGrad soft_cross_entropy(std::span<const double> logits, std::span<const double> target);

// Straight-through Gumbel-Softmax sample.
struct GumbelSample {
  Vec hard;   // one-hot of argmax(soft)
  Vec soft;   // softmax((logits + noise) / temperature)
  Vec noise;  // the Gumbel draw used
  std::size_t index = 0;
};

GumbelSample gumbel_softmax_st(std::span<const double> logits, double temperature, RngStream& rng);
// Same sample with caller-provided noise (zero noise gives the greedy token).
GumbelSample gumbel_softmax_st(std::span<const double> logits, double temperature,
                               std::span<const double> noise);
// Gradient w.r.t. logits given the gradient w.r.t. the emitted one-hot;
// the hard sample passes it through to the soft relaxation unchanged.
Vec gumbel_softmax_st_backward(const GumbelSample& sample, double temperature,
                               std::span<const double> grad_hard);

Vec tanh_forward(std::span<const double> x);
// dx = dy * (1 - y^2), given y = tanh(x).
Vec tanh_backward(std::span<const double> y, std::span<const double> dy);
double sigmoid(double x);

// Views over the nine arrays of one GRU cell stored under a name prefix:
// {prefix}wz, uz, bz (update gate), wr, ur, br (reset gate), wh, uh, bh (candidate).
struct GruWeights {
  const Array* wz;
  const Array* uz;
  const Array* bz;
  const Array* wr;
  const Array* ur;
  const Array* br;
  const Array* wh;
  const Array* uh;
  const Array* bh;

  static GruWeights bind(const ParameterSet& params, std::string_view prefix);
  std::size_t input_size() const { return wz->cols(); }
  std::size_t state_size() const { return wz->rows(); }
};

struct GruGrads {
  Array* wz;
  Array* uz;
  Array* bz;
  Array* wr;
  Array* ur;
  Array* br;
  Array* wh;
  Array* uh;
  Array* bh;

  static GruGrads bind(Gradients& grads, std::string_view prefix);
};

void add_gru_parameters(ParameterSet& params, std::string_view prefix, std::size_t input_size,
                        std::size_t state_size, RngStream& rng);

// Cached forward values of one GRU step.
struct GruCache {
  Vec h;          // previous state
  Vec x;          // input
  Vec z;          // update gate
  Vec r;          // reset gate
  Vec rh;         // r * h
  Vec candidate;  // tanh(...)
  Vec out;        // new state
};

// h' = (1 - z) * h + z * candidate, with
// z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br),
// candidate = tanh(Wh x + Uh (r * h) + bh).
Vec gru_step(std::span<const double> h, std::span<const double> x, const GruWeights& w,
             GruCache* cache = nullptr);
Vec gru_step(std::span<const double> h, std::span<const double> x, const ParameterSet& params,
             std::string_view prefix = "");

// Accumulates parameter gradients; writes dh and dx (overwritten, sized to fit).
void gru_step_backward(const GruCache& cache, const GruWeights& w, std::span<const double> dout,
                       GruGrads* grads, Vec& dh, Vec& dx);

// y = W x + b.
Vec affine(const Array& w, const Array& b, std::span<const double> x);
// Accumulates dW, db (if non-null); returns dx when want_dx.
void affine_backward(const Array& w, std::span<const double> x, std::span<const double> dy,
                     Array* dw, Array* db, Vec* dx);

}  // namespace s2p
