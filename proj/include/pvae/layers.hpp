#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "pvae/rng.hpp"
#include "pvae/tape.hpp"

namespace pvae {

// ---------------------------------------------------------------------------
// Parameter containers (plain tensors, shared read-only across tapes)
// ---------------------------------------------------------------------------

struct EmbeddingTable {
  Tensor matrix;  // vocab_size x embed_dim
};

// Gate order throughout: input (i), forget (f), output (o), candidate (g).
struct LstmCellParams {
  Tensor wi, wf, wo, wg;  // input_dim x hidden_dim
  Tensor ui, uf, uo, ug;  // hidden_dim x hidden_dim
  Tensor bi, bf, bo, bg;  // hidden_dim
};

struct LstmStackParams {
  std::vector<LstmCellParams> layers;
  Index num_layers() const { return static_cast<Index>(layers.size()); }
};

struct GaussianHead {
  Tensor mu_w;      // in_dim x latent_dim
  Tensor mu_b;      // latent_dim
  Tensor logvar_w;  // in_dim x latent_dim
  Tensor logvar_b;  // latent_dim
};

struct Linear {
  Tensor w;  // in_dim x out_dim
  Tensor b;  // out_dim
};

// A sampled latent code with its posterior provenance.
struct LatentCode {
  Tensor z;
  Tensor mu;
  Tensor logvar;
};

// Xavier-uniform weights, zero biases except the forget gate bias at 1.0.
LstmCellParams init_lstm_cell(Index input_dim, Index hidden_dim, Rng& rng);
LstmStackParams init_lstm_stack(Index input_dim, Index hidden_dim,
                                Index num_layers, Rng& rng);
GaussianHead init_gaussian_head(Index in_dim, Index latent_dim, Rng& rng);
Linear init_linear(Index in_dim, Index out_dim, Rng& rng);
Tensor xavier_uniform(Index rows, Index cols, Rng& rng);

// ---------------------------------------------------------------------------
// Tape-bound views: leaf node ids for one evaluation
// ---------------------------------------------------------------------------

struct LstmCellNodes {
  NodeId wi, wf, wo, wg, ui, uf, uo, ug, bi, bf, bo, bg;
};

struct LstmStackNodes {
  std::vector<LstmCellNodes> layers;
};

struct GaussianHeadNodes {
  NodeId mu_w, mu_b, logvar_w, logvar_b;
};

struct LinearNodes {
  NodeId w, b;
};

// Records (name, leaf id, parameter) triples in binding order; the trainer
// uses it to pull gradients back out of a tape.
class Binder {
 public:
  explicit Binder(Tape& tape) : tape_(&tape) {}

  NodeId bind(const std::string& name, const Tensor& value) {
    NodeId id = tape_->leaf(value);
    entries_.push_back({name, id});
    return id;
  }

  const std::vector<std::pair<std::string, NodeId>>& entries() const {
    return entries_;
  }

 private:
  Tape* tape_;
  std::vector<std::pair<std::string, NodeId>> entries_;
};

LstmCellNodes bind_params(Binder& b, const LstmCellParams& p, const std::string& name);
LstmStackNodes bind_params(Binder& b, const LstmStackParams& p,
                    const std::string& name);
GaussianHeadNodes bind_params(Binder& b, const GaussianHead& p,
                       const std::string& name);
LinearNodes bind_params(Binder& b, const Linear& p, const std::string& name);

// ---------------------------------------------------------------------------
// Differentiable operations
// ---------------------------------------------------------------------------

// Row gather: one output row per token, differentiable w.r.t. the table.
NodeId embed(Tape& t, NodeId table, const std::vector<Index>& tokens);

struct LstmState {
  NodeId h = kNoNode;  // 1 x hidden
  NodeId c = kNoNode;  // 1 x hidden
};

using StackState = std::vector<LstmState>;  // one per layer

// i = sig(xWi + hUi + bi), f = sig(xWf + hUf + bf), o = sig(xWo + hUo + bo),
// g = tanh(xWg + hUg + bg), c' = f.c + i.g, h' = o.tanh(c')
LstmState lstm_cell_step(Tape& t, const LstmCellNodes& cell, NodeId x,
                         const LstmState& prev);

struct LstmEncodeResult {
  std::vector<NodeId> outputs;  // top-layer h per time step
  StackState final_state;
};

// Unrolls lstm_cell_step over time, then depth. Zero initial state when
// `init` is absent.
LstmEncodeResult lstm_encode(Tape& t, const LstmStackNodes& stack,
                             const std::vector<NodeId>& inputs,
                             const std::optional<StackState>& init = {});

// mu = x Wmu + bmu, logvar = x Wlv + blv
std::pair<NodeId, NodeId> gaussian_head(Tape& t, const GaussianHeadNodes& head,
                                        NodeId x);

// z = mu + exp(0.5 logvar) . eps, with eps a constant leaf
NodeId reparameterize(Tape& t, NodeId mu, NodeId logvar, NodeId noise);

// 0.5 sum(mu^2 + exp(logvar) - logvar - 1), the divergence to N(0, I)
NodeId kl_gaussian(Tape& t, NodeId mu, NodeId logvar);

// x W + b
NodeId linear_apply(Tape& t, const LinearNodes& lin, NodeId x);

// Value-level convenience used by tests and the generator.
LatentCode reparameterize_value(const Tensor& mu, const Tensor& logvar,
                                const Tensor& noise);
double kl_gaussian_value(const Tensor& mu, const Tensor& logvar);

}  // namespace pvae
