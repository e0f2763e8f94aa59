#include "pvae/layers.hpp"

#include <cmath>

namespace pvae {

Tensor xavier_uniform(Index rows, Index cols, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t({rows, cols});
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

LstmCellParams init_lstm_cell(Index input_dim, Index hidden_dim, Rng& rng) {
  LstmCellParams p;
  p.wi = xavier_uniform(input_dim, hidden_dim, rng);
  p.wf = xavier_uniform(input_dim, hidden_dim, rng);
  p.wo = xavier_uniform(input_dim, hidden_dim, rng);
  p.wg = xavier_uniform(input_dim, hidden_dim, rng);
  p.ui = xavier_uniform(hidden_dim, hidden_dim, rng);
  p.uf = xavier_uniform(hidden_dim, hidden_dim, rng);
  p.uo = xavier_uniform(hidden_dim, hidden_dim, rng);
  p.ug = xavier_uniform(hidden_dim, hidden_dim, rng);
  p.bi = Tensor::zeros({hidden_dim});
  p.bf = Tensor::full({hidden_dim}, 1.0);
  p.bo = Tensor::zeros({hidden_dim});
  p.bg = Tensor::zeros({hidden_dim});
  return p;
}

LstmStackParams init_lstm_stack(Index input_dim, Index hidden_dim,
                                Index num_layers, Rng& rng) {
  LstmStackParams s;
  for (Index l = 0; l < num_layers; ++l)
    s.layers.push_back(
        init_lstm_cell(l == 0 ? input_dim : hidden_dim, hidden_dim, rng));
  return s;
}

GaussianHead init_gaussian_head(Index in_dim, Index latent_dim, Rng& rng) {
  GaussianHead h;
  h.mu_w = xavier_uniform(in_dim, latent_dim, rng);
  h.mu_b = Tensor::zeros({latent_dim});
  h.logvar_w = xavier_uniform(in_dim, latent_dim, rng);
  h.logvar_b = Tensor::zeros({latent_dim});
  return h;
}

Linear init_linear(Index in_dim, Index out_dim, Rng& rng) {
  return {xavier_uniform(in_dim, out_dim, rng), Tensor::zeros({out_dim})};
}

LstmCellNodes bind_params(Binder& b, const LstmCellParams& p,
                   const std::string& name) {
  LstmCellNodes n;
  n.wi = b.bind(name + ".wi", p.wi);
  n.wf = b.bind(name + ".wf", p.wf);
  n.wo = b.bind(name + ".wo", p.wo);
  n.wg = b.bind(name + ".wg", p.wg);
  n.ui = b.bind(name + ".ui", p.ui);
  n.uf = b.bind(name + ".uf", p.uf);
  n.uo = b.bind(name + ".uo", p.uo);
  n.ug = b.bind(name + ".ug", p.ug);
  n.bi = b.bind(name + ".bi", p.bi);
  n.bf = b.bind(name + ".bf", p.bf);
  n.bo = b.bind(name + ".bo", p.bo);
  n.bg = b.bind(name + ".bg", p.bg);
  return n;
}

LstmStackNodes bind_params(Binder& b, const LstmStackParams& p,
                    const std::string& name) {
  LstmStackNodes n;
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    n.layers.push_back(bind_params(b, p.layers[l], name + ".l" + std::to_string(l)));
  return n;
}

GaussianHeadNodes bind_params(Binder& b, const GaussianHead& p,
                       const std::string& name) {
  GaussianHeadNodes n;
  n.mu_w = b.bind(name + ".mu_w", p.mu_w);
  n.mu_b = b.bind(name + ".mu_b", p.mu_b);
  n.logvar_w = b.bind(name + ".logvar_w", p.logvar_w);
  n.logvar_b = b.bind(name + ".logvar_b", p.logvar_b);
  return n;
}

LinearNodes bind_params(Binder& b, const Linear& p, const std::string& name) {
  LinearNodes n;
  n.w = b.bind(name + ".w", p.w);
  n.b = b.bind(name + ".b", p.b);
  return n;
}

NodeId embed(Tape& t, NodeId table, const std::vector<Index>& tokens) {
  return embedding_lookup(t, table, tokens);
}

namespace {

NodeId gate(Tape& t, NodeId x, NodeId w, NodeId h, NodeId u, NodeId b) {
  return add(t, add(t, matmul(t, x, w), matmul(t, h, u)), b);
}

}  // namespace

LstmState lstm_cell_step(Tape& t, const LstmCellNodes& cell, NodeId x,
                         const LstmState& prev) {
  NodeId i = sigmoid(t, gate(t, x, cell.wi, prev.h, cell.ui, cell.bi));
  NodeId f = sigmoid(t, gate(t, x, cell.wf, prev.h, cell.uf, cell.bf));
  NodeId o = sigmoid(t, gate(t, x, cell.wo, prev.h, cell.uo, cell.bo));
  NodeId g = tanh(t, gate(t, x, cell.wg, prev.h, cell.ug, cell.bg));
  NodeId c = add(t, mul(t, f, prev.c), mul(t, i, g));
  NodeId h = mul(t, o, tanh(t, c));
  return {h, c};
}

LstmEncodeResult lstm_encode(Tape& t, const LstmStackNodes& stack,
                             const std::vector<NodeId>& inputs,
                             const std::optional<StackState>& init) {
  if (inputs.empty()) throw EmptyInputError("lstm_encode: empty sequence");
  if (init && init->size() != stack.layers.size())
    throw ShapeError("lstm_encode: init state layer count mismatch");

  Index hidden = t.value(stack.layers[0].bi).cols();
  LstmEncodeResult result;
  std::vector<NodeId> seq = inputs;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    LstmState state;
    if (init) {
      state = (*init)[l];
    } else {
      state.h = t.leaf(Tensor::zeros({1, hidden}));
      state.c = t.leaf(Tensor::zeros({1, hidden}));
    }
    std::vector<NodeId> outputs;
    outputs.reserve(seq.size());
    for (NodeId x : seq) {
      state = lstm_cell_step(t, stack.layers[l], x, state);
      outputs.push_back(state.h);
    }
    result.final_state.push_back(state);
    seq = std::move(outputs);
  }
  result.outputs = std::move(seq);
  return result;
}

std::pair<NodeId, NodeId> gaussian_head(Tape& t, const GaussianHeadNodes& head,
                                        NodeId x) {
  NodeId mu = add(t, matmul(t, x, head.mu_w), head.mu_b);
  NodeId logvar = add(t, matmul(t, x, head.logvar_w), head.logvar_b);
  return {mu, logvar};
}

NodeId reparameterize(Tape& t, NodeId mu, NodeId logvar, NodeId noise) {
  if (!t.value(mu).same_shape(t.value(logvar)) ||
      !t.value(mu).same_shape(t.value(noise)))
    throw ShapeError("reparameterize: mu/logvar/noise shapes differ");
  NodeId std_dev = exp(t, scalar_scale(t, logvar, 0.5));
  return add(t, mu, mul(t, std_dev, noise));
}

NodeId kl_gaussian(Tape& t, NodeId mu, NodeId logvar) {
  if (!t.value(mu).same_shape(t.value(logvar)))
    throw ShapeError("kl_gaussian: mu/logvar shapes differ");
  double k = static_cast<double>(t.value(mu).size());
  NodeId acc = add(t, sum(t, mul(t, mu, mu)), sum(t, exp(t, logvar)));
  acc = add(t, acc, scalar_scale(t, sum(t, logvar), -1.0));
  acc = add(t, acc, t.leaf(Tensor::scalar(-k)));
  return scalar_scale(t, acc, 0.5);
}

NodeId linear_apply(Tape& t, const LinearNodes& lin, NodeId x) {
  return add(t, matmul(t, x, lin.w), lin.b);
}

LatentCode reparameterize_value(const Tensor& mu, const Tensor& logvar,
                                const Tensor& noise) {
  Tape t;
  NodeId z = reparameterize(t, t.leaf(mu), t.leaf(logvar), t.leaf(noise));
  return {t.value(z), mu, logvar};
}

double kl_gaussian_value(const Tensor& mu, const Tensor& logvar) {
  Tape t;
  return t.value(kl_gaussian(t, t.leaf(mu), t.leaf(logvar)))[0];
}

}  // namespace pvae
