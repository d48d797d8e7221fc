#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pchid/matrix.hpp"
#include "pchid/rng.hpp"

namespace pchid {

enum class Activation { Tanh, Relu };
enum class OutputHead { Logits, Linear };

inline const char* to_string(Activation a) {
  return a == Activation::Tanh ? "tanh" : "relu";
}
inline const char* to_string(OutputHead h) {
  return h == OutputHead::Logits ? "logits" : "linear";
}

// Fully connected network parameters. weights[i] maps layer i to layer i+1
// and has shape layer_sizes[i+1] x layer_sizes[i].
struct MlpParams {
  std::vector<std::size_t> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  Activation hidden_activation = Activation::Tanh;
  OutputHead output_head = OutputHead::Logits;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }
};

struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

struct ForwardCache {
  // layer_inputs[l] is the (post-activation) input to layer l; layer_inputs[0]
  // is the network input. Batch size is fixed across the cache.
  std::vector<Matrix> layer_inputs;
  std::size_t batch = 0;
};

inline MlpParams init_params(const std::vector<std::size_t>& layer_sizes,
                             Activation activation, OutputHead head,
                             std::uint64_t seed) {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("init_params: need at least input and output layer");
  for (auto s : layer_sizes)
    if (s == 0) throw std::invalid_argument("init_params: zero-size layer");
  MlpParams p;
  p.layer_sizes = layer_sizes;
  p.hidden_activation = activation;
  p.output_head = head;
  Rng rng(Rng::derive(seed, "mlp-init"));
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_out, fan_in);
    for (auto& v : w.values) v = rng.uniform(-limit, limit);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(fan_out, 0.0);
  }
  return p;
}

inline MlpGradients zero_gradients_like(const MlpParams& p) {
  MlpGradients g;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    g.weights.emplace_back(p.weights[l].rows, p.weights[l].cols);
    g.biases.emplace_back(p.biases[l].size(), 0.0);
  }
  return g;
}

// input_batch: batch x input_dim. Returns (output batch x output_dim, cache).
inline std::pair<Matrix, ForwardCache> forward(const MlpParams& p,
                                               const Matrix& input_batch) {
  if (input_batch.cols != p.input_dim())
    throw std::invalid_argument("forward: input width mismatch");
  ForwardCache cache;
  cache.batch = input_batch.rows;
  cache.layer_inputs.push_back(input_batch);
  Matrix current = input_batch;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    Matrix z;
    gemm_a_bt(current, p.weights[l], z);
    for (std::size_t i = 0; i < z.rows; ++i) {
      double* row = z.row(i);
      for (std::size_t j = 0; j < z.cols; ++j) row[j] += p.biases[l][j];
    }
    const bool is_last = (l + 1 == p.num_layers());
    if (!is_last) {
      if (p.hidden_activation == Activation::Tanh) {
        for (auto& v : z.values) v = std::tanh(v);
      } else {
        for (auto& v : z.values) v = v > 0.0 ? v : 0.0;
      }
      cache.layer_inputs.push_back(z);
    }
    current = std::move(z);
  }
  return {std::move(current), std::move(cache)};
}

inline std::vector<double> forward_single(const MlpParams& p,
                                          const std::vector<double>& input) {
  Matrix in(1, input.size());
  in.values = input;
  auto [out, cache] = forward(p, in);
  return out.values;
}

// output_gradient: d(loss)/d(output), batch x output_dim.
inline MlpGradients backward(const MlpParams& p, const ForwardCache& cache,
                             const Matrix& output_gradient) {
  if (cache.layer_inputs.size() != p.num_layers())
    throw std::invalid_argument("backward: cache does not match params");
  if (output_gradient.rows != cache.batch ||
      output_gradient.cols != p.output_dim())
    throw std::invalid_argument("backward: output gradient shape mismatch");
  MlpGradients grads = zero_gradients_like(p);
  Matrix delta = output_gradient;
  for (std::size_t li = p.num_layers(); li-- > 0;) {
    const Matrix& layer_in = cache.layer_inputs[li];
    if (layer_in.cols != p.weights[li].cols)
      throw std::invalid_argument("backward: stale cache");
    gemm_at_b(delta, layer_in, grads.weights[li]);
    for (std::size_t i = 0; i < delta.rows; ++i) {
      const double* row = delta.row(i);
      for (std::size_t j = 0; j < delta.cols; ++j) grads.biases[li][j] += row[j];
    }
    if (li == 0) break;
    Matrix prev;
    gemm(delta, p.weights[li], prev);
    // multiply by activation derivative at the input of layer li
    if (p.hidden_activation == Activation::Tanh) {
      for (std::size_t n = 0; n < prev.values.size(); ++n) {
        const double a = layer_in.values[n];
        prev.values[n] *= 1.0 - a * a;
      }
    } else {
      for (std::size_t n = 0; n < prev.values.size(); ++n)
        if (layer_in.values[n] <= 0.0) prev.values[n] = 0.0;
    }
    delta = std::move(prev);
  }
  return grads;
}

inline void softmax_rows(Matrix& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* row = m.row(i);
    double mx = row[0];
    for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < m.cols; ++j) row[j] /= sum;
  }
}

inline std::vector<double> log_softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

// Mean cross entropy over the batch; gradient is (softmax - onehot)/batch.
inline std::pair<double, Matrix> cross_entropy_with_logits(
    const Matrix& logits, const std::vector<std::size_t>& labels) {
  if (labels.size() != logits.rows)
    throw std::invalid_argument("cross_entropy: label count mismatch");
  Matrix probs = logits;
  softmax_rows(probs);
  const double inv_batch = 1.0 / static_cast<double>(logits.rows);
  double loss = 0.0;
  Matrix grad = probs;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    if (labels[i] >= logits.cols)
      throw std::out_of_range("cross_entropy: label out of range");
    loss -= std::log(std::max(probs.at(i, labels[i]), 1e-300));
    grad.at(i, labels[i]) -= 1.0;
  }
  for (auto& v : grad.values) v *= inv_batch;
  return {loss * inv_batch, std::move(grad)};
}

// Mean squared error over all entries; gradient w.r.t. predictions.
inline std::pair<double, Matrix> mse_loss(const Matrix& predictions,
                                          const Matrix& targets) {
  if (!predictions.same_shape(targets))
    throw std::invalid_argument("mse_loss: shape mismatch");
  const double inv_n = 1.0 / static_cast<double>(predictions.values.size());
  double loss = 0.0;
  Matrix grad(predictions.rows, predictions.cols);
  for (std::size_t n = 0; n < predictions.values.size(); ++n) {
    const double d = predictions.values[n] - targets.values[n];
    loss += d * d;
    grad.values[n] = 2.0 * d * inv_n;
  }
  return {loss * inv_n, std::move(grad)};
}

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<std::vector<double>> first_moment_bias;
  std::vector<Matrix> second_moment;
  std::vector<std::vector<double>> second_moment_bias;
  std::size_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_num = 1e-8;
};

inline AdamState make_adam(const MlpParams& p, double learning_rate = 1e-3) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    s.first_moment.emplace_back(p.weights[l].rows, p.weights[l].cols);
    s.second_moment.emplace_back(p.weights[l].rows, p.weights[l].cols);
    s.first_moment_bias.emplace_back(p.biases[l].size(), 0.0);
    s.second_moment_bias.emplace_back(p.biases[l].size(), 0.0);
  }
  return s;
}

inline void adam_step(MlpParams& params, const MlpGradients& grads,
                      AdamState& state) {
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](double& w, double g, double& m, double& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    w -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon_num);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (!params.weights[l].same_shape(grads.weights[l]))
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    for (std::size_t n = 0; n < params.weights[l].values.size(); ++n)
      update(params.weights[l].values[n], grads.weights[l].values[n],
             state.first_moment[l].values[n], state.second_moment[l].values[n]);
    for (std::size_t n = 0; n < params.biases[l].size(); ++n)
      update(params.biases[l][n], grads.biases[l][n],
             state.first_moment_bias[l][n], state.second_moment_bias[l][n]);
  }
}

// Checkpoint format: one text header line "PCHID-NET-1 <activation> <head>",
// one line with decimal layer sizes, then raw little-endian doubles, weights
// then bias per layer. Round-trips bit-exactly on little-endian hosts.
inline void save_checkpoint(const MlpParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << "PCHID-NET-1 " << to_string(p.hidden_activation) << ' '
      << to_string(p.output_head) << '\n';
  for (std::size_t i = 0; i < p.layer_sizes.size(); ++i)
    out << (i ? " " : "") << p.layer_sizes[i];
  out << '\n';
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    out.write(reinterpret_cast<const char*>(p.weights[l].values.data()),
              static_cast<std::streamsize>(p.weights[l].values.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(p.biases[l].data()),
              static_cast<std::streamsize>(p.biases[l].size() * sizeof(double)));
  }
}

inline MlpParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string magic, act, head;
  in >> magic >> act >> head;
  if (magic != "PCHID-NET-1")
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::string line;
  std::getline(in, line);  // rest of header line
  std::getline(in, line);
  std::istringstream sizes(line);
  std::vector<std::size_t> layer_sizes;
  std::size_t s;
  while (sizes >> s) layer_sizes.push_back(s);
  MlpParams p = init_params(
      layer_sizes, act == "tanh" ? Activation::Tanh : Activation::Relu,
      head == "logits" ? OutputHead::Logits : OutputHead::Linear, 0);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    in.read(reinterpret_cast<char*>(p.weights[l].values.data()),
            static_cast<std::streamsize>(p.weights[l].values.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(p.biases[l].data()),
            static_cast<std::streamsize>(p.biases[l].size() * sizeof(double)));
  }
  if (!in) throw std::runtime_error("load_checkpoint: truncated " + path);
  return p;
}

}  // namespace pchid
