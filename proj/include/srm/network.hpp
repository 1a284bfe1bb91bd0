// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "srm/denoiser.hpp"
#include "srm/error.hpp"
#include "srm/process.hpp"
#include "srm/random.hpp"
#include "srm/schedule.hpp"
#include "srm/tsampler.hpp"

namespace srm {

/// Layout of the fully connected denoiser.
///
/// Input: per variable, its dim values followed by a sinusoidal embedding of
/// its noise level. A shared SiLU trunk feeds two linear heads: n*dim noise
/// predictions and n log-variances. Not permutation equivariant.
///
/// With `precondition` set, the noise head output F is mixed with the input:
/// eps_hat = b/(a^2+b^2) x_t + a/sqrt(a^2+b^2) F per variable, using that
/// schedule's (a, b). The first term is the optimal linear estimate for unit
/// variance data, so F only has to model the correction.
struct NetShape {
  int n = 0;
  int dim = 0;
  std::vector<int> hidden;
  int emb_freqs = 8;
  std::optional<ScheduleKind> precondition;

  int emb_width() const { return 2 * emb_freqs; }
  int input_width() const { return n * dim + n * emb_width(); }
  int eps_width() const { return n * dim; }
  int var_width() const { return n; }

  friend bool operator==(const NetShape&, const NetShape&) = default;
};

/// All weights in one flat vector; layer matrices are column-major views into it.
class NetParams {
 public:
  using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  struct Slot {
    Eigen::Index weight_offset;
    Eigen::Index bias_offset;
    int rows;
    int cols;
  };

  NetParams() = default;
  explicit NetParams(NetShape shape) : shape_(std::move(shape)) {
    detail::require(shape_.n > 0 && shape_.dim > 0, "NetParams: n and dim must be positive");
    detail::require(!shape_.hidden.empty(), "NetParams: at least one hidden layer required");
    Eigen::Index offset = 0;
    int in = shape_.input_width();
    auto add = [&](int out, int fan_in) {
      slots_.push_back({offset, offset + static_cast<Eigen::Index>(out) * fan_in, out, fan_in});
      offset += static_cast<Eigen::Index>(out) * fan_in + out;
    };
    for (int h : shape_.hidden) {
      detail::require(h > 0, "NetParams: hidden widths must be positive");
      add(h, in);
      in = h;
    }
    add(shape_.eps_width(), in);
    add(shape_.var_width(), in);
    flat_ = Vector::Zero(offset);
  }

  const NetShape& shape() const { return shape_; }
  std::size_t num_trunk_layers() const { return shape_.hidden.size(); }
  std::size_t eps_head() const { return slots_.size() - 2; }
  std::size_t var_head() const { return slots_.size() - 1; }
  const Slot& slot(std::size_t layer) const { return slots_[layer]; }
  std::size_t num_layers() const { return slots_.size(); }

  Vector& flat() { return flat_; }
  const Vector& flat() const { return flat_; }
  Eigen::Index size() const { return flat_.size(); }

  MatrixMap weight(std::size_t l) { return {flat_.data() + slots_[l].weight_offset, slots_[l].rows, slots_[l].cols}; }
  ConstMatrixMap weight(std::size_t l) const {
    return {flat_.data() + slots_[l].weight_offset, slots_[l].rows, slots_[l].cols};
  }
  VectorMap bias(std::size_t l) { return {flat_.data() + slots_[l].bias_offset, slots_[l].rows}; }
  ConstVectorMap bias(std::size_t l) const { return {flat_.data() + slots_[l].bias_offset, slots_[l].rows}; }

  /// Range [begin, end) of the flat vector covering layer l (weights then bias).
  std::pair<Eigen::Index, Eigen::Index> range(std::size_t l) const {
    return {slots_[l].weight_offset, slots_[l].bias_offset + slots_[l].rows};
  }

 private:
  NetShape shape_;
  std::vector<Slot> slots_;
  Vector flat_;
};

/// Fan-in scaled normal weights, zero biases (the log-variance bias included).
inline NetParams net_init(Rng& rng, int n, int dim, std::vector<int> hidden, int emb_freqs = 8,
                          std::optional<ScheduleKind> precondition = std::nullopt) {
  NetParams p(NetShape{n, dim, std::move(hidden), emb_freqs, precondition});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    auto w = p.weight(l);
    const double gain = l < p.num_trunk_layers() ? std::sqrt(2.0) : 1.0;
    const double scale = gain / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = scale * normal(rng);
    p.bias(l).setZero();
  }
  return p;
}

inline void noise_level_embedding(double t, int freqs, double* out) {
  for (int k = 0; k < freqs; ++k) {
    const double omega = std::numbers::pi * std::exp2(0.5 * k);
    out[2 * k] = std::sin(omega * t);
    out[2 * k + 1] = std::cos(omega * t);
  }
}

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline void fill_input_column(const NetShape& shape, const VariableSet& x_t, const NoiseLevels& t, double* col) {
  require(x_t.rows() == shape.n && x_t.cols() == shape.dim, "network: x_t shape does not match parameters");
  require(t.size() == shape.n, "network: one noise level per variable required");
  const int per_var = shape.dim + shape.emb_width();
  for (int i = 0; i < shape.n; ++i) {
    double* dst = col + static_cast<std::ptrdiff_t>(i) * per_var;
    for (int d = 0; d < shape.dim; ++d) dst[d] = x_t(i, d);
    noise_level_embedding(t[i], shape.emb_freqs, dst + shape.dim);
  }
}

/// (c_skip, c_out) for one variable; (0, 1) without preconditioning.
inline std::pair<double, double> precondition_coeffs(const NetShape& shape, double t) {
  if (!shape.precondition) return {0.0, 1.0};
  const auto [a, b] = NoiseSchedule(*shape.precondition)(t);
  const double norm2 = a * a + b * b;
  return {b / norm2, a / std::sqrt(norm2)};
}

/// Turn the raw head output in column `col` of `eps` into eps_hat; records c_out per row when asked.
inline void apply_preconditioning(const NetShape& shape, const VariableSet& x_t, const NoiseLevels& t,
                                  Eigen::MatrixXd& eps, Eigen::Index col, Eigen::MatrixXd* c_out) {
  for (int i = 0; i < shape.n; ++i) {
    const auto [skip, out] = precondition_coeffs(shape, t[i]);
    for (int d = 0; d < shape.dim; ++d) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * shape.dim + d;
      eps(row, col) = skip * x_t(i, d) + out * eps(row, col);
      if (c_out) (*c_out)(row, col) = out;
    }
  }
}

}  // namespace detail

/// Activations of a batched forward pass, kept for backpropagation.
struct ForwardCache {
  Eigen::MatrixXd input;                 ///< input_width x B
  std::vector<Eigen::MatrixXd> pre;      ///< trunk pre-activations
  std::vector<Eigen::MatrixXd> post;     ///< trunk activations
  Eigen::MatrixXd eps;                   ///< eps_width x B
  Eigen::MatrixXd log_var;               ///< n x B
};

inline Eigen::MatrixXd build_inputs(const NetShape& shape, const std::vector<VariableSet>& x_t,
                                    const std::vector<NoiseLevels>& t) {
  detail::require(x_t.size() == t.size(), "network: batch sizes differ");
  Eigen::MatrixXd input(shape.input_width(), static_cast<Eigen::Index>(x_t.size()));
  for (std::size_t b = 0; b < x_t.size(); ++b) {
    detail::fill_input_column(shape, x_t[b], t[b], input.col(static_cast<Eigen::Index>(b)).data());
  }
  return input;
}

inline ForwardCache forward(const NetParams& p, Eigen::MatrixXd input) {
  ForwardCache c;
  c.input = std::move(input);
  const Eigen::MatrixXd* h = &c.input;
  for (std::size_t l = 0; l < p.num_trunk_layers(); ++l) {
    Eigen::MatrixXd z = p.weight(l) * *h;
    z.colwise() += p.bias(l);
    c.post.push_back(z.unaryExpr([](double v) { return v * detail::sigmoid(v); }));
    c.pre.push_back(std::move(z));
    h = &c.post.back();
  }
  c.eps = p.weight(p.eps_head()) * *h;
  c.eps.colwise() += p.bias(p.eps_head());
  c.log_var = p.weight(p.var_head()) * *h;
  c.log_var.colwise() += p.bias(p.var_head());
  return c;
}

/// One forward pass. Fills eps_hat and log_var; x0_hat is left empty
/// (NetDenoiser derives it with the schedule).
inline DenoiserOutput net_evaluate(const NetParams& p, const VariableSet& x_t, const NoiseLevels& t) {
  const NetShape& s = p.shape();
  Eigen::MatrixXd input(s.input_width(), 1);
  detail::fill_input_column(s, x_t, t, input.data());
  ForwardCache c = forward(p, std::move(input));
  if (s.precondition) detail::apply_preconditioning(s, x_t, t, c.eps, 0, nullptr);
  DenoiserOutput out;
  out.eps_hat = Eigen::Map<const VariableSet>(c.eps.data(), s.n, s.dim);
  out.log_var = c.log_var.col(0);
  return out;
}

/// Corrupted training examples with their supervision targets.
struct TrainingBatch {
  std::vector<VariableSet> x_t;
  std::vector<VariableSet> eps;
  std::vector<NoiseLevels> t;

  std::size_t size() const { return x_t.size(); }
};

struct LossBreakdown {
  double total = 0.0;
  double eps_mse = 0.0;  ///< weighted noise regression term
  double nll = 0.0;      ///< Gaussian NLL of eps under sigma_hat (before lambda)
};

/// Batch-mean loss
///   sum_i w(t_i) ||eps_hat_i - eps_i||^2
///   + lambda * sum_i 0.5 * (dim * log sigma_i^2 + ||sg(eps_hat_i) - eps_i||^2 / sigma_i^2)
/// where sg() stops the gradient: the NLL only trains the variance path.
/// Preconditioned variables whose signal a(t) is below 1e-8 carry no NLL term.
/// Writes d(loss)/d(params) into `grad` when non-null.
inline LossBreakdown loss_and_gradient(const NetParams& p, const TrainingBatch& batch, const LossWeightTable& weights,
                                       double lambda_nll, Vector* grad) {
  detail::require(batch.size() > 0, "loss: empty batch");
  detail::require(lambda_nll >= 0.0, "loss: lambda_nll must be non-negative");
  const NetShape& s = p.shape();
  const auto B = static_cast<Eigen::Index>(batch.size());
  const double inv_b = 1.0 / static_cast<double>(B);

  ForwardCache c = forward(p, build_inputs(s, batch.x_t, batch.t));
  Eigen::MatrixXd c_out;
  if (s.precondition) {
    c_out.resize(s.eps_width(), B);
    for (Eigen::Index b = 0; b < B; ++b) {
      detail::apply_preconditioning(s, batch.x_t[static_cast<std::size_t>(b)], batch.t[static_cast<std::size_t>(b)],
                                    c.eps, b, &c_out);
    }
  }

  Eigen::MatrixXd d_eps(s.eps_width(), B);
  Eigen::MatrixXd d_lv(s.var_width(), B);
  LossBreakdown loss;
  for (Eigen::Index b = 0; b < B; ++b) {
    const VariableSet& eps = batch.eps[static_cast<std::size_t>(b)];
    const NoiseLevels& t = batch.t[static_cast<std::size_t>(b)];
    for (int i = 0; i < s.n; ++i) {
      const double w = weights(t[i]);
      double r2 = 0.0;
      for (int d = 0; d < s.dim; ++d) {
        const Eigen::Index row = static_cast<Eigen::Index>(i) * s.dim + d;
        const double r = c.eps(row, b) - eps(i, d);
        r2 += r * r;
        d_eps(row, b) = 2.0 * w * r * inv_b;
      }
      loss.eps_mse += w * r2;
      // A preconditioned variable with vanishing signal predicts its noise
      // exactly; its NLL has no minimum, so it is left out.
      if (s.precondition && c_out(static_cast<Eigen::Index>(i) * s.dim, b) < kSingularSignal) {
        d_lv(i, b) = 0.0;
        continue;
      }
      const double lv = c.log_var(i, b);
      const double inv_var = std::exp(-lv);
      loss.nll += 0.5 * (s.dim * lv + r2 * inv_var);
      d_lv(i, b) = lambda_nll * 0.5 * (s.dim - r2 * inv_var) * inv_b;
    }
  }
  loss.eps_mse *= inv_b;
  loss.nll *= inv_b;
  loss.total = loss.eps_mse + lambda_nll * loss.nll;
  if (grad == nullptr) return loss;

  if (s.precondition) d_eps.array() *= c_out.array();
  NetParams g(s);
  const Eigen::MatrixXd& h_last = p.num_trunk_layers() > 0 ? c.post.back() : c.input;
  g.weight(p.eps_head()).noalias() = d_eps * h_last.transpose();
  g.bias(p.eps_head()) = d_eps.rowwise().sum();
  g.weight(p.var_head()).noalias() = d_lv * h_last.transpose();
  g.bias(p.var_head()) = d_lv.rowwise().sum();

  Eigen::MatrixXd d_h = p.weight(p.eps_head()).transpose() * d_eps;
  d_h.noalias() += p.weight(p.var_head()).transpose() * d_lv;
  for (std::size_t l = p.num_trunk_layers(); l-- > 0;) {
    const Eigen::MatrixXd& z = c.pre[l];
    Eigen::MatrixXd d_z = d_h.cwiseProduct(z.unaryExpr([](double v) {
      const double sg = detail::sigmoid(v);
      return sg * (1.0 + v * (1.0 - sg));
    }));
    const Eigen::MatrixXd& below = l == 0 ? c.input : c.post[l - 1];
    g.weight(l).noalias() = d_z * below.transpose();
    g.bias(l) = d_z.rowwise().sum();
    if (l > 0) d_h.noalias() = p.weight(l).transpose() * d_z;
  }
  *grad = std::move(g.flat());
  return loss;
}

/// Adaptive-moment optimizer state.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Vector m;
  Vector v;
  std::int64_t step = 0;

  void apply(Vector& params, const Vector& grad) {
    if (m.size() != params.size()) {
      m = Vector::Zero(params.size());
      v = Vector::Zero(params.size());
    }
    ++step;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
  }
};

/// Draw levels per example and corrupt the clean batch.
inline TrainingBatch make_training_batch(Rng& rng, const NoiseSchedule& schedule, const TSamplerSpec& tsampler,
                                         const std::vector<const VariableSet*>& x0) {
  TrainingBatch batch;
  for (const VariableSet* sample : x0) {
    NoiseLevels t = sample_levels(rng, tsampler, static_cast<std::size_t>(sample->rows()));
    CorruptedSet c = forward_corrupt(rng, schedule, *sample, t);
    batch.x_t.push_back(std::move(c.x_t));
    batch.eps.push_back(std::move(c.eps));
    batch.t.push_back(std::move(t));
  }
  return batch;
}

/// Sample levels, corrupt, take one optimizer step. Throws TrainingDiverged on a non-finite loss.
inline LossBreakdown train_step(NetParams& params, AdamState& adam, const std::vector<const VariableSet*>& x0,
                                Rng& rng, const NoiseSchedule& schedule, const TSamplerSpec& tsampler,
                                const LossWeightTable& weights, double lambda_nll) {
  const TrainingBatch batch = make_training_batch(rng, schedule, tsampler, x0);
  Vector grad;
  const LossBreakdown loss = loss_and_gradient(params, batch, weights, lambda_nll, &grad);
  if (!std::isfinite(loss.total) || !grad.allFinite()) {
    std::ostringstream os;
    os << "training diverged at step " << adam.step + 1 << ": loss=" << loss.total << " eps_mse=" << loss.eps_mse
       << " nll=" << loss.nll;
    throw TrainingDiverged(os.str());
  }
  adam.apply(params.flat(), grad);
  return loss;
}

/// Network wrapped as a Denoiser. x0_hat inverts eps_hat where a(t) >= 1e-8
/// (zero where it vanishes) and is clipped to [-clip, clip].
class NetDenoiser {
 public:
  NetDenoiser(NetParams params, NoiseSchedule schedule, double clip = 1.0)
      : params_(std::move(params)), schedule_(schedule), clip_(clip) {}

  const NetParams& params() const { return params_; }
  NoiseSchedule schedule() const { return schedule_; }

  DenoiserOutput evaluate(const VariableSet& x_t, const NoiseLevels& t) const {
    DenoiserOutput out = net_evaluate(params_, x_t, t);
    out.x0_hat.resize(x_t.rows(), x_t.cols());
    for (Eigen::Index i = 0; i < x_t.rows(); ++i) {
      const Vector x0 = eps_to_x0(schedule_, x_t.row(i).transpose(), out.eps_hat.row(i).transpose(), t[i], true);
      out.x0_hat.row(i) = x0.transpose().cwiseMax(-clip_).cwiseMin(clip_);
    }
    return out;
  }

 private:
  NetParams params_;
  NoiseSchedule schedule_;
  double clip_;
};

// Checkpoint: one text header line, then little-endian float64 parameters.

inline void save_checkpoint(const NetParams& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  const NetShape& s = p.shape();
  f << "srm-net n=" << s.n << " dim=" << s.dim << " emb_freqs=" << s.emb_freqs << " hidden=";
  for (std::size_t i = 0; i < s.hidden.size(); ++i) f << (i ? "," : "") << s.hidden[i];
  f << " precondition=" << (s.precondition ? std::string(to_string(*s.precondition)) : std::string("none"));
  f << " params=" << p.size() << "\n";
  static_assert(sizeof(double) == 8);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    std::uint64_t bits;
    const double v = p.flat()[i];
    std::memcpy(&bits, &v, 8);
    char bytes[8];
    for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
    f.write(bytes, 8);
  }
  if (!f) throw std::runtime_error("failed writing checkpoint " + path);
}

inline NetParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path);
  std::string header;
  std::getline(f, header);
  std::istringstream hs(header);
  std::string magic, token;
  hs >> magic;
  if (magic != "srm-net") throw ContractError("not an srm-net checkpoint: " + path);
  NetShape shape;
  Eigen::Index declared = -1;
  while (hs >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
    if (key == "n") shape.n = std::stoi(value);
    else if (key == "dim") shape.dim = std::stoi(value);
    else if (key == "emb_freqs") shape.emb_freqs = std::stoi(value);
    else if (key == "params") declared = std::stol(value);
    else if (key == "precondition" && value != "none") shape.precondition = parse_schedule_kind(value);
    else if (key == "hidden") {
      std::istringstream vs(value);
      std::string w;
      while (std::getline(vs, w, ',')) shape.hidden.push_back(std::stoi(w));
    }
  }
  NetParams p(shape);
  if (declared != p.size()) throw ContractError("checkpoint parameter count does not match its shapes");
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    unsigned char bytes[8];
    if (!f.read(reinterpret_cast<char*>(bytes), 8)) throw ContractError("checkpoint truncated: " + path);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    double v;
    std::memcpy(&v, &bits, 8);
    p.flat()[i] = v;
  }
  return p;
}

}  // namespace srm
