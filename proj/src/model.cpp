#include "logitforge/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "logitforge/error.hpp"
#include "logitforge/kernels.hpp"

namespace logitforge {
namespace {

constexpr double kProbFloor = 1e-12;
constexpr std::uint32_t kCheckpointVersion = 1;

void glorot_fill(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.values()) v = uniform(rng, -limit, limit);
}

void softmax_inplace(std::span<double> row, double temperature) {
  double top = row[0] / temperature;
  for (double v : row) top = std::max(top, v / temperature);
  double sum = 0.0;
  for (double& v : row) {
    v = std::exp(v / temperature - top);
    sum += v;
  }
  for (double& v : row) v /= sum;
}

struct Activations {
  Matrix z1;  // pre-activation hidden
  Matrix a1;  // relu(z1)
  Matrix z2;  // logits
};

Activations run_forward(const Classifier& model, const Matrix& x) {
  if (x.cols() != model.dims().input) {
    throw Error(ErrorCode::kDimensionMismatch, "sample dimension " + std::to_string(x.cols()) +
                                                   " but classifier expects " +
                                                   std::to_string(model.dims().input));
  }
  Activations act;
  kernels::matmul_nt(x, model.w1(), model.b1(), act.z1);
  act.a1 = act.z1;
  for (double& v : act.a1.values()) v = std::max(0.0, v);
  kernels::matmul_nt(act.a1, model.w2(), model.b2(), act.z2);
  return act;
}

// dL/dz2 for the chosen objective, averaged over the rows of z2.
double output_gradient(const Matrix& z2, const LossTargets& targets, LossKind kind, Matrix* g) {
  const std::size_t n = z2.rows();
  const std::size_t c = z2.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (g) *g = Matrix(n, c);
  double loss = 0.0;
  switch (kind) {
    case LossKind::kCrossEntropy: {
      if (targets.labels.size() != n) throw Error(ErrorCode::kDimensionMismatch, "label count");
      const Matrix q = softmax_rows(z2);
      for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<std::size_t>(targets.labels[i]);
        loss -= std::log(std::max(q(i, y), 1e-300));
        if (g) {
          for (std::size_t j = 0; j < c; ++j) (*g)(i, j) = q(i, j) * inv_n;
          (*g)(i, y) -= inv_n;
        }
      }
      return loss * inv_n;
    }
    case LossKind::kMae: {
      const Matrix& t = *targets.logits;
      const double scale = inv_n / static_cast<double>(c);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          const double d = z2(i, j) - t(i, j);
          loss += std::abs(d);
          if (g) (*g)(i, j) = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
        }
      }
      return loss * scale;
    }
    case LossKind::kKl: {
      Matrix p = softmax_rows(*targets.logits);
      for (double& v : p.values()) v = std::max(v, kProbFloor);
      const Matrix q = softmax_rows(z2);
      for (std::size_t i = 0; i < n; ++i) {
        double mass = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          loss += p(i, j) * std::log(p(i, j) / std::max(q(i, j), 1e-300));
          mass += p(i, j);
        }
        if (g) {
          for (std::size_t j = 0; j < c; ++j) (*g)(i, j) = (q(i, j) * mass - p(i, j)) * inv_n;
        }
      }
      return loss * inv_n;
    }
  }
  return loss;
}

void column_sums(const Matrix& m, std::vector<double>& out) {
  out.assign(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
  }
}

void check_targets(const Classifier& model, const Matrix& x, const LossTargets& targets,
                   LossKind kind) {
  if (kind == LossKind::kCrossEntropy) {
    if (targets.labels.size() != x.rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "label count differs from sample count");
    }
    for (int y : targets.labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= model.dims().classes) {
        throw Error(ErrorCode::kUnknownClass, "label " + std::to_string(y) + " outside [0, C)");
      }
    }
  } else {
    if (!targets.logits || targets.logits->rows() != x.rows() ||
        targets.logits->cols() != model.dims().classes) {
      throw Error(ErrorCode::kDimensionMismatch, "target logits are not aligned with samples");
    }
  }
}

void sgd_step(Classifier& model, const Gradients& g, double lr) {
  auto step = [lr](std::span<double> p, std::span<const double> d) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * d[i];
  };
  step(model.w1().values(), g.w1.values());
  step(model.b1(), g.b1);
  step(model.w2().values(), g.w2.values());
  step(model.b2(), g.b2);
}

Classifier run_training(Classifier model, const Matrix& x, const LossTargets& targets,
                        const TrainConfig& cfg, std::vector<double>* step_losses) {
  if (x.rows() == 0) throw Error(ErrorCode::kEmptyDataset, "no samples to train on");
  if (cfg.epochs < 0) throw Error(ErrorCode::kInvalidArgument, "epochs must be non-negative");
  if (!(cfg.learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (cfg.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  check_targets(model, x, targets, cfg.loss_kind);

  std::vector<std::size_t> order(x.rows());
  std::vector<int> batch_labels;
  Gradients grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), model.shuffle_rng());
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix xb = x.gather_rows(idx);
      LossTargets tb;
      Matrix target_rows;
      if (cfg.loss_kind == LossKind::kCrossEntropy) {
        batch_labels.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) batch_labels[i] = targets.labels[idx[i]];
        tb.labels = batch_labels;
      } else {
        target_rows = targets.logits->gather_rows(idx);
        tb.logits = &target_rows;
      }
      const double loss = objective(model, xb, tb, cfg.loss_kind, &grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kNonFiniteLoss, "loss became non-finite; learning rate too high?");
      }
      if (step_losses) step_losses->push_back(loss);
      sgd_step(model, grad, cfg.learning_rate);
    }
  }
  for (double v : model.parameters()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteLoss, "parameters diverged");
  }
  return model;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int ch = in.get();
    if (ch == std::char_traits<char>::eof()) throw Error(ErrorCode::kTruncatedFile, "checkpoint ends early");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(ch)) << (8 * i);
  }
  return v;
}

}  // namespace

Classifier::Classifier(LayerDims dims, std::uint64_t seed)
    : dims_(dims),
      seed_(seed),
      w1_(dims.hidden, dims.input),
      w2_(dims.classes, dims.hidden),
      b1_(dims.hidden, 0.0),
      b2_(dims.classes, 0.0),
      rng_(derive_seed(seed, "classifier.shuffle")) {
  if (dims.input == 0 || dims.hidden == 0 || dims.classes < 2) {
    throw Error(ErrorCode::kInvalidArgument, "classifier needs D >= 1, H >= 1, C >= 2");
  }
  Rng init(derive_seed(seed, "classifier.init"));
  glorot_fill(w1_, init);
  glorot_fill(w2_, init);
}

std::size_t Classifier::parameter_count() const noexcept {
  return w1_.size() + b1_.size() + w2_.size() + b2_.size();
}

std::vector<double> Classifier::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  flat.insert(flat.end(), w1_.values().begin(), w1_.values().end());
  flat.insert(flat.end(), b1_.begin(), b1_.end());
  flat.insert(flat.end(), w2_.values().begin(), w2_.values().end());
  flat.insert(flat.end(), b2_.begin(), b2_.end());
  return flat;
}

void Classifier::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "parameter vector length");
  }
  auto it = flat.begin();
  auto take = [&it](std::span<double> dst) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
    it += static_cast<std::ptrdiff_t>(dst.size());
  };
  take(w1_.values());
  take(b1_);
  take(w2_.values());
  take(b2_);
}

bool Classifier::same_parameters(const Classifier& other) const {
  return dims_ == other.dims_ && w1_ == other.w1_ && w2_ == other.w2_ && b1_ == other.b1_ &&
         b2_ == other.b2_;
}

Matrix forward(const Classifier& model, const Matrix& x) { return run_forward(model, x).z2; }

LogitBatch predict_logits(const Classifier& model, const Matrix& x) {
  return LogitBatch(forward(model, x));
}

double objective(const Classifier& model, const Matrix& x, const LossTargets& targets,
                 LossKind kind, Gradients* grad) {
  check_targets(model, x, targets, kind);
  const Activations act = run_forward(model, x);
  Matrix g2;
  const double loss = output_gradient(act.z2, targets, kind, grad ? &g2 : nullptr);
  if (!grad) return loss;

  kernels::matmul_tn(g2, act.a1, grad->w2);
  column_sums(g2, grad->b2);
  Matrix g1;
  kernels::matmul_nn(g2, model.w2(), g1);
  for (std::size_t e = 0; e < g1.size(); ++e) {
    if (act.z1.values()[e] <= 0.0) g1.values()[e] = 0.0;
  }
  kernels::matmul_tn(g1, x, grad->w1);
  column_sums(g1, grad->b1);
  return loss;
}

Classifier train_supervised(Classifier model, const Matrix& x, std::span<const int> labels,
                            const TrainConfig& cfg, std::vector<double>* step_losses) {
  if (cfg.loss_kind != LossKind::kCrossEntropy) {
    throw Error(ErrorCode::kInvalidArgument, "supervised training uses the cross-entropy loss");
  }
  LossTargets t;
  t.labels = labels;
  return run_training(std::move(model), x, t, cfg, step_losses);
}

Classifier distill(Classifier model, const Matrix& x0, const LogitBatch& targets,
                   const TrainConfig& cfg, std::vector<double>* step_losses) {
  if (cfg.loss_kind == LossKind::kCrossEntropy) {
    throw Error(ErrorCode::kInvalidArgument, "distillation uses the MAE or KL loss");
  }
  LossTargets t;
  t.logits = &targets.matrix();
  return run_training(std::move(model), x0, t, cfg, step_losses);
}

Matrix softmax_rows(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::kNonPositiveTemperature, "softmax temperature must be positive");
  }
  Matrix out = logits;
  for (std::size_t i = 0; i < out.rows(); ++i) softmax_inplace(out.row(i), temperature);
  return out;
}

double loss_value(LossKind kind, const Matrix& predictions, const Matrix& targets) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "predictions and targets differ in shape");
  }
  const std::size_t n = predictions.rows();
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "no rows");
  double total = 0.0;
  switch (kind) {
    case LossKind::kCrossEntropy:
      for (std::size_t e = 0; e < predictions.size(); ++e) {
        const double t = targets.values()[e];
        if (t != 0.0) total -= t * std::log(predictions.values()[e]);
      }
      return total / static_cast<double>(n);
    case LossKind::kMae:
      for (std::size_t e = 0; e < predictions.size(); ++e) {
        total += std::abs(targets.values()[e] - predictions.values()[e]);
      }
      return total / static_cast<double>(predictions.size());
    case LossKind::kKl: {
      auto check = [](const Matrix& m, const char* which) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
          double s = 0.0;
          for (double v : m.row(i)) {
            if (!(v >= 0.0)) throw Error(ErrorCode::kInvalidDistribution, std::string(which) + " has a negative entry");
            s += v;
          }
          if (std::abs(s - 1.0) > 1e-9) {
            throw Error(ErrorCode::kInvalidDistribution, std::string(which) + " row does not sum to 1");
          }
        }
      };
      check(predictions, "predictions");
      check(targets, "targets");
      for (std::size_t e = 0; e < predictions.size(); ++e) {
        const double p = targets.values()[e];
        if (p > 0.0) total += p * std::log(p / predictions.values()[e]);
      }
      return total;
    }
  }
  return total;
}

Evaluation evaluate(const Classifier& model, const Matrix& x, std::span<const int> labels) {
  if (labels.size() != x.rows()) throw Error(ErrorCode::kDimensionMismatch, "label count");
  if (x.rows() == 0) throw Error(ErrorCode::kEmptyDataset, "no samples to evaluate");
  const Matrix z = forward(model, x);
  LossTargets t;
  t.labels = labels;
  Evaluation ev;
  ev.loss = output_gradient(z, t, LossKind::kCrossEntropy, nullptr);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    if (static_cast<int>(argmax_index(z.row(i))) == labels[i]) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(x.rows());
  return ev;
}

Classifier average_parameters(std::span<const Classifier> models) {
  if (models.empty()) throw Error(ErrorCode::kInvalidArgument, "no models to average");
  std::vector<double> sum(models[0].parameter_count(), 0.0);
  for (const Classifier& m : models) {
    if (!(m.dims() == models[0].dims())) {
      throw Error(ErrorCode::kArchitectureMismatch, "models disagree on layer dimensions");
    }
    const auto p = m.parameters();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += p[i];
  }
  for (double& v : sum) v /= static_cast<double>(models.size());
  Classifier out = models[0];
  out.set_parameters(sum);
  return out;
}

void save_checkpoint(std::ostream& out, const Classifier& model) {
  out.write("LFMD", 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, model.dims().input);
  put_u64(out, model.dims().hidden);
  put_u64(out, model.dims().classes);
  for (double v : model.parameters()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void save_checkpoint(const std::filesystem::path& path, const Classifier& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  save_checkpoint(out, model);
}

Classifier load_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4) throw Error(ErrorCode::kTruncatedFile, "checkpoint ends early");
  if (std::string(magic, 4) != "LFMD") throw Error(ErrorCode::kBadMagic, "not a classifier checkpoint");
  const auto version = static_cast<std::uint32_t>(get_le(in, 4));
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kBadMagic, "unsupported checkpoint version " + std::to_string(version));
  }
  LayerDims dims;
  dims.input = get_le(in, 8);
  dims.hidden = get_le(in, 8);
  dims.classes = get_le(in, 8);
  Classifier model(dims, 0);
  std::vector<double> flat(model.parameter_count());
  for (double& v : flat) v = std::bit_cast<double>(get_le(in, 8));
  model.set_parameters(flat);
  return model;
}

Classifier load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace logitforge
