#pragma once

// Single-hidden-layer classifier (input -> ReLU hidden -> raw logits) trained
// with plain mini-batch SGD. Three objectives are supported:
//
//   cross-entropy  mean over samples of -log softmax(z)[y]
//   MAE            mean over samples and classes of |t - z| on raw logits
//   KL             mean over samples of KL(softmax(t) || softmax(z)), with
//                  target probabilities clamped to >= 1e-12
//
// `loss_value` reports the KL objective summed over samples; training uses
// the per-sample mean so the step size does not depend on the batch size.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "logitforge/logits.hpp"
#include "logitforge/matrix.hpp"
#include "logitforge/rng.hpp"

namespace logitforge {

enum class LossKind { kCrossEntropy, kMae, kKl };

struct TrainConfig {
  int epochs = 1;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  LossKind loss_kind = LossKind::kCrossEntropy;
};

struct LayerDims {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;

  friend bool operator==(const LayerDims&, const LayerDims&) = default;
};

struct Gradients {
  Matrix w1, w2;
  std::vector<double> b1, b2;
};

class Classifier {
 public:
  // Glorot-uniform weights, zero biases, seeded.
  Classifier(LayerDims dims, std::uint64_t seed);

  const LayerDims& dims() const noexcept { return dims_; }
  std::uint64_t seed() const noexcept { return seed_; }

  Matrix& w1() noexcept { return w1_; }
  Matrix& w2() noexcept { return w2_; }
  std::vector<double>& b1() noexcept { return b1_; }
  std::vector<double>& b2() noexcept { return b2_; }
  const Matrix& w1() const noexcept { return w1_; }
  const Matrix& w2() const noexcept { return w2_; }
  const std::vector<double>& b1() const noexcept { return b1_; }
  const std::vector<double>& b2() const noexcept { return b2_; }

  // Layer order: w1 (H x D row-major), b1, w2 (C x H), b2.
  std::size_t parameter_count() const noexcept;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);

  // Mini-batch order stream; advanced by every training call.
  Rng& shuffle_rng() noexcept { return rng_; }

  bool same_parameters(const Classifier& other) const;

 private:
  LayerDims dims_;
  std::uint64_t seed_;
  Matrix w1_, w2_;
  std::vector<double> b1_, b2_;
  Rng rng_;
};

// Raw pre-softmax outputs, one row per sample.
Matrix forward(const Classifier& model, const Matrix& x);
LogitBatch predict_logits(const Classifier& model, const Matrix& x);

// Targets for one objective: class ids for cross-entropy, a logit matrix for
// MAE and KL (KL maps it through softmax internally).
struct LossTargets {
  std::span<const int> labels;
  const Matrix* logits = nullptr;
};

// Training objective on (x, targets) and, when `grad` is non-null, its exact
// gradient with respect to every parameter.
double objective(const Classifier& model, const Matrix& x, const LossTargets& targets,
                 LossKind kind, Gradients* grad = nullptr);

Classifier train_supervised(Classifier model, const Matrix& x, std::span<const int> labels,
                            const TrainConfig& cfg, std::vector<double>* step_losses = nullptr);

Classifier distill(Classifier model, const Matrix& x0, const LogitBatch& targets,
                   const TrainConfig& cfg, std::vector<double>* step_losses = nullptr);

// Loss of already-computed predictions against targets:
//   CE:  predictions are probabilities, targets one-hot rows; mean over samples
//   MAE: raw values; mean over samples and classes
//   KL:  both row-wise distributions; summed over samples
double loss_value(LossKind kind, const Matrix& predictions, const Matrix& targets);

Matrix softmax_rows(const Matrix& logits, double temperature = 1.0);

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;  // mean cross-entropy
};

Evaluation evaluate(const Classifier& model, const Matrix& x, std::span<const int> labels);

// Element-wise parameter mean; throws kArchitectureMismatch on differing dims.
Classifier average_parameters(std::span<const Classifier> models);

// Flat checkpoint: "LFMD", u32 version, u64 dims (D, H, C), then the
// parameters as little-endian IEEE-754 doubles in layer order.
void save_checkpoint(std::ostream& out, const Classifier& model);
void save_checkpoint(const std::filesystem::path& path, const Classifier& model);
Classifier load_checkpoint(std::istream& in);
Classifier load_checkpoint(const std::filesystem::path& path);

}  // namespace logitforge
