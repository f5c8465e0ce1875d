#ifndef LEVYLAB_GRADNOISE_HPP
#define LEVYLAB_GRADNOISE_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "levylab/estimate.hpp"

namespace levylab::gradnoise {

struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;  // n x d, row-major
  std::vector<int> labels;

  std::span<const double> row(std::size_t i) const { return {features.data() + i * d, d}; }
};

enum class SynthSpec { blobs, rings };

// "gaussian-blobs"/"blobs" or "rings"/"ring-mixture"; anything else raises
// ParamError.
SynthSpec parse_synth_spec(const std::string& name);

// Reproducible labeled dataset with classes balanced within one example.
// blobs: class means `separation` apart in a random direction, unit
// isotropic noise. rings: concentric circles of radius 1 + class index in
// the first two coordinates with radial jitter.
Dataset synth_dataset(std::size_t n, std::size_t d, std::size_t num_classes, SynthSpec spec,
                      std::uint64_t seed, double separation = 3.0);

// Reads the big-endian IDX pair used by MNIST: images with magic
// 0x00000803 (count, rows, cols, then one byte per pixel, scaled to [0,1])
// and labels with magic 0x00000801. Counts must match. max_items > 0 keeps
// only the first max_items examples. Malformed input raises FormatError
// naming the byte offset.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t max_items = 0);

// Comma-separated file with a header row; the column named "label" holds
// nonnegative integer class indices, every other column is a feature.
Dataset load_csv(const std::string& path);

enum class Loss { nll, hinge };

// A differentiable classifier with hand-coded gradients. loss/grad average
// over the given example subset; grad is exactly the gradient of loss
// (finite-difference checked in the tests) and exactly the mean of
// per-example gradients.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::size_t param_count() const = 0;
  virtual double loss(std::span<const double> w, const Dataset& data,
                      std::span<const std::size_t> subset) const = 0;
  virtual void grad(std::span<const double> w, const Dataset& data,
                    std::span<const std::size_t> subset, std::span<double> out) const = 0;
  virtual void logits(std::span<const double> w, const Dataset& data, std::size_t example,
                      std::span<double> out) const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual std::string name() const = 0;

  // Symmetric uniform fan-in initialization: weights U(+-1/sqrt(fan_in)),
  // biases zero.
  virtual std::vector<double> init(std::uint64_t seed) const = 0;
};

using ModelPtr = std::shared_ptr<const Model>;

// Multinomial logistic regression (a linear model).
ModelPtr make_logistic(std::size_t d, std::size_t classes, Loss loss = Loss::nll);

// Fully connected network with tanh hidden layers and linear output.
ModelPtr make_mlp(std::size_t d, std::vector<std::size_t> hidden, std::size_t classes,
                  Loss loss = Loss::nll);

// Fraction of examples whose argmax logit matches the label.
double accuracy(const Model& model, std::span<const double> w, const Dataset& data);

// Concatenated stochastic-gradient-noise coordinates from disjoint
// minibatches: U^i = grad over batch i minus the full gradient, flattened
// in batch order. K = p * floor(n/b); when b does not divide n the trailing
// examples are excluded from this measurement (including its full
// gradient), which keeps sum_i U^i = 0 exactly.
struct NoiseBundle {
  std::vector<double> values;
  std::size_t p = 0;
  std::size_t n = 0;  // examples used (after any remainder drop)
  std::size_t b = 0;
  std::size_t iteration = 0;
};

NoiseBundle noise_bundle(const Model& model, std::span<const double> w, const Dataset& data,
                         std::size_t b, std::uint64_t seed);

// Test harness: per-batch gradients replaced by full_grad + xi^i with xi
// i.i.d. SaS(alpha0) of the given scale, so the bundle holds exactly the
// injected noise while flowing through the same flatten/concat path.
NoiseBundle injected_noise_bundle(std::size_t p, std::size_t num_batches, double alpha0,
                                  double scale, std::uint64_t seed);

struct MeasurePoint {
  std::size_t iteration = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  estimate::TailEstimate tail;
};

struct MeasureConfig {
  std::size_t b = 500;
  double eta = 0.1;
  std::size_t iterations = 1000;
  std::size_t log_every = 100;
  std::uint64_t seed = 0;
};

// Plain minibatch SGD (no momentum, no weight decay) from the model's
// fan-in initialization. Training draws shuffled epochs and keeps the
// ragged final batch; every log_every iterations (including iteration 0) a
// fresh disjoint partition of size b yields a NoiseBundle whose tail index
// is estimated with choose_grouping. Non-finite loss aborts with
// BlowupError.
std::vector<MeasurePoint> measure_run(const Model& model, const Dataset& data,
                                      const MeasureConfig& config);

}  // namespace levylab::gradnoise

#endif  // LEVYLAB_GRADNOISE_HPP
