#include "levylab/gradnoise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>

#include "levylab/errors.hpp"
#include "levylab/numerics.hpp"
#include "levylab/rng.hpp"
#include "levylab/stable.hpp"

namespace levylab::gradnoise {

namespace {

void check_dataset(const Dataset& data) {
  if (data.n == 0 || data.d == 0) throw ParamError("dataset must have n >= 1 and d >= 1");
  if (data.num_classes < 1) throw ParamError("dataset must have at least one class");
  if (data.features.size() != data.n * data.d || data.labels.size() != data.n)
    throw ParamError("dataset buffers do not match n and d");
  for (int label : data.labels)
    if (label < 0 || static_cast<std::size_t>(label) >= data.num_classes)
      throw ParamError("dataset label out of range");
}

// log(sum exp(z)) with the max subtracted.
double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

// Per-example loss of the logit vector and, when dz is non-null, its
// gradient with respect to the logits.
double logit_loss(Loss loss, std::span<const double> z, int label, std::span<double> dz) {
  const std::size_t c = z.size();
  const auto y = static_cast<std::size_t>(label);
  if (loss == Loss::nll) {
    const double lse = log_sum_exp(z);
    if (!dz.empty()) {
      for (std::size_t k = 0; k < c; ++k) dz[k] = std::exp(z[k] - lse);
      dz[y] -= 1.0;
    }
    return lse - z[y];
  }
  // Multiclass linear hinge: sum_{k != y} max(0, 1 + z_k - z_y).
  double total = 0.0;
  if (!dz.empty()) std::fill(dz.begin(), dz.end(), 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    if (k == y) continue;
    const double margin = 1.0 + z[k] - z[y];
    if (margin > 0.0) {
      total += margin;
      if (!dz.empty()) {
        dz[k] += 1.0;
        dz[y] -= 1.0;
      }
    }
  }
  return total;
}

class LogisticModel final : public Model {
 public:
  LogisticModel(std::size_t d, std::size_t classes, Loss loss)
      : d_(d), c_(classes), loss_(loss) {
    if (d == 0 || classes < 2) throw ParamError("logistic model needs d >= 1 and classes >= 2");
  }

  std::size_t param_count() const override { return c_ * (d_ + 1); }
  std::size_t num_classes() const override { return c_; }
  std::string name() const override { return "logistic"; }

  void logits(std::span<const double> w, const Dataset& data, std::size_t example,
              std::span<double> out) const override {
    const auto x = data.row(example);
    const double* weights = w.data();          // c x d
    const double* bias = w.data() + c_ * d_;   // c
    for (std::size_t k = 0; k < c_; ++k) {
      double z = bias[k];
      const double* row = weights + k * d_;
      for (std::size_t j = 0; j < d_; ++j) z += row[j] * x[j];
      out[k] = z;
    }
  }

  double loss(std::span<const double> w, const Dataset& data,
              std::span<const std::size_t> subset) const override {
    if (subset.empty()) throw DataError("model loss: empty subset");
    std::vector<double> z(c_);
    KahanSum total;
    for (std::size_t i : subset) {
      logits(w, data, i, z);
      total.add(logit_loss(loss_, z, data.labels[i], {}));
    }
    return total.value() / static_cast<double>(subset.size());
  }

  void grad(std::span<const double> w, const Dataset& data, std::span<const std::size_t> subset,
            std::span<double> out) const override {
    if (subset.empty()) throw DataError("model grad: empty subset");
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> z(c_), dz(c_);
    double* gw = out.data();
    double* gb = out.data() + c_ * d_;
    for (std::size_t i : subset) {
      logits(w, data, i, z);
      logit_loss(loss_, z, data.labels[i], dz);
      const auto x = data.row(i);
      for (std::size_t k = 0; k < c_; ++k) {
        double* grow = gw + k * d_;
        for (std::size_t j = 0; j < d_; ++j) grow[j] += dz[k] * x[j];
        gb[k] += dz[k];
      }
    }
    const double inv = 1.0 / static_cast<double>(subset.size());
    for (double& g : out) g *= inv;
  }

  std::vector<double> init(std::uint64_t seed) const override {
    std::vector<double> w(param_count(), 0.0);
    SplitMix64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_));
    for (std::size_t i = 0; i < c_ * d_; ++i) w[i] = rng.uniform(-bound, bound);
    return w;  // biases stay zero
  }

 private:
  std::size_t d_, c_;
  Loss loss_;
};

// Fully connected tanh network. Parameter layout per layer: the weight
// matrix (out x in, row-major) followed by the bias vector.
class MlpModel final : public Model {
 public:
  MlpModel(std::size_t d, std::vector<std::size_t> hidden, std::size_t classes, Loss loss)
      : loss_(loss) {
    if (d == 0 || classes < 2) throw ParamError("mlp needs d >= 1 and classes >= 2");
    for (std::size_t h : hidden)
      if (h == 0) throw ParamError("mlp hidden widths must be >= 1");
    sizes_.push_back(d);
    for (std::size_t h : hidden) sizes_.push_back(h);
    sizes_.push_back(classes);
    offsets_.push_back(0);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
      offsets_.push_back(offsets_.back() + sizes_[l + 1] * (sizes_[l] + 1));
  }

  std::size_t param_count() const override { return offsets_.back(); }
  std::size_t num_classes() const override { return sizes_.back(); }
  std::string name() const override {
    std::string s = "mlp(";
    for (std::size_t l = 1; l + 1 < sizes_.size(); ++l)
      s += (l > 1 ? "," : "") + std::to_string(sizes_[l]);
    return s + ")";
  }

  void logits(std::span<const double> w, const Dataset& data, std::size_t example,
              std::span<double> out) const override {
    std::vector<std::vector<double>> acts;
    forward(w, data.row(example), acts);
    std::copy(acts.back().begin(), acts.back().end(), out.begin());
  }

  double loss(std::span<const double> w, const Dataset& data,
              std::span<const std::size_t> subset) const override {
    if (subset.empty()) throw DataError("model loss: empty subset");
    std::vector<std::vector<double>> acts;
    KahanSum total;
    for (std::size_t i : subset) {
      forward(w, data.row(i), acts);
      total.add(logit_loss(loss_, acts.back(), data.labels[i], {}));
    }
    return total.value() / static_cast<double>(subset.size());
  }

  void grad(std::span<const double> w, const Dataset& data, std::span<const std::size_t> subset,
            std::span<double> out) const override {
    if (subset.empty()) throw DataError("model grad: empty subset");
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t layers = sizes_.size() - 1;
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> delta(layers + 1);
    for (std::size_t l = 0; l <= layers; ++l) delta[l].resize(sizes_[l]);

    for (std::size_t i : subset) {
      forward(w, data.row(i), acts);
      logit_loss(loss_, acts.back(), data.labels[i], delta[layers]);
      for (std::size_t l = layers; l-- > 0;) {
        const std::size_t in = sizes_[l];
        const std::size_t on = sizes_[l + 1];
        const double* wl = w.data() + offsets_[l];
        double* gl = out.data() + offsets_[l];
        const auto& a = acts[l];
        const auto& d_out = delta[l + 1];
        // Accumulate weight and bias gradients.
        for (std::size_t k = 0; k < on; ++k) {
          const double dk = d_out[k];
          double* grow = gl + k * in;
          for (std::size_t j = 0; j < in; ++j) grow[j] += dk * a[j];
          gl[on * in + k] += dk;
        }
        if (l == 0) continue;
        // Backpropagate through the tanh activation of layer l.
        auto& d_in = delta[l];
        for (std::size_t j = 0; j < in; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < on; ++k) s += wl[k * in + j] * d_out[k];
          d_in[j] = s * (1.0 - a[j] * a[j]);
        }
      }
    }
    const double inv = 1.0 / static_cast<double>(subset.size());
    for (double& g : out) g *= inv;
  }

  std::vector<double> init(std::uint64_t seed) const override {
    std::vector<double> w(param_count(), 0.0);
    SplitMix64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const std::size_t in = sizes_[l];
      const std::size_t on = sizes_[l + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      double* wl = w.data() + offsets_[l];
      for (std::size_t k = 0; k < on * in; ++k) wl[k] = rng.uniform(-bound, bound);
      // biases (the trailing `on` entries) stay zero
    }
    return w;
  }

 private:
  void forward(std::span<const double> w, std::span<const double> x,
               std::vector<std::vector<double>>& acts) const {
    const std::size_t layers = sizes_.size() - 1;
    acts.resize(layers + 1);
    acts[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = sizes_[l];
      const std::size_t on = sizes_[l + 1];
      const double* wl = w.data() + offsets_[l];
      const double* bl = wl + on * in;
      acts[l + 1].resize(on);
      for (std::size_t k = 0; k < on; ++k) {
        double z = bl[k];
        const double* row = wl + k * in;
        for (std::size_t j = 0; j < in; ++j) z += row[j] * acts[l][j];
        acts[l + 1][k] = (l + 1 < layers) ? std::tanh(z) : z;
      }
    }
  }

  std::vector<std::size_t> sizes_;    // layer widths, input first
  std::vector<std::size_t> offsets_;  // parameter offset per layer
  Loss loss_;
};

std::vector<std::size_t> shuffled_indices(std::size_t n, SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace

SynthSpec parse_synth_spec(const std::string& name) {
  if (name == "blobs" || name == "gaussian-blobs") return SynthSpec::blobs;
  if (name == "rings" || name == "ring-mixture") return SynthSpec::rings;
  throw ParamError("unknown dataset kind '" + name + "' (use gaussian-blobs or ring-mixture)");
}

Dataset synth_dataset(std::size_t n, std::size_t d, std::size_t num_classes, SynthSpec spec,
                      std::uint64_t seed, double separation) {
  if (n == 0 || d == 0 || num_classes == 0)
    throw ParamError("synth_dataset: n, d and num_classes must be >= 1");
  if (spec == SynthSpec::rings && d < 2)
    throw ParamError("synth_dataset: ring mixture needs d >= 2");

  Dataset data;
  data.n = n;
  data.d = d;
  data.num_classes = num_classes;
  data.features.resize(n * d);
  data.labels.resize(n);

  // Round-robin labels keep classes balanced within one example.
  for (std::size_t i = 0; i < n; ++i) data.labels[i] = static_cast<int>(i % num_classes);

  if (spec == SynthSpec::blobs) {
    // Class means: `separation` apart from the origin in a random direction.
    std::vector<double> means(num_classes * d);
    SplitMix64 mean_rng(derive_seed(seed, 0x6d));
    for (std::size_t c = 0; c < num_classes; ++c) {
      double norm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        means[c * d + j] = mean_rng.normal();
        norm += means[c * d + j] * means[c * d + j];
      }
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < d; ++j) means[c * d + j] *= separation / norm;
    }
    SplitMix64 rng(derive_seed(seed, 0x78));
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(data.labels[i]);
      for (std::size_t j = 0; j < d; ++j)
        data.features[i * d + j] = means[c * d + j] + rng.normal();
    }
  } else {
    SplitMix64 rng(derive_seed(seed, 0x72));
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(data.labels[i]);
      const double radius = 1.0 + static_cast<double>(c) + 0.1 * rng.normal();
      const double angle = rng.uniform(0.0, 6.283185307179586);
      data.features[i * d + 0] = radius * std::cos(angle);
      data.features[i * d + 1] = radius * std::sin(angle);
      for (std::size_t j = 2; j < d; ++j) data.features[i * d + j] = 0.1 * rng.normal();
    }
  }
  return data;
}

namespace {

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::string& file) {
  if (offset + 4 > buf.size())
    throw FormatError(file + ": truncated header, need 4 bytes at offset " +
                      std::to_string(offset) + ", file has " + std::to_string(buf.size()));
  return (static_cast<std::uint32_t>(buf[offset]) << 24) |
         (static_cast<std::uint32_t>(buf[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[offset + 2]) << 8) |
         static_cast<std::uint32_t>(buf[offset + 3]);
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t max_items) {
  const auto img = read_file(images_path);
  const auto lbl = read_file(labels_path);

  const std::uint32_t img_magic = read_be32(img, 0, images_path);
  if (img_magic != 0x00000803u) {
    char hex[16];
    std::snprintf(hex, sizeof(hex), "0x%08x", img_magic);
    throw FormatError(images_path + ": bad image magic at offset 0, expected 0x00000803, got " +
                      hex);
  }
  const std::uint32_t lbl_magic = read_be32(lbl, 0, labels_path);
  if (lbl_magic != 0x00000801u) {
    char hex[16];
    std::snprintf(hex, sizeof(hex), "0x%08x", lbl_magic);
    throw FormatError(labels_path + ": bad label magic at offset 0, expected 0x00000801, got " +
                      hex);
  }

  const std::uint32_t img_count = read_be32(img, 4, images_path);
  const std::uint32_t rows = read_be32(img, 8, images_path);
  const std::uint32_t cols = read_be32(img, 12, images_path);
  const std::uint32_t lbl_count = read_be32(lbl, 4, labels_path);
  if (img_count != lbl_count)
    throw FormatError("image count " + std::to_string(img_count) + " does not match label count " +
                      std::to_string(lbl_count));
  if (rows == 0 || cols == 0)
    throw FormatError(images_path + ": zero image dimensions in header");

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  const std::size_t img_need = 16 + static_cast<std::size_t>(img_count) * pixels;
  if (img.size() < img_need)
    throw FormatError(images_path + ": truncated payload, need " + std::to_string(img_need) +
                      " bytes, file has " + std::to_string(img.size()) +
                      " (short at offset " + std::to_string(img.size()) + ")");
  const std::size_t lbl_need = 8 + img_count;
  if (lbl.size() < lbl_need)
    throw FormatError(labels_path + ": truncated payload, need " + std::to_string(lbl_need) +
                      " bytes, file has " + std::to_string(lbl.size()) +
                      " (short at offset " + std::to_string(lbl.size()) + ")");

  std::size_t n = img_count;
  if (max_items > 0) n = std::min<std::size_t>(n, max_items);
  if (n == 0) throw DataError(images_path + ": no examples");

  Dataset data;
  data.n = n;
  data.d = pixels;
  data.features.resize(n * pixels);
  data.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < pixels; ++j)
      data.features[i * pixels + j] = static_cast<double>(img[16 + i * pixels + j]) / 255.0;
    data.labels[i] = static_cast<int>(lbl[8 + i]);
    max_label = std::max(max_label, data.labels[i]);
  }
  data.num_classes = static_cast<std::size_t>(max_label) + 1;
  return data;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file (line 1)");

  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(s);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };

  const auto header = split(line);
  std::size_t label_col = header.size();
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == "label") label_col = j;
  if (label_col == header.size())
    throw FormatError(path + ": header (line 1) has no 'label' column");
  const std::size_t d = header.size() - 1;
  if (d == 0) throw FormatError(path + ": no feature columns");

  Dataset data;
  data.d = d;
  int max_label = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size())
      throw FormatError(path + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v;
      try {
        std::size_t pos = 0;
        v = std::stod(fields[j], &pos);
        if (pos != fields[j].size()) throw std::invalid_argument("trailing junk");
      } catch (const std::exception&) {
        throw FormatError(path + ": line " + std::to_string(line_no) + ", column " +
                          std::to_string(j + 1) + ": cannot parse '" + fields[j] + "'");
      }
      if (j == label_col) {
        const int label = static_cast<int>(v);
        if (static_cast<double>(label) != v || label < 0)
          throw FormatError(path + ": line " + std::to_string(line_no) +
                            ": label must be a nonnegative integer, got '" + fields[j] + "'");
        data.labels.push_back(label);
        max_label = std::max(max_label, label);
      } else {
        data.features.push_back(v);
      }
    }
  }
  data.n = data.labels.size();
  if (data.n == 0) throw FormatError(path + ": no data rows");
  data.num_classes = static_cast<std::size_t>(max_label) + 1;
  return data;
}

ModelPtr make_logistic(std::size_t d, std::size_t classes, Loss loss) {
  return std::make_shared<LogisticModel>(d, classes, loss);
}

ModelPtr make_mlp(std::size_t d, std::vector<std::size_t> hidden, std::size_t classes,
                  Loss loss) {
  return std::make_shared<MlpModel>(d, std::move(hidden), classes, loss);
}

double accuracy(const Model& model, std::span<const double> w, const Dataset& data) {
  check_dataset(data);
  std::vector<double> z(model.num_classes());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.n; ++i) {
    model.logits(w, data, i, z);
    const auto best = std::max_element(z.begin(), z.end()) - z.begin();
    if (best == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.n);
}

NoiseBundle noise_bundle(const Model& model, std::span<const double> w, const Dataset& data,
                         std::size_t b, std::uint64_t seed) {
  check_dataset(data);
  if (b == 0) throw ParamError("noise_bundle: b must be >= 1");
  if (b > data.n)
    throw ParamError("noise_bundle: b = " + std::to_string(b) + " exceeds n = " +
                     std::to_string(data.n));
  const std::size_t p = model.param_count();
  const std::size_t num_batches = data.n / b;
  const std::size_t kept = num_batches * b;

  SplitMix64 rng(seed);
  std::vector<std::size_t> order = shuffled_indices(data.n, rng);
  order.resize(kept);

  std::vector<double> full_grad(p);
  model.grad(w, data, order, full_grad);

  NoiseBundle bundle;
  bundle.p = p;
  bundle.n = kept;
  bundle.b = b;
  bundle.values.resize(p * num_batches);
  std::vector<double> batch_grad(p);
  for (std::size_t i = 0; i < num_batches; ++i) {
    std::span<const std::size_t> batch(order.data() + i * b, b);
    model.grad(w, data, batch, batch_grad);
    double* out = bundle.values.data() + i * p;
    for (std::size_t j = 0; j < p; ++j) out[j] = batch_grad[j] - full_grad[j];
  }
  return bundle;
}

NoiseBundle injected_noise_bundle(std::size_t p, std::size_t num_batches, double alpha0,
                                  double scale, std::uint64_t seed) {
  if (p == 0 || num_batches == 0)
    throw ParamError("injected_noise_bundle: p and num_batches must be >= 1");
  const auto params = stable::validate_params(alpha0, scale);

  NoiseBundle bundle;
  bundle.p = p;
  bundle.n = num_batches;  // one synthetic example per batch
  bundle.b = 1;
  bundle.values.resize(p * num_batches);
  std::vector<double> fake_full(p, 0.0);
  SplitMix64 rng(seed);
  const stable::SasSampler sampler(alpha0);
  std::vector<double> batch_grad(p);
  for (std::size_t i = 0; i < num_batches; ++i) {
    // batch gradient = full gradient + xi, then the usual subtraction.
    for (std::size_t j = 0; j < p; ++j)
      batch_grad[j] = fake_full[j] + params.sigma * sampler.draw(rng);
    double* out = bundle.values.data() + i * p;
    for (std::size_t j = 0; j < p; ++j) out[j] = batch_grad[j] - fake_full[j];
  }
  return bundle;
}

std::vector<MeasurePoint> measure_run(const Model& model, const Dataset& data,
                                      const MeasureConfig& config) {
  check_dataset(data);
  if (config.b == 0 || config.b > data.n)
    throw ParamError("measure_run: b must satisfy 1 <= b <= n");
  if (config.iterations == 0 || config.log_every == 0)
    throw ParamError("measure_run: iterations and log_every must be >= 1");

  std::vector<double> w = model.init(derive_seed(config.seed, 0x69));
  std::vector<std::size_t> all(data.n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  std::vector<MeasurePoint> series;
  std::vector<double> g(model.param_count());

  auto log_point = [&](std::size_t iteration) {
    MeasurePoint point;
    point.iteration = iteration;
    point.train_loss = model.loss(w, data, all);
    if (!std::isfinite(point.train_loss))
      throw BlowupError("measure_run: non-finite loss at iteration " + std::to_string(iteration),
                        iteration, w);
    point.train_accuracy = accuracy(model, w, data);
    const NoiseBundle bundle =
        noise_bundle(model, w, data, config.b, derive_seed(config.seed, 0x6e, iteration));
    const auto grouping = estimate::choose_grouping(bundle.values.size());
    point.tail = estimate::estimate_alpha(bundle.values, grouping);
    series.push_back(point);
  };

  SplitMix64 shuffle_rng(derive_seed(config.seed, 0x65));
  std::vector<std::size_t> order;
  std::size_t cursor = data.n;  // forces a shuffle on first use

  for (std::size_t k = 0; k < config.iterations; ++k) {
    if (k % config.log_every == 0) log_point(k);
    if (cursor >= data.n) {
      order = shuffled_indices(data.n, shuffle_rng);
      cursor = 0;
    }
    const std::size_t take = std::min(config.b, data.n - cursor);
    std::span<const std::size_t> batch(order.data() + cursor, take);
    cursor += take;
    model.grad(w, data, batch, g);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= config.eta * g[j];
  }
  log_point(config.iterations);
  return series;
}

}  // namespace levylab::gradnoise
