#include "mspipe/pixelnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mspipe/errors.hpp"
#include "mspipe/png_io.hpp"
#include "mspipe/rng.hpp"
#include "mspipe/util.hpp"

namespace mspipe {

using nlohmann::json;

std::size_t PixelNetModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    n += static_cast<std::size_t>(dims[l]) * dims[l + 1] + dims[l + 1];
  return n;
}

PixelNetModel init_model(std::uint64_t seed, int input_dim) {
  if (input_dim != kFeatureCount && input_dim != kNumBands)
    fail("pixelnet input dimension must be 40 or 8");
  PixelNetModel m;
  m.dims = {input_dim, 16, 8, 2};
  m.seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
    const int in = m.dims[l];
    const int out = m.dims[l + 1];
    const double sd = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(static_cast<std::size_t>(in) * out);
    for (double& v : w) v = rng.normal(0.0, sd);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(out, 0.0);
  }
  return m;
}

namespace {

// Per-layer activations of one forward pass; acts[0] is the input.
struct Activations {
  std::vector<std::vector<double>> acts;
};

void forward_pass(const PixelNetModel& m, std::span<const double> input,
                  Activations& ws) {
  const std::size_t n_layers = m.dims.size();
  ws.acts.resize(n_layers);
  ws.acts[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    const int in = m.dims[l];
    const int out = m.dims[l + 1];
    const bool last = (l + 2 == n_layers);
    std::vector<double>& a = ws.acts[l + 1];
    a.assign(out, 0.0);
    const std::vector<double>& prev = ws.acts[l];
    const std::vector<double>& w = m.weights[l];
    for (int j = 0; j < out; ++j) a[j] = m.biases[l][j];
    for (int i = 0; i < in; ++i) {
      const double ai = prev[i];
      if (ai == 0.0) continue;
      const double* wr = w.data() + static_cast<std::size_t>(i) * out;
      for (int j = 0; j < out; ++j) a[j] += ai * wr[j];
    }
    if (last) {
      double mx = *std::max_element(a.begin(), a.end());
      double sum = 0.0;
      for (double& v : a) {
        v = std::exp(v - mx);
        sum += v;
      }
      for (double& v : a) v /= sum;
    } else {
      for (double& v : a) v = std::max(0.0, v);
    }
  }
}

struct Gradients {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  explicit Gradients(const PixelNetModel& m) {
    for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
      w.emplace_back(m.weights[l].size(), 0.0);
      b.emplace_back(m.biases[l].size(), 0.0);
    }
  }
};

// Accumulates mean cross-entropy gradients over the index range;
// returns the mean loss.
double batch_gradients(const PixelNetModel& m, const LabeledSpectra& data,
                       std::span<const std::size_t> idx, Gradients& g) {
  Activations ws;
  const std::size_t n_layers = m.dims.size();
  std::vector<std::vector<double>> delta(n_layers);
  double loss = 0.0;
  for (std::size_t ii : idx) {
    forward_pass(m, data.row(ii), ws);
    const std::vector<double>& p = ws.acts.back();
    loss += -std::log(std::max(p[data.labels[ii]], 1e-300));

    delta[n_layers - 1] = p;
    delta[n_layers - 1][data.labels[ii]] -= 1.0;
    for (std::size_t l = n_layers - 1; l-- > 0;) {
      const int in = m.dims[l];
      const int out = m.dims[l + 1];
      const std::vector<double>& d_out = delta[l + 1];
      const std::vector<double>& a_in = ws.acts[l];
      for (int j = 0; j < out; ++j) g.b[l][j] += d_out[j];
      for (int i = 0; i < in; ++i) {
        const double ai = a_in[i];
        double* gw = g.w[l].data() + static_cast<std::size_t>(i) * out;
        for (int j = 0; j < out; ++j) gw[j] += ai * d_out[j];
      }
      if (l == 0) break;
      std::vector<double>& d_in = delta[l];
      d_in.assign(in, 0.0);
      const std::vector<double>& w = m.weights[l];
      for (int i = 0; i < in; ++i) {
        if (a_in[i] <= 0.0) continue;  // rectifier gate, derivative 0 at 0
        const double* wr = w.data() + static_cast<std::size_t>(i) * out;
        double s = 0.0;
        for (int j = 0; j < out; ++j) s += wr[j] * d_out[j];
        d_in[i] = s;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (std::size_t l = 0; l < g.w.size(); ++l) {
    for (double& v : g.w[l]) v *= inv;
    for (double& v : g.b[l]) v *= inv;
  }
  return loss * inv;
}

double batch_loss(const PixelNetModel& m, const LabeledSpectra& data,
                  std::span<const std::size_t> idx) {
  Activations ws;
  double loss = 0.0;
  for (std::size_t ii : idx) {
    forward_pass(m, data.row(ii), ws);
    loss += -std::log(std::max(ws.acts.back()[data.labels[ii]], 1e-300));
  }
  return loss / static_cast<double>(idx.size());
}

}  // namespace

std::array<double, 2> forward(const PixelNetModel& model,
                              std::span<const double> features) {
  if (static_cast<int>(features.size()) != model.input_dim())
    fail("forward: feature vector length does not match model input");
  for (double v : features)
    if (!std::isfinite(v)) fail("forward: non-finite input feature");
  Activations ws;
  forward_pass(model, features, ws);
  return {ws.acts.back()[0], ws.acts.back()[1]};
}

TrainResult train(PixelNetModel model, const LabeledSpectra& data,
                  const TrainHyper& hyper) {
  if (data.dim != model.input_dim())
    fail("train: data dimension does not match model input");
  if (hyper.epochs <= 0 || hyper.batch_size <= 0)
    fail("train: epochs and batch size must be positive");
  if (hyper.learning_rate < 0.0) fail("train: negative learning rate");
  if (data.count() == 0) fail("train: empty training set");
  for (std::uint8_t c : data.labels)
    if (c > 1) fail("train: labels must be 0 or 1");

  model.epochs = hyper.epochs;
  model.batch_size = hyper.batch_size;
  model.learning_rate = hyper.learning_rate;

  const std::size_t n = data.count();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(hyper.seed);

  TrainResult result;
  result.epoch_losses.reserve(hyper.epochs);
  Gradients g(model);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t len =
          std::min<std::size_t>(hyper.batch_size, n - start);
      for (auto& layer : g.w) std::fill(layer.begin(), layer.end(), 0.0);
      for (auto& layer : g.b) std::fill(layer.begin(), layer.end(), 0.0);
      const double loss =
          batch_gradients(model, data, {order.data() + start, len}, g);
      if (!std::isfinite(loss))
        fail("training diverged: non-finite loss at epoch " +
             std::to_string(epoch));
      epoch_loss += loss * static_cast<double>(len);
      for (std::size_t l = 0; l < model.weights.size(); ++l) {
        for (std::size_t i = 0; i < model.weights[l].size(); ++i)
          model.weights[l][i] -= hyper.learning_rate * g.w[l][i];
        for (std::size_t i = 0; i < model.biases[l].size(); ++i)
          model.biases[l][i] -= hyper.learning_rate * g.b[l][i];
      }
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
  }
  result.model = std::move(model);
  return result;
}

double gradient_check(const PixelNetModel& model, const LabeledSpectra& batch,
                      int n_params, std::uint64_t seed) {
  if (batch.count() == 0) fail("gradient_check: empty batch");
  std::vector<std::size_t> idx(batch.count());
  std::iota(idx.begin(), idx.end(), 0);

  PixelNetModel probe_model = model;
  Gradients g(probe_model);
  batch_gradients(probe_model, batch, idx, g);

  // Flattened parameter order: per layer, weights then biases.
  const std::size_t total = probe_model.parameter_count();
  Rng rng(seed);
  std::vector<std::uint64_t> probes;
  if (n_params < static_cast<int>(total)) {
    probes = rng.sample_without_replacement(total, n_params);
  } else {
    probes.resize(total);
    std::iota(probes.begin(), probes.end(), 0);
  }

  auto locate = [&](std::uint64_t flat) -> std::pair<double*, double> {
    std::uint64_t off = flat;
    for (std::size_t l = 0; l < probe_model.weights.size(); ++l) {
      if (off < probe_model.weights[l].size())
        return {&probe_model.weights[l][off], g.w[l][off]};
      off -= probe_model.weights[l].size();
      if (off < probe_model.biases[l].size())
        return {&probe_model.biases[l][off], g.b[l][off]};
      off -= probe_model.biases[l].size();
    }
    fail("gradient_check: parameter index out of range");
  };

  const double h = 1e-5;
  double worst = 0.0;
  for (std::uint64_t flat : probes) {
    auto [param, analytic] = locate(flat);
    const double saved = *param;
    *param = saved + h;
    const double up = batch_loss(probe_model, batch, idx);
    *param = saved - h;
    const double down = batch_loss(probe_model, batch, idx);
    *param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err =
        std::abs(analytic - numeric) /
        std::max(1e-3, std::abs(analytic) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

ProbabilityMap infer_map(const PixelNetModel& model, const FeatureCube& fcube,
                         int jobs) {
  if (static_cast<int>(fcube.planes.size()) != model.input_dim())
    fail("infer_map: feature plane count does not match model input");
  ProbabilityMap map;
  map.width = fcube.width;
  map.height = fcube.height;
  map.prob = Plane(fcube.width, fcube.height);
  parallel_for(static_cast<std::size_t>(fcube.height), jobs, [&](std::size_t y) {
    Activations ws;
    std::vector<double> feat;
    for (int x = 0; x < fcube.width; ++x) {
      fcube.pixel_features(x, static_cast<int>(y), feat);
      forward_pass(model, feat, ws);
      map.prob.at(x, static_cast<int>(y)) = ws.acts.back()[1];
    }
  });
  return map;
}

ProbabilityMap load_probability_map(const std::filesystem::path& path) {
  PlanarImage img = load_planar(path);
  if (img.has_pan || img.planes.size() != 1)
    fail("not a probability map: " + path.string());
  for (double v : img.planes[0].v)
    if (!(v >= 0.0 && v <= 1.0))
      fail("probability outside [0,1] in " + path.string());
  return ProbabilityMap{img.width, img.height, std::move(img.planes[0])};
}

void save_probability_map(const ProbabilityMap& map,
                          const std::filesystem::path& path) {
  PlanarImage img;
  img.width = map.width;
  img.height = map.height;
  img.band_labels = {0.0};
  img.has_pan = false;
  img.normalized = false;
  img.planes = {map.prob};
  img.extra["kind"] = "probability_map";
  save_planar(img, path);
}

void save_probability_png(const ProbabilityMap& map,
                          const std::filesystem::path& path) {
  Gray8 img;
  img.width = map.width;
  img.height = map.height;
  img.pixels.resize(map.prob.size());
  for (std::size_t i = 0; i < map.prob.size(); ++i)
    img.pixels[i] =
        static_cast<std::uint8_t>(std::lround(255.0 * map.prob.v[i]));
  write_gray8_png(img, path);
}

PixelNetModel load_pixelnet(const std::filesystem::path& path) {
  json doc = json::parse(read_file(path));
  PixelNetModel m;
  m.dims = doc.at("dims").get<std::vector<int>>();
  m.weights = doc.at("weights").get<std::vector<std::vector<double>>>();
  m.biases = doc.at("biases").get<std::vector<std::vector<double>>>();
  m.seed = doc.value("seed", 0ULL);
  m.epochs = doc.value("epochs", 0);
  m.batch_size = doc.value("batch_size", 0);
  m.learning_rate = doc.value("learning_rate", 0.0);
  if (m.dims.size() != 4 || m.weights.size() != 3 || m.biases.size() != 3)
    fail("malformed pixelnet model: " + path.string());
  for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
    if (m.weights[l].size() !=
            static_cast<std::size_t>(m.dims[l]) * m.dims[l + 1] ||
        m.biases[l].size() != static_cast<std::size_t>(m.dims[l + 1]))
      fail("pixelnet layer dimensions inconsistent: " + path.string());
    for (double v : m.weights[l])
      if (!std::isfinite(v)) fail("non-finite weight in " + path.string());
  }
  return m;
}

void save_pixelnet(const PixelNetModel& model,
                   const std::filesystem::path& path) {
  json doc;
  doc["dims"] = model.dims;
  doc["weights"] = model.weights;
  doc["biases"] = model.biases;
  doc["activation"] = {"relu", "relu", "softmax"};
  doc["seed"] = model.seed;
  doc["epochs"] = model.epochs;
  doc["batch_size"] = model.batch_size;
  doc["learning_rate"] = model.learning_rate;
  atomic_write(path, doc.dump(2) + "\n");
}

}  // namespace mspipe
