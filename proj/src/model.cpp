#include "fmn/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fmn/errors.hpp"

namespace fmn {

namespace {

using nlohmann::json;

std::string layer_path(std::size_t i) { return "layers[" + std::to_string(i) + "]"; }

void check_finite(std::span<const double> v, std::size_t layer) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(layer, "non-finite activation");
  }
}

void dense_forward(const DenseLayer& d, std::span<const double> in, std::vector<double>& out) {
  out.assign(d.out_dim, 0.0);
  for (std::size_t r = 0; r < d.out_dim; ++r) {
    const double* row = d.weights.data() + r * d.in_dim;
    double s = d.bias[r];
    for (std::size_t c = 0; c < d.in_dim; ++c) s += row[c] * in[c];
    out[r] = s;
  }
}

void check_input(const ModelSpec& model, const Tensor& x) {
  if (x.shape().size() != 1 || x.size() != model.input_dim()) {
    throw ShapeError("input has " + std::to_string(x.size()) + " entries, model expects " +
                     std::to_string(model.input_dim()));
  }
}

// Activations after every layer; acts[0] is the input.
std::vector<std::vector<double>> forward_all(const ModelSpec& model, const Tensor& x) {
  check_input(model, x);
  const auto& layers = model.layers();
  std::vector<std::vector<double>> acts(layers.size() + 1);
  acts[0] = x.data();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (const auto* d = std::get_if<DenseLayer>(&layers[i])) {
      dense_forward(*d, acts[i], acts[i + 1]);
    } else {
      acts[i + 1] = acts[i];
      for (double& v : acts[i + 1]) v = v > 0.0 ? v : 0.0;
    }
    check_finite(acts[i + 1], i);
  }
  return acts;
}

}  // namespace

ModelSpec::ModelSpec(std::vector<LayerSpec> layers, std::size_t input_dim, std::size_t num_classes)
    : layers_(std::move(layers)), input_dim_(input_dim), num_classes_(num_classes) {
  if (input_dim_ == 0) throw ContractError("input_dim must be positive");
  if (num_classes_ < 2) throw ContractError("num_classes must be at least 2");
  std::size_t dim = input_dim_;
  bool has_dense = false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto* d = std::get_if<DenseLayer>(&layers_[i]);
    if (d == nullptr) continue;
    has_dense = true;
    if (d->in_dim != dim) {
      throw ShapeError(layer_path(i) + ": in_dim " + std::to_string(d->in_dim) + " != " +
                       std::to_string(dim));
    }
    if (d->out_dim == 0) throw ShapeError(layer_path(i) + ": out_dim must be positive");
    if (d->weights.size() != d->in_dim * d->out_dim) {
      throw ShapeError(layer_path(i) + ": weights size does not match [out_dim x in_dim]");
    }
    if (d->bias.size() != d->out_dim) throw ShapeError(layer_path(i) + ": bias size != out_dim");
    for (double w : d->weights) {
      if (!std::isfinite(w)) throw NumericError(i, "non-finite weight");
    }
    for (double b : d->bias) {
      if (!std::isfinite(b)) throw NumericError(i, "non-finite bias");
    }
    dim = d->out_dim;
  }
  if (!has_dense) throw ContractError("model needs at least one dense layer");
  if (dim != num_classes_) {
    throw ShapeError("final output dim " + std::to_string(dim) + " != num_classes " +
                     std::to_string(num_classes_));
  }
}

Tensor forward(const ModelSpec& model, const Tensor& x) {
  auto acts = forward_all(model, x);
  return Tensor(std::move(acts.back()));
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (values[j] > values[best]) best = j;
  }
  return best;
}

std::size_t predict(const ModelSpec& model, const Tensor& x) {
  return argmax(forward_all(model, x).back());
}

InputGradient input_gradient(const ModelSpec& model, const Tensor& x, std::size_t y, LossKind loss) {
  if (y >= model.num_classes()) throw ContractError("label out of range");
  auto acts = forward_all(model, x);
  const auto& layers = model.layers();

  InputGradient out;
  out.logits = acts.back();
  out.value = loss_value(loss, out.logits, y);
  if (!std::isfinite(out.value)) throw NumericError(layers.size() - 1, "non-finite loss");

  std::vector<double> upstream = loss_grad_logits(loss, out.logits, y);
  std::vector<double> next;
  for (std::size_t i = layers.size(); i-- > 0;) {
    if (const auto* d = std::get_if<DenseLayer>(&layers[i])) {
      next.assign(d->in_dim, 0.0);
      for (std::size_t r = 0; r < d->out_dim; ++r) {
        const double* row = d->weights.data() + r * d->in_dim;
        const double u = upstream[r];
        for (std::size_t c = 0; c < d->in_dim; ++c) next[c] += row[c] * u;
      }
      upstream.swap(next);
    } else {
      // acts[i] is the pre-activation; strictly positive passes gradient.
      for (std::size_t c = 0; c < upstream.size(); ++c) {
        if (!(acts[i][c] > 0.0)) upstream[c] = 0.0;
      }
    }
    check_finite(upstream, i);
  }
  out.grad = Tensor(x.shape(), std::move(upstream));
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string model_to_json_text(const ModelSpec& model) {
  json doc;
  doc["input_dim"] = model.input_dim();
  doc["num_classes"] = model.num_classes();
  doc["layers"] = json::array();
  for (const auto& layer : model.layers()) {
    json j;
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      j["kind"] = "dense";
      json rows = json::array();
      for (std::size_t r = 0; r < d->out_dim; ++r) {
        rows.push_back(std::vector<double>(d->weights.begin() + r * d->in_dim,
                                           d->weights.begin() + (r + 1) * d->in_dim));
      }
      j["weights"] = std::move(rows);
      j["bias"] = d->bias;
    } else {
      j["kind"] = "relu";
    }
    doc["layers"].push_back(std::move(j));
  }
  return doc.dump(1) + "\n";
}

namespace {

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(path == "$" ? std::string(key) : path + "." + key, std::string("missing field '") + key + "'");
  }
  return obj.at(key);
}

std::size_t read_positive(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) throw ParseError(path, "expected positive integer");
  return v.get<std::size_t>();
}

std::vector<double> read_numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw ParseError(path, "expected array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ParseError(path + "[" + std::to_string(i) + "]", "expected number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

}  // namespace

ModelSpec model_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("byte " + std::to_string(e.byte), e.what());
  }
  const auto input_dim = read_positive(require(doc, "input_dim", "$"), "input_dim");
  const auto num_classes = read_positive(require(doc, "num_classes", "$"), "num_classes");
  const auto& jl = require(doc, "layers", "$");
  if (!jl.is_array()) throw ParseError("layers", "expected array");

  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const auto path = layer_path(i);
    const auto& kind = require(jl[i], "kind", path);
    if (!kind.is_string()) throw ParseError(path + ".kind", "expected string");
    const auto k = kind.get<std::string>();
    if (k == "relu") {
      layers.emplace_back(ReluLayer{});
      continue;
    }
    if (k != "dense") throw ParseError(path + ".kind", "unknown layer kind '" + k + "'");
    const auto& jw = require(jl[i], "weights", path);
    if (!jw.is_array() || jw.empty()) throw ParseError(path + ".weights", "expected non-empty matrix");
    DenseLayer d;
    d.out_dim = jw.size();
    for (std::size_t r = 0; r < jw.size(); ++r) {
      auto row = read_numbers(jw[r], path + ".weights[" + std::to_string(r) + "]");
      if (r == 0) d.in_dim = row.size();
      if (row.size() != d.in_dim || row.empty()) {
        throw ParseError(path + ".weights[" + std::to_string(r) + "]", "ragged or empty row");
      }
      d.weights.insert(d.weights.end(), row.begin(), row.end());
    }
    d.bias = read_numbers(require(jl[i], "bias", path), path + ".bias");
    layers.emplace_back(std::move(d));
  }
  return ModelSpec(std::move(layers), input_dim, num_classes);
}

ModelSpec load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), "cannot open model file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json_text(ss.str());
}

void save_model(const ModelSpec& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model_to_json_text(model);
}

}  // namespace fmn
