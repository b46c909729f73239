#pragma once

// JSON model files. Weight arrays are written as decimal numbers with 17
// significant digits, everything else through nlohmann::json.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bnnsafe/bayes/posterior.hpp"
#include "bnnsafe/harness/controller.hpp"
#include "bnnsafe/nn/network.hpp"

namespace bnnsafe::harness {

using json = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;

struct TrainingMetadata {
  std::uint64_t seed = 0;
  int epochs = 0;  // MCD epochs, VI iterations or HMC retained samples
  std::string dataset_hash;
  long examples = 0;
  double training_accuracy = 0.0;  // mask-free accuracy of the MCD network
  std::optional<double> acceptance_rate;  // HMC only

  bool operator==(const TrainingMetadata&) const = default;
};

struct ModelFile {
  bayes::McdPosterior extractor;  // also the posterior for method "mcd"
  bayes::Posterior posterior;
  TrainingMetadata metadata;

  BayesianController controller() const { return {extractor, posterior}; }
  bool operator==(const ModelFile&) const = default;
};

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  if (res.ec != std::errc{}) throw std::runtime_error("cannot format number");
  return std::string(buf, res.ptr);
}

inline json network_to_json(const nn::NetworkSpec& spec) {
  json layers = json::array();
  for (const auto& L : spec.layers) {
    json j{{"kind", nn::to_string(L.kind)}};
    switch (L.kind) {
      case nn::LayerKind::convolution:
        j["filters"] = L.filters;
        j["kernel"] = L.kernel;
        j["stride"] = L.stride;
        break;
      case nn::LayerKind::fully_connected: j["width"] = L.width; break;
      default: break;
    }
    if (L.dropout_rate > 0.0) j["dropout_rate"] = L.dropout_rate;
    layers.push_back(std::move(j));
  }
  return json{{"input_shape", spec.input_shape}, {"num_classes", spec.num_classes}, {"layers", std::move(layers)}};
}

inline nn::NetworkSpec network_from_json(const json& j) {
  nn::NetworkSpec spec;
  spec.input_shape = j.at("input_shape").get<std::vector<int>>();
  spec.num_classes = j.at("num_classes").get<int>();
  for (const auto& l : j.at("layers")) {
    nn::LayerSpec L;
    L.kind = nn::layer_kind_from_string(l.at("kind").get<std::string>());
    switch (L.kind) {
      case nn::LayerKind::convolution:
        L = nn::LayerSpec::conv(l.at("filters").get<int>(), l.at("kernel").get<int>(), l.at("stride").get<int>());
        break;
      case nn::LayerKind::fully_connected: L = nn::LayerSpec::dense(l.at("width").get<int>()); break;
      default: break;
    }
    L.dropout_rate = l.value("dropout_rate", 0.0);
    spec.layers.push_back(L);
  }
  nn::CompiledNetwork check(spec);  // validates shapes
  return spec;
}

namespace detail {

// Builds the document with string placeholders for weight arrays, then
// splices the fixed-precision arrays into the dumped text.
class ArrayWriter {
 public:
  json placeholder(const std::vector<double>& v) {
    arrays_.push_back(&v);
    return "\x01" + std::to_string(arrays_.size() - 1) + "\x01";
  }

  std::string render(const json& doc) const {
    const std::string text = doc.dump(1);
    std::string out;
    out.reserve(text.size() + arrays_.size() * 64);
    std::size_t pos = 0;
    while (true) {
      const std::size_t open = text.find("\"\\u0001", pos);
      if (open == std::string::npos) break;
      const std::size_t close = text.find("\\u0001\"", open + 7);
      out.append(text, pos, open - pos);
      const std::size_t idx = std::stoul(text.substr(open + 7, close - open - 7));
      out += '[';
      const auto& v = *arrays_.at(idx);
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
      }
      out += ']';
      pos = close + 7;
    }
    out.append(text, pos, std::string::npos);
    out += '\n';
    return out;
  }

 private:
  std::vector<const std::vector<double>*> arrays_;
};

inline std::vector<double> read_array(const json& j, std::size_t expected, const char* what) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != expected)
    throw std::invalid_argument(std::string(what) + " has " + std::to_string(v.size()) + " values, expected " +
                                std::to_string(expected));
  return v;
}

}  // namespace detail

inline std::string serialize_model(const ModelFile& m) {
  bayes::validate(m.extractor);
  bayes::validate(m.posterior);
  detail::ArrayWriter arrays;
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["method"] = bayes::method_name(m.posterior);
  doc["network"] = network_to_json(m.extractor.spec);
  doc["head_begin"] = m.extractor.head_begin;
  doc["dropout_rates"] = m.extractor.rates();
  doc["weights"] = arrays.placeholder(m.extractor.weights);
  if (const auto* vi = std::get_if<bayes::ViPosterior>(&m.posterior)) {
    doc["head_network"] = network_to_json(vi->head);
    doc["mu"] = arrays.placeholder(vi->mu);
    doc["rho"] = arrays.placeholder(vi->rho);
  } else if (const auto* hmc = std::get_if<bayes::HmcPosterior>(&m.posterior)) {
    doc["head_network"] = network_to_json(hmc->head);
    json samples = json::array();
    for (const auto& s : hmc->samples) samples.push_back(arrays.placeholder(s));
    doc["samples"] = std::move(samples);
  }
  json meta{{"seed", m.metadata.seed},
            {"epochs", m.metadata.epochs},
            {"dataset_hash", m.metadata.dataset_hash},
            {"examples", m.metadata.examples},
            {"training_accuracy", m.metadata.training_accuracy}};
  if (m.metadata.acceptance_rate) meta["acceptance_rate"] = *m.metadata.acceptance_rate;
  doc["metadata"] = std::move(meta);
  return arrays.render(doc);
}

inline ModelFile parse_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw std::invalid_argument("unsupported model format_version " + std::to_string(version));
    ModelFile m;
    m.extractor.spec = network_from_json(doc.at("network"));
    m.extractor.head_begin = doc.at("head_begin").get<std::size_t>();
    const nn::CompiledNetwork net(m.extractor.spec);
    m.extractor.weights = detail::read_array(doc.at("weights"), net.parameter_count(), "weights");
    if (doc.contains("dropout_rates") && doc.at("dropout_rates").get<std::vector<double>>() != m.extractor.rates())
      throw std::invalid_argument("dropout_rates disagree with the network layers");
    const std::string method = doc.at("method").get<std::string>();
    if (method == "mcd") {
      m.posterior = m.extractor;
    } else if (method == "vi") {
      bayes::ViPosterior vi;
      vi.head = network_from_json(doc.at("head_network"));
      const std::size_t n = nn::parameter_count(vi.head);
      vi.mu = detail::read_array(doc.at("mu"), n, "mu");
      vi.rho = detail::read_array(doc.at("rho"), n, "rho");
      m.posterior = std::move(vi);
    } else if (method == "hmc") {
      bayes::HmcPosterior hmc;
      hmc.head = network_from_json(doc.at("head_network"));
      const std::size_t n = nn::parameter_count(hmc.head);
      for (const auto& s : doc.at("samples")) hmc.samples.push_back(detail::read_array(s, n, "HMC sample"));
      m.posterior = std::move(hmc);
    } else {
      throw std::invalid_argument("unknown method '" + method + "'");
    }
    const auto& meta = doc.at("metadata");
    m.metadata.seed = meta.at("seed").get<std::uint64_t>();
    m.metadata.epochs = meta.at("epochs").get<int>();
    m.metadata.dataset_hash = meta.at("dataset_hash").get<std::string>();
    m.metadata.examples = meta.at("examples").get<long>();
    m.metadata.training_accuracy = meta.at("training_accuracy").get<double>();
    if (meta.contains("acceptance_rate")) m.metadata.acceptance_rate = meta.at("acceptance_rate").get<double>();
    bayes::validate(m.extractor);
    bayes::validate(m.posterior);
    if (bayes::head_spec(m.posterior).input_shape != std::vector<int>{m.extractor.feature_width()})
      throw std::invalid_argument("head input width does not match extractor features");
    return m;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const std::string& path, const ModelFile& m) {
  const std::string text = serialize_model(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing model file '" + path + "'");
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace bnnsafe::harness
