#include <fstream>

#include "json.hpp"
#include "qflrl/nn.hpp"

namespace qflrl::nn {

namespace {

using nlohmann::json;

json layer_to_json(const LayerSpec& s) {
  json j;
  switch (s.kind) {
    case LayerSpec::Kind::Dense:
      j["kind"] = "dense";
      j["n_in"] = s.n_in;
      j["n_out"] = s.n_out;
      break;
    case LayerSpec::Kind::Conv1d:
    case LayerSpec::Kind::Conv2d:
      j["kind"] = s.kind == LayerSpec::Kind::Conv1d ? "conv1d" : "conv2d";
      j["channels_in"] = s.channels_in;
      j["channels_out"] = s.channels_out;
      j["half_width"] = s.half_width;
      j["padding"] = s.padding == Padding::Zero ? "zero" : "periodic";
      break;
    case LayerSpec::Kind::AvgPool:
      j["kind"] = "avg_pool";
      j["block"] = s.block;
      break;
    case LayerSpec::Kind::Flatten:
      j["kind"] = "flatten";
      break;
  }
  j["activation"] = to_string(s.activation);
  if (s.dropout_rate > 0.0) j["dropout_rate"] = s.dropout_rate;
  return j;
}

LayerSpec layer_from_json(const json& j) {
  const std::string kind = j.at("kind");
  const Activation act = activation_from_string(j.at("activation"));
  LayerSpec s;
  if (kind == "dense") {
    s = LayerSpec::dense(j.at("n_in"), j.at("n_out"), act);
  } else if (kind == "conv1d" || kind == "conv2d") {
    const Padding pad = j.at("padding") == "periodic" ? Padding::Periodic : Padding::Zero;
    s = kind == "conv1d"
            ? LayerSpec::conv1d(j.at("channels_in"), j.at("channels_out"), j.at("half_width"), act, pad)
            : LayerSpec::conv2d(j.at("channels_in"), j.at("channels_out"), j.at("half_width"), act, pad);
  } else if (kind == "avg_pool") {
    s = LayerSpec::avg_pool(j.at("block"));
  } else if (kind == "flatten") {
    s = LayerSpec::flatten();
  } else {
    throw InvalidInput("checkpoint: unknown layer kind " + kind);
  }
  if (j.contains("dropout_rate")) s.dropout_rate = j.at("dropout_rate");
  return s;
}

json tensors_to_json(const std::vector<Tensor>& ts) {
  json arr = json::array();
  for (const Tensor& t : ts) arr.push_back(t.values());
  return arr;
}

void tensors_from_json(const json& arr, std::vector<Tensor>& ts) {
  if (arr.size() != ts.size()) throw InvalidInput("checkpoint: tensor list length mismatch");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::vector<double> vals = arr[i].get<std::vector<double>>();
    if (vals.size() != ts[i].size()) throw InvalidInput("checkpoint: tensor size mismatch");
    ts[i] = Tensor(ts[i].shape(), std::move(vals));
  }
}

json optimizer_to_json(const Optimizer& o) {
  json j;
  j["kind"] = o.kind == Optimizer::Kind::Sgd ? "sgd" : "adam";
  j["lr"] = o.lr;
  if (o.kind == Optimizer::Kind::Adam) {
    j["beta1"] = o.beta1;
    j["beta2"] = o.beta2;
    j["eps"] = o.eps;
    j["step_count"] = o.step_count;
    j["m_w"] = tensors_to_json(o.m_w);
    j["v_w"] = tensors_to_json(o.v_w);
    j["m_b"] = tensors_to_json(o.m_b);
    j["v_b"] = tensors_to_json(o.v_b);
  }
  return j;
}

Optimizer optimizer_from_json(const json& j, const Network& net) {
  if (j.at("kind") == "sgd") return Optimizer::sgd(j.at("lr"));
  Optimizer o = Optimizer::adam(j.at("lr"), j.at("beta1"), j.at("beta2"), j.at("eps"));
  o.step_count = j.at("step_count");
  if (o.step_count > 0) {
    Gradients like = zeros_like_params(net);
    o.m_w = like.w;
    o.v_w = like.w;
    o.m_b = like.b;
    o.v_b = like.b;
    tensors_from_json(j.at("m_w"), o.m_w);
    tensors_from_json(j.at("v_w"), o.v_w);
    tensors_from_json(j.at("m_b"), o.m_b);
    tensors_from_json(j.at("v_b"), o.v_b);
  }
  return o;
}

}  // namespace

std::string network_to_json(const Network& net, const Optimizer* opt) {
  json j;
  j["format_version"] = 1;
  j["kind"] = "network";
  j["input_shape"] = net.input_shape();
  json layers = json::array();
  for (const LayerSpec& s : net.layers()) layers.push_back(layer_to_json(s));
  j["layers"] = layers;
  j["weights"] = tensors_to_json(net.weights());
  j["biases"] = tensors_to_json(net.biases());
  j["optimizer"] = opt ? optimizer_to_json(*opt) : json(nullptr);
  return j.dump(2);
}

LoadedCheckpoint network_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.at("kind") != "network") throw InvalidInput("checkpoint: not a network checkpoint");
  std::vector<LayerSpec> layers;
  for (const json& lj : j.at("layers")) layers.push_back(layer_from_json(lj));
  std::vector<std::size_t> input_shape = j.at("input_shape").get<std::vector<std::size_t>>();
  RngStream dummy(0);  // weights are overwritten right below
  LoadedCheckpoint out;
  out.net = Network::create(std::move(input_shape), std::move(layers), dummy);
  tensors_from_json(j.at("weights"), out.net.weights());
  tensors_from_json(j.at("biases"), out.net.biases());
  if (!j.at("optimizer").is_null()) out.opt = optimizer_from_json(j.at("optimizer"), out.net);
  return out;
}

void save_checkpoint(const std::string& path, const Network& net, const Optimizer* opt) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot open checkpoint file for writing: " + path);
  f << network_to_json(net, opt) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open checkpoint file: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return network_from_json(text);
}

}  // namespace qflrl::nn
