#include "steer/nn/network.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "steer/error.hpp"
#include "steer/imaging/image_io.hpp"

namespace steer::nn {

std::string to_string(Architecture arch) { return arch == Architecture::Scnn ? "scnn" : "cnn"; }

Architecture parse_architecture(const std::string& text) {
  if (text == "scnn") return Architecture::Scnn;
  if (text == "cnn") return Architecture::Cnn;
  throw Error(ErrorKind::InvalidArgument, "unknown network '" + text + "' (expected scnn or cnn)");
}

Network::Network(Architecture arch, std::vector<std::unique_ptr<Layer>> layers, std::optional<FieldType> in_field,
                 std::optional<FieldType> out_field)
    : arch_(arch), layers_(std::move(layers)), in_field_(std::move(in_field)), out_field_(std::move(out_field)) {
  if (layers_.empty()) throw Error(ErrorKind::InvalidArgument, "a network needs at least one layer");
  for (std::size_t k = 1; k < layers_.size(); ++k) {
    if (layers_[k - 1]->out_channels() != layers_[k]->in_channels()) {
      throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(k) + " expects " +
                                                std::to_string(layers_[k]->in_channels()) + " channels but receives " +
                                                std::to_string(layers_[k - 1]->out_channels()));
    }
  }
}

ad::Tensor Network::forward(const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (const auto& layer : layers_) h = layer->forward(h);
  return h;
}

std::vector<ad::Tensor> Network::parameters() const {
  std::vector<ad::Tensor> out;
  for (const auto& layer : layers_)
    for (auto& p : layer->parameters()) out.push_back(p.tensor);
  return out;
}

std::vector<std::string> Network::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < layers_.size(); ++k)
    for (auto& p : layers_[k]->parameters())
      out.push_back("layer" + std::to_string(k) + "." + layers_[k]->kind() + "." + p.name);
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.size();
  return n;
}

FieldType Network::input_field(int order) const {
  if (in_field_) {
    if (in_field_->order() != order) {
      throw Error(ErrorKind::InvalidArgument, "network is equivariant under C" + std::to_string(in_field_->order()) +
                                                  ", not C" + std::to_string(order));
    }
    return *in_field_;
  }
  return FieldType::trivial(order, layers_.front()->in_channels());
}

FieldType Network::output_field(int order) const {
  if (out_field_) {
    if (out_field_->order() != order) {
      throw Error(ErrorKind::InvalidArgument, "network is equivariant under C" + std::to_string(out_field_->order()) +
                                                  ", not C" + std::to_string(order));
    }
    return *out_field_;
  }
  return FieldType::trivial(order, layers_.back()->out_channels());
}

std::optional<int> Network::group_order() const {
  if (in_field_) return in_field_->order();
  return std::nullopt;
}

Network build_scnn(int order, std::size_t hidden_fields, std::uint64_t seed) {
  if (order < 2) throw Error(ErrorKind::InvalidArgument, "the SCNN needs a group order of at least 2");
  if (hidden_fields < 1) throw Error(ErrorKind::InvalidArgument, "the SCNN needs at least one hidden field");
  std::mt19937_64 rng(seed);
  const auto in = FieldType::trivial(order, 1);
  const auto hidden = FieldType::regular(order, hidden_fields);
  std::vector<std::unique_ptr<Layer>> layers;
  layers.push_back(std::make_unique<SteerableConv>(in, hidden, 3, false, rng));
  layers.push_back(std::make_unique<FieldBatchNorm>(hidden));
  layers.push_back(std::make_unique<ReLU>(hidden));
  layers.push_back(std::make_unique<SteerableConv>(hidden, hidden, 3, false, rng));
  layers.push_back(std::make_unique<FieldBatchNorm>(hidden));
  layers.push_back(std::make_unique<ReLU>(hidden));
  layers.push_back(std::make_unique<SteerableConv>(hidden, in, 1, true, rng));
  return Network(Architecture::Scnn, std::move(layers), in, in);
}

Network build_baseline_cnn(std::uint64_t seed, std::size_t channels) {
  std::mt19937_64 rng(seed);
  const std::size_t widths[] = {1, channels, channels, channels, channels, 1};
  std::vector<std::unique_ptr<Layer>> layers;
  for (std::size_t k = 0; k < 5; ++k) {
    layers.push_back(std::make_unique<PlainConv>(widths[k], widths[k + 1], 3, rng));
    if (k < 4) layers.push_back(std::make_unique<ReLU>(widths[k + 1]));
  }
  return Network(Architecture::Cnn, std::move(layers), std::nullopt, std::nullopt);
}

Network build_network(Architecture arch, int order, std::size_t hidden_fields, std::uint64_t seed) {
  return arch == Architecture::Scnn ? build_scnn(order, hidden_fields, seed) : build_baseline_cnn(seed);
}

double equivariance_error(const Network& net, const ad::Tensor& x, const groups::GroupElement& g) {
  if (x.rank() != 4 || x.dim(2) != x.dim(3)) {
    throw Error(ErrorKind::ShapeMismatch, "equivariance_error: expected square [N, C, H, W] input");
  }
  const auto in_field = net.input_field(g.order());
  const auto out_field = net.output_field(g.order());
  const auto lhs = net.forward(rotate_field(x, in_field, g));
  const auto rhs = rotate_field(net.forward(x), out_field, g);
  const std::size_t h = lhs.dim(2), w = lhs.dim(3), plane = h * w;
  const double c = (static_cast<double>(h) - 1.0) / 2.0, radius = 0.9 * static_cast<double>(h) / 2.0;
  double num = 0.0, den = 0.0;
  auto a = lhs.values(), b = rhs.values();
  for (std::size_t p = 0; p < lhs.size(); ++p) {
    const std::size_t q = p % plane;
    const double dx = static_cast<double>(q % w) - c, dy = static_cast<double>(q / w) - c;
    if (dx * dx + dy * dy > radius * radius) continue;
    num += (a[p] - b[p]) * (a[p] - b[p]);
    den += b[p] * b[p];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

void save_weights(const Network& net, const std::filesystem::path& stem) {
  const auto params = net.parameters();
  const auto names = net.parameter_names();
  std::vector<double> all;
  std::ostringstream manifest;
  manifest << "# " << net.label() << " " << params.size() << " tensors\n";
  for (std::size_t k = 0; k < params.size(); ++k) {
    manifest << names[k] << " " << ad::shape_to_string(params[k].shape()) << " " << all.size() << "\n";
    all.insert(all.end(), params[k].values().begin(), params[k].values().end());
  }
  const std::size_t total = all.size();
  imaging::write_flat(stem.string() + ".bin", ad::Tensor::from({total}, std::move(all)));
  std::ofstream os(stem.string() + ".manifest", std::ios::trunc);
  os << manifest.str();
  if (!os) throw Error(ErrorKind::IoFailure, "cannot write manifest for '" + stem.string() + "'");
}

void load_weights(Network& net, const std::filesystem::path& stem) {
  const auto flat = imaging::read_flat(stem.string() + ".bin");
  std::ifstream is(stem.string() + ".manifest");
  if (!is) throw Error(ErrorKind::IoFailure, "cannot read manifest for '" + stem.string() + "'");
  auto params = net.parameters();
  const auto names = net.parameter_names();
  std::string line;
  std::size_t k = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string name, shape;
    std::size_t offset = 0;
    if (!(ls >> name >> shape >> offset)) throw Error(ErrorKind::MalformedHeader, "bad manifest line: " + line);
    if (k >= params.size() || name != names[k] || shape != ad::shape_to_string(params[k].shape())) {
      throw Error(ErrorKind::ShapeMismatch, "manifest entry '" + line + "' does not match the network");
    }
    if (offset + params[k].size() > flat.size()) {
      throw Error(ErrorKind::MalformedHeader, "manifest offset beyond the weight file for " + name);
    }
    auto dst = params[k].mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = flat.values()[offset + i];
    ++k;
  }
  if (k != params.size()) throw Error(ErrorKind::ShapeMismatch, "manifest lists fewer tensors than the network has");
}

}  // namespace steer::nn
