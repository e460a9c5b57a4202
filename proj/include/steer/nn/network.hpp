#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "steer/nn/layers.hpp"

namespace steer::nn {

enum class Architecture { Scnn, Cnn };

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& text);

class Network {
 public:
  Network(Architecture arch, std::vector<std::unique_ptr<Layer>> layers, std::optional<FieldType> in_field,
          std::optional<FieldType> out_field);

  Architecture architecture() const { return arch_; }
  std::string label() const { return to_string(arch_); }
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

  ad::Tensor forward(const ad::Tensor& x) const;

  /// Every learnable tensor in layer order.
  std::vector<ad::Tensor> parameters() const;
  /// "layer<k>.<kind>.<name>" for each entry of `parameters()`.
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

  /// Input/output field types for the action of C_order. Plain networks map
  /// scalar images, so they report trivial fields of any order.
  FieldType input_field(int order) const;
  FieldType output_field(int order) const;
  std::optional<int> group_order() const;

 private:
  Architecture arch_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::optional<FieldType> in_field_;
  std::optional<FieldType> out_field_;
};

/// trivial -> W regular (k=3) -> BN -> ReLU -> W regular (k=3) -> BN -> ReLU
/// -> trivial (k=1, with bias).
Network build_scnn(int order = 8, std::size_t hidden_fields = 8, std::uint64_t seed = 0);

/// 1 -> 64 -> 64 -> 64 -> 64 -> 1 plain 3x3 convolutions with ReLU between.
Network build_baseline_cnn(std::uint64_t seed = 0, std::size_t channels = 64);

Network build_network(Architecture arch, int order, std::size_t hidden_fields, std::uint64_t seed);

/// ||f(g.x) - g.f(x)|| / ||g.f(x)|| over pixels within 0.9 * H/2 of the center.
double equivariance_error(const Network& net, const ad::Tensor& x, const groups::GroupElement& g);

/// Writes `<stem>.bin` (all parameters concatenated, flat-binary) and
/// `<stem>.manifest` (one "name shape offset" line per parameter).
void save_weights(const Network& net, const std::filesystem::path& stem);
/// Loads into a network of matching layout; names and shapes must agree.
void load_weights(Network& net, const std::filesystem::path& stem);

}  // namespace steer::nn
