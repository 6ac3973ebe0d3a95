/*
 Copyright 2026 The conn-control Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include "conn/ocp.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace conn
{

  enum class Activation
  {
    kTanh,
    kRelu,
    kSoftplus,
  };

  std::string_view activation_name(Activation a);
  Activation parse_activation(std::string_view name);

  struct ConnArchitecture
  {
    int state_dim = 1;
    int horizon = 11;
    std::vector<int> hidden = {64, 64};
    Activation activation = Activation::kRelu;
    /// Inputs are multiplied by this factor before the first layer.
    double input_scale = 0.2;
  };

  /**
   * @brief Co-state network: state (p) -> co-state trajectory (n x p)
   *
   * Fully connected, `activation` on the hidden layers and an affine output
   * layer. Output element j * p + i is co-state component i at step j.
   */
  class ConnModel
  {
  public:
    /// Random initialisation (Glorot for tanh/softplus, He for relu, zero biases).
    static ConnModel initialize(const ConnArchitecture &arch, std::uint64_t seed);

    /// Takes explicit parameters; throws ArgumentError if the shapes do not chain.
    ConnModel(ConnArchitecture arch, std::vector<Mat> weights, std::vector<Vec> biases);

    /// n x p predicted co-state trajectory. Throws ArgumentError on bad input.
    Mat forward(const Vec &x) const;

    const ConnArchitecture &architecture() const { return arch_; }
    int horizon() const { return arch_.horizon; }
    int state_dim() const { return arch_.state_dim; }
    Activation activation() const { return arch_.activation; }
    double input_scale() const { return arch_.input_scale; }
    /// p, hidden..., n * p
    std::vector<int> layer_sizes() const;
    std::size_t layer_count() const { return weights_.size(); }

    const std::vector<Mat> &weights() const { return weights_; }
    const std::vector<Vec> &biases() const { return biases_; }
    std::vector<Mat> &weights() { return weights_; }
    std::vector<Vec> &biases() { return biases_; }

    std::size_t parameter_count() const;
    /// All parameters, layer by layer: weights (column-major) then bias.
    Vec parameters() const;
    void set_parameters(const Vec &theta);
    bool all_finite() const;

    std::uint64_t train_config_hash() const { return train_config_hash_; }
    void set_train_config_hash(std::uint64_t h) { train_config_hash_ = h; }

  private:
    ConnArchitecture arch_;
    std::vector<Mat> weights_;
    std::vector<Vec> biases_;
    std::uint64_t train_config_hash_ = 0;
  };

  /// Intermediate values of one forward pass, kept for backpropagation.
  struct ForwardTrace
  {
    std::vector<Vec> pre;  ///< pre-activations of each layer
    std::vector<Vec> post; ///< post[0] is the scaled input, post[l + 1] the output of layer l
  };

  Vec forward_traced(const ConnModel &model, const Vec &x, ForwardTrace &trace);

  /// Parameter gradients given dL/d(output) for a traced forward pass.
  void backpropagate(const ConnModel &model, const ForwardTrace &trace, const Vec &d_output,
                     std::vector<Mat> &d_weights, std::vector<Vec> &d_biases);

  constexpr int kModelFormatVersion = 1;

  void save_model(const ConnModel &model, const std::filesystem::path &path);
  ConnModel load_model(const std::filesystem::path &path);

} // namespace conn
