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

#include "conn/model.hpp"

#include "conn/errors.hpp"
#include "conn/numfmt.hpp"
#include "text_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace conn
{

  namespace
  {

    double activate(Activation a, double z)
    {
      switch (a)
      {
      case Activation::kTanh:
        return std::tanh(z);
      case Activation::kRelu:
        return z > 0.0 ? z : 0.0;
      case Activation::kSoftplus:
        return z > 30.0 ? z : std::log1p(std::exp(z));
      }
      return z;
    }

    /// Derivative expressed through the pre-activation z and the activation value a.
    double activate_prime(Activation act, double z, double a)
    {
      switch (act)
      {
      case Activation::kTanh:
        return 1.0 - a * a;
      case Activation::kRelu:
        return z > 0.0 ? 1.0 : 0.0;
      case Activation::kSoftplus:
        return 1.0 / (1.0 + std::exp(-z));
      }
      return 1.0;
    }

    void check_architecture(const ConnArchitecture &arch)
    {
      if (arch.state_dim < 1 || arch.horizon < 1)
        throw ArgumentError("ConnModel: state_dim and horizon must be positive");
      for (int h : arch.hidden)
        if (h < 1)
          throw ArgumentError("ConnModel: hidden layer widths must be positive");
      if (!(arch.input_scale > 0.0) || !std::isfinite(arch.input_scale))
        throw ArgumentError("ConnModel: input_scale must be positive and finite");
    }

  } // namespace

  std::string_view activation_name(Activation a)
  {
    switch (a)
    {
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
    case Activation::kSoftplus:
      return "softplus";
    }
    return "unknown";
  }

  Activation parse_activation(std::string_view name)
  {
    if (name == "tanh")
      return Activation::kTanh;
    if (name == "relu")
      return Activation::kRelu;
    if (name == "softplus")
      return Activation::kSoftplus;
    throw ArgumentError("unknown activation '" + std::string(name) + "'");
  }

  ConnModel ConnModel::initialize(const ConnArchitecture &arch, std::uint64_t seed)
  {
    check_architecture(arch);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<int> sizes{arch.state_dim};
    sizes.insert(sizes.end(), arch.hidden.begin(), arch.hidden.end());
    sizes.push_back(arch.horizon * arch.state_dim);

    std::vector<Mat> w;
    std::vector<Vec> b;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    {
      const int fan_in = sizes[l];
      const int fan_out = sizes[l + 1];
      const double stddev = arch.activation == Activation::kRelu
                                ? std::sqrt(2.0 / fan_in)
                                : std::sqrt(2.0 / (fan_in + fan_out));
      Mat wl(fan_out, fan_in);
      for (Eigen::Index c = 0; c < wl.cols(); ++c)
        for (Eigen::Index r = 0; r < wl.rows(); ++r)
          wl(r, c) = stddev * normal(rng);
      w.push_back(std::move(wl));
      b.push_back(Vec::Zero(fan_out));
    }
    return ConnModel(arch, std::move(w), std::move(b));
  }

  ConnModel::ConnModel(ConnArchitecture arch, std::vector<Mat> weights, std::vector<Vec> biases)
      : arch_(std::move(arch)), weights_(std::move(weights)), biases_(std::move(biases))
  {
    check_architecture(arch_);
    const std::vector<int> sizes = layer_sizes();
    if (weights_.size() + 1 != sizes.size() || biases_.size() != weights_.size())
      throw ArgumentError("ConnModel: layer count does not match the architecture");
    for (std::size_t l = 0; l < weights_.size(); ++l)
    {
      if (weights_[l].rows() != sizes[l + 1] || weights_[l].cols() != sizes[l] ||
          biases_[l].size() != sizes[l + 1])
        throw ArgumentError("ConnModel: layer " + std::to_string(l) + " has inconsistent dimensions");
    }
    if (!all_finite())
      throw ArgumentError("ConnModel: parameters must be finite");
  }

  std::vector<int> ConnModel::layer_sizes() const
  {
    std::vector<int> sizes{arch_.state_dim};
    sizes.insert(sizes.end(), arch_.hidden.begin(), arch_.hidden.end());
    sizes.push_back(arch_.horizon * arch_.state_dim);
    return sizes;
  }

  std::size_t ConnModel::parameter_count() const
  {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l)
      n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
    return n;
  }

  Vec ConnModel::parameters() const
  {
    Vec theta(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l)
    {
      theta.segment(at, weights_[l].size()) = weights_[l].reshaped();
      at += weights_[l].size();
      theta.segment(at, biases_[l].size()) = biases_[l];
      at += biases_[l].size();
    }
    return theta;
  }

  void ConnModel::set_parameters(const Vec &theta)
  {
    if (theta.size() != static_cast<Eigen::Index>(parameter_count()))
      throw ArgumentError("ConnModel::set_parameters: wrong parameter count");
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l)
    {
      weights_[l].reshaped() = theta.segment(at, weights_[l].size());
      at += weights_[l].size();
      biases_[l] = theta.segment(at, biases_[l].size());
      at += biases_[l].size();
    }
  }

  bool ConnModel::all_finite() const
  {
    for (std::size_t l = 0; l < weights_.size(); ++l)
      if (!weights_[l].allFinite() || !biases_[l].allFinite())
        return false;
    return true;
  }

  Vec forward_traced(const ConnModel &model, const Vec &x, ForwardTrace &trace)
  {
    if (x.size() != model.state_dim())
      throw ArgumentError("ConnModel::forward: input dimension does not match state_dim");
    if (!x.allFinite())
      throw ArgumentError("ConnModel::forward: input must be finite");
    const std::size_t layers = model.layer_count();
    trace.pre.resize(layers);
    trace.post.resize(layers + 1);
    trace.post[0] = model.input_scale() * x;
    for (std::size_t l = 0; l < layers; ++l)
    {
      trace.pre[l].noalias() = model.weights()[l] * trace.post[l];
      trace.pre[l] += model.biases()[l];
      if (l + 1 == layers)
      {
        trace.post[l + 1] = trace.pre[l];
      }
      else
      {
        trace.post[l + 1].resize(trace.pre[l].size());
        for (Eigen::Index i = 0; i < trace.pre[l].size(); ++i)
          trace.post[l + 1][i] = activate(model.activation(), trace.pre[l][i]);
      }
    }
    return trace.post[layers];
  }

  Mat ConnModel::forward(const Vec &x) const
  {
    ForwardTrace trace;
    const Vec flat = forward_traced(*this, x, trace);
    Mat out(arch_.horizon, arch_.state_dim);
    for (int j = 0; j < arch_.horizon; ++j)
      for (int i = 0; i < arch_.state_dim; ++i)
        out(j, i) = flat[j * arch_.state_dim + i];
    return out;
  }

  void backpropagate(const ConnModel &model, const ForwardTrace &trace, const Vec &d_output,
                     std::vector<Mat> &d_weights, std::vector<Vec> &d_biases)
  {
    const std::size_t layers = model.layer_count();
    d_weights.resize(layers);
    d_biases.resize(layers);
    Vec delta = d_output;
    for (std::size_t l = layers; l-- > 0;)
    {
      if (l + 1 < layers)
      {
        for (Eigen::Index i = 0; i < delta.size(); ++i)
          delta[i] *= activate_prime(model.activation(), trace.pre[l][i], trace.post[l + 1][i]);
      }
      d_weights[l].noalias() = delta * trace.post[l].transpose();
      d_biases[l] = delta;
      if (l > 0)
      {
        Vec next = model.weights()[l].transpose() * delta;
        delta = std::move(next);
      }
    }
  }

  // ---------------------------------------------------------------------------
  // Text format
  // ---------------------------------------------------------------------------

  namespace
  {

    std::string hex64(std::uint64_t v)
    {
      char buf[17];
      std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
      return buf;
    }

    void write_row(std::ostream &out, const Eigen::Ref<const Eigen::RowVectorXd> &row)
    {
      for (Eigen::Index j = 0; j < row.size(); ++j)
        out << (j ? "," : "") << format_double(row[j]);
      out << '\n';
    }

  } // namespace

  void save_model(const ConnModel &model, const std::filesystem::path &path)
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("save_model: cannot open " + path.string());
    out << "# conn model\n";
    out << "format_version: " << kModelFormatVersion << '\n';
    out << "activation: " << activation_name(model.activation()) << '\n';
    out << "state_dim: " << model.state_dim() << '\n';
    out << "horizon: " << model.horizon() << '\n';
    out << "input_scale: " << format_double(model.input_scale()) << '\n';
    out << "layers:";
    for (int s : model.layer_sizes())
      out << ' ' << s;
    out << '\n';
    out << "train_config_hash: " << hex64(model.train_config_hash()) << '\n';
    for (std::size_t l = 0; l < model.layer_count(); ++l)
    {
      const Mat &w = model.weights()[l];
      out << "weights " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        write_row(out, w.row(r));
      out << "bias " << l << ' ' << model.biases()[l].size() << '\n';
      write_row(out, model.biases()[l].transpose());
    }
    if (!out)
      throw IoError("save_model: write failed for " + path.string());
  }

  ConnModel load_model(const std::filesystem::path &path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw IoError("load_model: cannot open " + path.string());
    detail::LineReader reader(in, path.string());

    if (reader.require("magic") != "# conn model")
      reader.fail("not a conn model file");
    long long version = 0;
    if (!parse_int(reader.header_value("format_version"), version))
      reader.fail("format_version is not an integer");
    if (version != kModelFormatVersion)
      throw FormatVersionError(path.string() + ": model format version " + std::to_string(version) +
                               " is not supported (expected " + std::to_string(kModelFormatVersion) + ")");

    ConnArchitecture arch;
    try
    {
      arch.activation = parse_activation(reader.header_value("activation"));
    }
    catch (const ArgumentError &e)
    {
      reader.fail(e.what());
    }
    long long state_dim = 0, horizon = 0;
    if (!parse_int(reader.header_value("state_dim"), state_dim) ||
        !parse_int(reader.header_value("horizon"), horizon) || state_dim < 1 || horizon < 1)
      reader.fail("bad state_dim/horizon");
    arch.state_dim = static_cast<int>(state_dim);
    arch.horizon = static_cast<int>(horizon);
    if (!parse_double(reader.header_value("input_scale"), arch.input_scale))
      reader.fail("bad input_scale");

    const std::string layers_text = reader.header_value("layers");
    std::vector<int> sizes;
    for (std::string_view tok : detail::split(layers_text, ' '))
    {
      long long v = 0;
      if (!parse_int(tok, v) || v < 1)
        reader.fail("bad layer size list");
      sizes.push_back(static_cast<int>(v));
    }
    if (sizes.size() < 2 || sizes.front() != arch.state_dim || sizes.back() != arch.horizon * arch.state_dim)
      reader.fail("layer sizes do not match state_dim/horizon");
    arch.hidden.assign(sizes.begin() + 1, sizes.end() - 1);

    const std::string hash_text = reader.header_value("train_config_hash");
    std::uint64_t hash = 0;
    if (hash_text.size() != 16 || std::sscanf(hash_text.c_str(), "%16llx", reinterpret_cast<unsigned long long *>(&hash)) != 1)
      reader.fail("bad train_config_hash");

    std::vector<Mat> w;
    std::vector<Vec> b;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    {
      const std::string head = reader.require("weights of layer " + std::to_string(l));
      const std::string expect = "weights " + std::to_string(l) + ' ' + std::to_string(sizes[l + 1]) + ' ' +
                                 std::to_string(sizes[l]);
      if (head != expect)
        reader.fail("expected '" + expect + "'");
      Mat wl(sizes[l + 1], sizes[l]);
      for (int r = 0; r < sizes[l + 1]; ++r)
      {
        const std::string line = reader.require("weights of layer " + std::to_string(l));
        const auto cols = detail::split(line, ',');
        if (static_cast<int>(cols.size()) != sizes[l])
          reader.fail("layer " + std::to_string(l) + " weight row " + std::to_string(r) + ": wrong field count");
        for (int c = 0; c < sizes[l]; ++c)
          if (!parse_double(cols[c], wl(r, c)))
            reader.fail("layer " + std::to_string(l) + " weight row " + std::to_string(r) + ": bad number");
      }
      const std::string bhead = reader.require("bias of layer " + std::to_string(l));
      if (bhead != "bias " + std::to_string(l) + ' ' + std::to_string(sizes[l + 1]))
        reader.fail("expected bias header of layer " + std::to_string(l));
      const std::string bias_line = reader.require("bias of layer " + std::to_string(l));
      const auto cols = detail::split(bias_line, ',');
      if (static_cast<int>(cols.size()) != sizes[l + 1])
        reader.fail("layer " + std::to_string(l) + " bias: wrong field count");
      Vec bl(sizes[l + 1]);
      for (int r = 0; r < sizes[l + 1]; ++r)
        if (!parse_double(cols[r], bl[r]))
          reader.fail("layer " + std::to_string(l) + " bias: bad number");
      w.push_back(std::move(wl));
      b.push_back(std::move(bl));
    }
    std::string extra;
    while (reader.next(extra))
      if (!extra.empty())
        reader.fail("unexpected trailing content");

    try
    {
      ConnModel model(arch, std::move(w), std::move(b));
      model.set_train_config_hash(hash);
      return model;
    }
    catch (const ArgumentError &e)
    {
      throw ParseError(path.string() + ": " + e.what());
    }
  }

} // namespace conn
