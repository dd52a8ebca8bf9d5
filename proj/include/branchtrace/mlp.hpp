#pragma once

// Fully connected feed-forward network with p inputs, l hidden layers of q
// neurons and one linear output, optionally multiplied by a mask that
// vanishes on the boundary of [0,1]^p.
//
// Flat weight layout: W₁ (p×q, row-major), b₁, then for each further hidden
// layer W_k (q×q, row-major), b_k, then w_out (q), b_out.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "branchtrace/error.hpp"
#include "branchtrace/types.hpp"

namespace branchtrace {

enum class Activation { tanh, sigmoid, gaussian };
enum class BoundaryMask { none, sin_pi_x, sin_pi_x_sin_pi_y };

std::string_view to_string(Activation a);
std::string_view to_string(BoundaryMask m);
Activation parse_activation(std::string_view s);
BoundaryMask parse_mask(std::string_view s);

/// σ and its first three derivatives at z.
struct ActivationValue {
  double s0;
  double s1;
  double s2;
  double s3;
};
ActivationValue activate(Activation a, double z);

std::size_t weight_count(int p, int l, int q);

/// The network output jet together with its derivative w.r.t. every weight.
struct WeightSensitivities {
  Jet output;
  std::vector<Jet> d;  // d[k] = ∂(output jet)/∂θ_k
};

class Mlp {
 public:
  Mlp(int p, int l, int q, Activation act, BoundaryMask mask, std::vector<double> weights);

  /// Weights i.i.d. uniform on (-range, range) from mt19937_64(seed); the
  /// output bias is then set to output_bias.
  static Mlp init_random(int p, int l, int q, Activation act, BoundaryMask mask, std::uint64_t seed,
                         double range = 0.01, double output_bias = 0.0);

  int inputs() const { return p_; }
  int hidden_layers() const { return l_; }
  int width() const { return q_; }
  Activation activation() const { return act_; }
  BoundaryMask mask() const { return mask_; }
  std::span<const double> weights() const { return w_; }
  std::size_t size() const { return w_.size(); }

  Mlp with_weights(std::vector<double> w) const;

  /// Index of the output bias inside weights().
  std::size_t output_bias_index() const { return w_.size() - 1; }
  /// Index of the first output-layer weight inside weights().
  std::size_t output_layer_offset() const { return w_.size() - 1 - static_cast<std::size_t>(q_); }

  double forward(const Point& x) const;
  Jet forward_with_input_derivs(const Point& x) const;

  /// Writes ∂(output jet)/∂θ_k into d[k] (d.size() == size()) and returns the
  /// output jet. The weight derivatives come from one reverse sweep over the
  /// per-neuron jets, so the cost is O(|θ|) per point.
  Jet weight_sensitivities(const Point& x, std::span<Jet> d) const;
  WeightSensitivities weight_sensitivities(const Point& x) const;

 private:
  int p_;
  int l_;
  int q_;
  Activation act_;
  BoundaryMask mask_;
  std::vector<double> w_;
};

/// Value, gradient and pure second derivatives of the mask at x.
Jet mask_jet(BoundaryMask m, const Point& x);

std::string to_json_string(const Mlp& net);
Mlp mlp_from_json_string(std::string_view text);
void save_checkpoint(const Mlp& net, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace branchtrace
