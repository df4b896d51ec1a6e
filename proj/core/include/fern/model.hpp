#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fern/rng.hpp"
#include "fern/tape.hpp"
#include "fern/tensor.hpp"

namespace fern::model {

// Ellipsoidal forecaster configuration. The context of length L and two
// noise draws are mapped through a bidirectional coupling encoder to a
// latent feature, which parameterizes one optimal-transport map per output
// patch: an ellipsoid given by eigenvalues, a shift, and a product of
// Householder reflections.
struct FernConfig {
  std::size_t context_len = 336;
  std::size_t horizon = 336;
  std::size_t patch = 24;
  std::size_t reflections = 8;
  std::size_t encoder_layers = 5;
  std::size_t decoder_steps = 2;
  std::size_t hidden = 128;
  // 0 means the latent dimension follows the horizon.
  std::size_t latent = 0;
  // Variance of the z and y0 noise draws.
  double noise_scale = 0.1;

  // Soft activation bounds.
  double scale_lo = 0.0;
  double scale_hi = 5.5;
  double block_lo = -4.5;
  double block_hi = 4.5;
  double shift_lo = -15.0;
  double shift_hi = 15.0;

  // 1-based encoder layers whose x-side scaling acts on consecutive pairs
  // as complex multiplications.
  std::vector<std::size_t> block_layers{2, 4};

  // Ablation toggles.
  bool no_rotation = false;
  bool no_patch = false;
  bool only_encoder = false;
  bool no_encoder_no_mu = false;

  std::size_t latent_dim() const { return latent ? latent : horizon; }
  std::size_t patch_size() const { return no_patch ? horizon : patch; }
  std::size_t patch_count() const { return horizon / patch_size(); }
  std::size_t reflection_count() const {
    return no_rotation ? 0 : reflections;
  }
  std::size_t decoder_count() const {
    return only_encoder || no_encoder_no_mu ? 0 : decoder_steps;
  }

  void validate() const;
  std::string to_json() const;
  static FernConfig from_json(const std::string& text);
};

struct Linear {
  num::Tensor w;  // [in, out]
  num::Tensor b;  // [out]
};

// Two linear layers with tanh after each.
struct Mlp2 {
  Linear l1;
  Linear l2;
};

// One residual refinement of the per-patch shift:
//   t <- t + tanh(t W_t + u W_u + b_in) W_out + b_out
struct DecoderStep {
  num::Tensor w_t;    // [p, p]
  num::Tensor w_u;    // [d_h, p]
  num::Tensor b_in;   // [p]
  num::Tensor w_out;  // [p, p]
  num::Tensor b_out;  // [p]
};

struct FernParameters {
  Mlp2 feature_x;                       // L -> d_h -> d_h
  Mlp2 feature_z;                       // d_z -> d_h -> d_h
  std::vector<Linear> head_x;           // per layer: d_h -> 2 d_z
  std::vector<Linear> head_z;           // per layer: d_h -> 2 L
  std::vector<num::Tensor> patch_embed; // per patch: [1, d_h]
  Mlp2 ot_head;                         // d_h -> d_h -> 2p + R*p
  std::vector<DecoderStep> decoder;

  // Visits every tensor in a fixed order with its stable name. The same
  // order drives binding, optimization, and checkpoints.
  template <class F>
  void for_each(F&& f) {
    const_cast<const FernParameters*>(this)->for_each(
        [&f](const std::string& name, const num::Tensor& t) {
          f(name, const_cast<num::Tensor&>(t));
        });
  }
  template <class F>
  void for_each(F&& f) const {
    auto mlp = [&f](const std::string& prefix, const Mlp2& m) {
      f(prefix + ".l1.w", m.l1.w);
      f(prefix + ".l1.b", m.l1.b);
      f(prefix + ".l2.w", m.l2.w);
      f(prefix + ".l2.b", m.l2.b);
    };
    mlp("feature_x", feature_x);
    mlp("feature_z", feature_z);
    for (std::size_t i = 0; i < head_x.size(); ++i) {
      f("head_x." + std::to_string(i) + ".w", head_x[i].w);
      f("head_x." + std::to_string(i) + ".b", head_x[i].b);
    }
    for (std::size_t i = 0; i < head_z.size(); ++i) {
      f("head_z." + std::to_string(i) + ".w", head_z[i].w);
      f("head_z." + std::to_string(i) + ".b", head_z[i].b);
    }
    for (std::size_t i = 0; i < patch_embed.size(); ++i) {
      f("patch_embed." + std::to_string(i), patch_embed[i]);
    }
    mlp("ot_head", ot_head);
    for (std::size_t i = 0; i < decoder.size(); ++i) {
      const std::string p = "decoder." + std::to_string(i);
      f(p + ".w_t", decoder[i].w_t);
      f(p + ".w_u", decoder[i].w_u);
      f(p + ".b_in", decoder[i].b_in);
      f(p + ".w_out", decoder[i].w_out);
      f(p + ".b_out", decoder[i].b_out);
    }
  }
};

// Fresh parameters: feature weights at 1/sqrt(fan_in), heads near zero with
// biases chosen so every soft-bounded scale starts at one, decoder output
// weights at zero so each refinement starts as the identity.
FernParameters init_parameters(const FernConfig& config, rng::Stream init);

std::size_t count_parameters(const FernParameters& params);

// Tape ids of one pushed parameter set, mirroring FernParameters. `all`
// lists the ids in for_each order.
struct BoundParameters {
  struct L {
    num::Tape::Id w, b;
  };
  struct M {
    L l1, l2;
  };
  M feature_x, feature_z;
  std::vector<L> head_x, head_z;
  std::vector<num::Tape::Id> patch_embed;
  M ot_head;
  struct D {
    num::Tape::Id w_t, w_u, b_in, w_out, b_out;
  };
  std::vector<D> decoder;
  std::vector<num::Tape::Id> all;
};

BoundParameters bind_parameters(num::Tape& tape,
                                const FernParameters& params);

// Detached per-patch transport factors for diagnostics: eigenvalues and
// shift are [B, p]; reflections holds R unit rows [B, p] each.
struct SPDFactors {
  num::Tensor eigenvalues;
  num::Tensor shift;
  std::vector<num::Tensor> reflections;
};

struct ForwardResult {
  num::Tape::Id prediction = -1;  // [B, horizon]
  std::vector<SPDFactors> factors;
  // Rows whose raw reflection vector had near-zero norm and fell back to
  // the first coordinate axis.
  std::size_t fallback_count = 0;
};

// Differentiable forward pass. x is [B, L]; z0 is [B, d_z]; y0 is [B, n].
// The inputs are recorded as constants; gradients flow to the bound
// parameters only. Set want_factors to also export detached SPD factors.
ForwardResult forward(num::Tape& tape, const BoundParameters& bound,
                      const FernConfig& config, const num::Tensor& x,
                      const num::Tensor& z0, const num::Tensor& y0,
                      bool want_factors = false);

// Gaussian noise [rows, cols] with variance `a`.
num::Tensor draw_noise(rng::Stream& stream, std::size_t rows,
                       std::size_t cols, double a);

// Multiply-add counter for reflection applications, for cost assertions.
std::uint64_t reflection_madds();
void reset_reflection_madds();

// Versioned binary checkpoint: magic, JSON manifest (config plus tensor
// names/shapes/offsets), then the little-endian float64 payload.
void save_checkpoint(const std::filesystem::path& path,
                     const FernParameters& params, const FernConfig& config);

struct Checkpoint {
  FernParameters params;
  FernConfig config;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fern::model
