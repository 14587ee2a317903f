#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "traitlab/domain.hpp"

namespace traitlab::microlm {

// Byte-level vocabulary: tokens 0..255 are raw bytes, then the specials.
inline constexpr int kByteTokens = 256;
inline constexpr int kBosToken = 256;
inline constexpr int kEosToken = 257;
inline constexpr int kDefaultVocab = 258;

struct ModelConfig {
  int vocab_size = kDefaultVocab;
  int d_model = 64;
  int n_layers = 8;
  int n_heads = 4;
  int max_seq_len = 256;
  std::uint64_t seed = 0x7261697473ull;

  // d_ff is a fixed ratio of d_model; kept out of the config so two
  // configs with equal fields always describe identical models.
  int d_ff() const { return 4 * d_model; }
  int head_dim() const { return d_model / n_heads; }
};

// Throws InvalidConfig on any violated invariant.
void validate(const ModelConfig& config);

// One decoder block. Attention and the gated MLP are bias-free; the
// norms are RMS norms with a learned scale (initialised to 1).
struct LayerWeights {
  Eigen::VectorXd ln_attn;       // pre-attention norm scale
  Eigen::MatrixXd q_proj;        // (d_model, d_model)
  Eigen::MatrixXd k_proj;        // (d_model, d_model)
  Eigen::MatrixXd v_proj;        // (d_model, d_model)
  Eigen::MatrixXd o_proj;        // (d_model, d_model)
  Eigen::VectorXd ln_post_attn;  // the capture/inject site's norm scale
  Eigen::VectorXd ln_mlp;
  Eigen::MatrixXd gate_proj;  // (d_ff, d_model)
  Eigen::MatrixXd up_proj;    // (d_ff, d_model)
  Eigen::MatrixXd down_proj;  // (d_model, d_ff)
};

// The seven adapter-targetable projection names, matching the member
// matrices above.
inline constexpr std::array<std::string_view, 7> kProjectionNames = {
    "q_proj", "k_proj", "v_proj", "o_proj", "gate_proj", "up_proj", "down_proj",
};

struct Model {
  ModelConfig config;
  Eigen::MatrixXd tok_embed;  // (vocab_size, d_model)
  Eigen::MatrixXd pos_embed;  // (max_seq_len, d_model)
  std::vector<LayerWeights> layers;
  Eigen::VectorXd ln_final;
  Eigen::MatrixXd unembed;  // (vocab_size, d_model)

  // Stable id for run records: "microlm-L<layers>-d<dim>-s<seed>".
  std::string label() const;

  const Eigen::MatrixXd& projection(int layer, std::string_view name) const;
  Eigen::MatrixXd& projection(int layer, std::string_view name);
};

// Weights are a pure function of the config: a single std::mt19937_64
// stream seeded with config.seed, mapped to [0,1) by (x >> 11) * 2^-53,
// fills every projection row-major with Glorot-uniform values
// (limit sqrt(6 / (fan_in + fan_out))). Norm scales are constant 1 and
// consume no draws. Matrix order: tok_embed, pos_embed, then per layer
// q,k,v,o,gate,up,down, then unembed.
Model init_model(const ModelConfig& config);

// FNV-1a over the little-endian bytes of every matrix in serialization
// order. Equal configs give equal checksums by construction.
std::uint64_t weight_checksum(const Model& model);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

// Activation hooks. Capture never perturbs the forward pass; inject adds
// strength * vector to the post-attention-norm output at every position.
// Multiple inject entries may target one site: they stack additively, so
// strengths a then b behave as a+b.
struct HookSet {
  struct Capture {
    LayerSite site;
  };
  struct Inject {
    LayerSite site;
    Eigen::VectorXd vector;
    double strength = 0.0;
  };

  std::vector<Capture> captures;
  std::vector<Inject> injects;

  HookSet& add_capture(LayerSite site);
  HookSet& add_inject(LayerSite site, Eigen::VectorXd vector, double strength);
  bool empty() const { return captures.empty() && injects.empty(); }
};

// Per-position activations captured at hook sites. position == -1 marks
// a pooled vector (see capture_activations).
struct ActivationRecord {
  int prompt_index = 0;
  int layer = 0;
  int position = 0;
  Eigen::VectorXd values;
};

struct ActivationBatch {
  int d_model = 0;
  std::string prompt_id;
  std::string polarity;  // "high" / "low" / "" when not trait-tagged
  std::vector<ActivationRecord> records;
};

void save_activations(const std::filesystem::path& path, const ActivationBatch& batch);
ActivationBatch load_activations(const std::filesystem::path& path);

// Called after each of the seven projections with the projection input
// (rows = positions) and the output to adjust in place. The LoRA module
// uses this to run attached adapters without touching base weights.
using ProjectionHook = std::function<void(int layer, std::string_view name,
                                          const Eigen::MatrixXd& input,
                                          Eigen::MatrixXd& output)>;

struct ForwardResult {
  Eigen::MatrixXd logits;  // (n_positions, vocab_size)
  ActivationBatch captured;
};

ForwardResult forward(const Model& model, std::span<const int> tokens,
                      const HookSet& hooks = {}, const ProjectionHook& projection_hook = {});

struct Sampling {
  enum class Mode { Greedy, Temperature };
  Mode mode = Mode::Greedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  static Sampling greedy() { return {}; }
  static Sampling with_temperature(double t, std::uint64_t seed) {
    return {Mode::Temperature, t, seed};
  }
};

// Returns only the continuation. Fully deterministic given (model,
// prompt, hooks, sampling); greedy ties break toward the lowest token id.
std::vector<int> generate(const Model& model, std::span<const int> prompt, int max_new,
                          const HookSet& hooks = {}, const Sampling& sampling = {},
                          const ProjectionHook& projection_hook = {});

enum class Pooling { LastToken, MeanPositions };

// One pooled vector per (prompt, site); records carry position == -1.
ActivationBatch capture_activations(const Model& model,
                                    const std::vector<std::vector<int>>& prompts,
                                    const std::vector<LayerSite>& sites,
                                    Pooling pooling = Pooling::LastToken);

// Byte-level token helpers.
std::vector<int> encode_bytes(std::string_view text, bool add_bos = true);
std::string decode_bytes(std::span<const int> tokens);

}  // namespace traitlab::microlm
