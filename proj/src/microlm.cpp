#include "traitlab/microlm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "traitlab/errors.hpp"
#include "traitlab/format.hpp"

namespace traitlab::microlm {

namespace {

constexpr double kNormEps = 1e-6;

// Pinned uniform draw: std::mt19937_64 output mapped to [0,1) by the
// 53-bit mantissa rule. Both halves are fixed by the standard, so the
// stream is portable across platforms and library versions.
double next_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void fill_glorot(Eigen::MatrixXd& m, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = (2.0 * next_unit(rng) - 1.0) * limit;
    }
  }
}

Eigen::MatrixXd rms_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& scale) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double ms = x.row(r).squaredNorm() / static_cast<double>(x.cols());
    out.row(r) = x.row(r) / std::sqrt(ms + kNormEps);
  }
  out = out.array().rowwise() * scale.transpose().array();
  return out;
}

double silu(double v) { return v / (1.0 + std::exp(-v)); }

struct ByteWriter {
  std::string buf;

  void raw(const void* data, std::size_t n) {
    buf.append(static_cast<const char*>(data), n);
  }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    raw(b, 4);
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    raw(b, 8);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void matrix(const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }
  void vector(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }
};

struct ByteReader {
  std::string_view buf;
  std::size_t pos = 0;

  void raw(void* out, std::size_t n) {
    if (pos + n > buf.size()) throw ParseError("truncated binary file");
    std::memcpy(out, buf.data() + pos, n);
    pos += n;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    raw(b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint64_t u64() {
    unsigned char b[8];
    raw(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    std::uint32_t n = u32();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  void matrix(Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
    m.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
    }
  }
  void vector(Eigen::VectorXd& v, Eigen::Index n) {
    v.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = f64();
  }
};

void write_weights(ByteWriter& w, const Model& model) {
  w.matrix(model.tok_embed);
  w.matrix(model.pos_embed);
  for (const LayerWeights& layer : model.layers) {
    w.vector(layer.ln_attn);
    w.matrix(layer.q_proj);
    w.matrix(layer.k_proj);
    w.matrix(layer.v_proj);
    w.matrix(layer.o_proj);
    w.vector(layer.ln_post_attn);
    w.vector(layer.ln_mlp);
    w.matrix(layer.gate_proj);
    w.matrix(layer.up_proj);
    w.matrix(layer.down_proj);
  }
  w.vector(model.ln_final);
  w.matrix(model.unembed);
}

constexpr char kModelMagic[4] = {'T', 'L', 'M', 'W'};
constexpr std::uint32_t kModelVersion = 1;
constexpr char kActMagic[4] = {'T', 'L', 'A', 'B'};
constexpr std::uint32_t kActVersion = 1;

void check_site(const ModelConfig& config, LayerSite site) {
  if (site.layer < 0 || site.layer >= config.n_layers) {
    throw InvalidSite("layer " + std::to_string(site.layer) + " outside depth " +
                      std::to_string(config.n_layers));
  }
}

void check_hooks(const Model& model, const HookSet& hooks) {
  for (const auto& cap : hooks.captures) check_site(model.config, cap.site);
  for (const auto& inj : hooks.injects) {
    check_site(model.config, inj.site);
    if (inj.vector.size() != model.config.d_model) {
      throw DimensionMismatch("inject vector has dim " + std::to_string(inj.vector.size()) +
                              ", model d_model is " + std::to_string(model.config.d_model));
    }
  }
}

}  // namespace

void validate(const ModelConfig& config) {
  if (config.vocab_size < 1 || config.d_model < 1 || config.n_heads < 1 ||
      config.max_seq_len < 1) {
    throw InvalidConfig("all dimensions must be positive");
  }
  if (config.n_layers < 1) throw InvalidConfig("n_layers must be >= 1");
  if (config.d_model % config.n_heads != 0) {
    throw InvalidConfig("d_model " + std::to_string(config.d_model) +
                        " not divisible by n_heads " + std::to_string(config.n_heads));
  }
}

std::string Model::label() const {
  return "microlm-L" + std::to_string(config.n_layers) + "-d" + std::to_string(config.d_model) +
         "-s" + std::to_string(config.seed);
}

const Eigen::MatrixXd& Model::projection(int layer, std::string_view name) const {
  return const_cast<Model*>(this)->projection(layer, name);
}

Eigen::MatrixXd& Model::projection(int layer, std::string_view name) {
  if (layer < 0 || layer >= static_cast<int>(layers.size())) {
    throw UnknownTarget("layer " + std::to_string(layer) + " outside depth " +
                        std::to_string(layers.size()));
  }
  LayerWeights& lw = layers[static_cast<std::size_t>(layer)];
  if (name == "q_proj") return lw.q_proj;
  if (name == "k_proj") return lw.k_proj;
  if (name == "v_proj") return lw.v_proj;
  if (name == "o_proj") return lw.o_proj;
  if (name == "gate_proj") return lw.gate_proj;
  if (name == "up_proj") return lw.up_proj;
  if (name == "down_proj") return lw.down_proj;
  throw UnknownTarget("no projection named '" + std::string(name) + "'");
}

Model init_model(const ModelConfig& config) {
  validate(config);
  Model model;
  model.config = config;
  std::mt19937_64 rng(config.seed);

  model.tok_embed.resize(config.vocab_size, config.d_model);
  fill_glorot(model.tok_embed, rng);
  model.pos_embed.resize(config.max_seq_len, config.d_model);
  fill_glorot(model.pos_embed, rng);

  model.layers.resize(static_cast<std::size_t>(config.n_layers));
  for (LayerWeights& layer : model.layers) {
    layer.ln_attn = Eigen::VectorXd::Ones(config.d_model);
    layer.q_proj.resize(config.d_model, config.d_model);
    fill_glorot(layer.q_proj, rng);
    layer.k_proj.resize(config.d_model, config.d_model);
    fill_glorot(layer.k_proj, rng);
    layer.v_proj.resize(config.d_model, config.d_model);
    fill_glorot(layer.v_proj, rng);
    layer.o_proj.resize(config.d_model, config.d_model);
    fill_glorot(layer.o_proj, rng);
    layer.ln_post_attn = Eigen::VectorXd::Ones(config.d_model);
    layer.ln_mlp = Eigen::VectorXd::Ones(config.d_model);
    layer.gate_proj.resize(config.d_ff(), config.d_model);
    fill_glorot(layer.gate_proj, rng);
    layer.up_proj.resize(config.d_ff(), config.d_model);
    fill_glorot(layer.up_proj, rng);
    layer.down_proj.resize(config.d_model, config.d_ff());
    fill_glorot(layer.down_proj, rng);
  }
  model.ln_final = Eigen::VectorXd::Ones(config.d_model);
  model.unembed.resize(config.vocab_size, config.d_model);
  fill_glorot(model.unembed, rng);
  return model;
}

std::uint64_t weight_checksum(const Model& model) {
  ByteWriter w;
  write_weights(w, model);
  return fnv1a64(w.buf.data(), w.buf.size());
}

void save_model(const std::filesystem::path& path, const Model& model) {
  ByteWriter payload;
  write_weights(payload, model);

  ByteWriter w;
  w.raw(kModelMagic, 4);
  w.u32(kModelVersion);
  w.i32(model.config.vocab_size);
  w.i32(model.config.d_model);
  w.i32(model.config.n_layers);
  w.i32(model.config.n_heads);
  w.i32(model.config.max_seq_len);
  w.u64(model.config.seed);
  w.u64(fnv1a64(payload.buf.data(), payload.buf.size()));
  w.buf += payload.buf;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  if (!out.good()) throw IoError("write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  ByteReader r{data};
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0) throw ParseError("bad model magic");
  if (r.u32() != kModelVersion) throw ParseError("unsupported model version");

  Model model;
  model.config.vocab_size = r.i32();
  model.config.d_model = r.i32();
  model.config.n_layers = r.i32();
  model.config.n_heads = r.i32();
  model.config.max_seq_len = r.i32();
  model.config.seed = r.u64();
  validate(model.config);
  const std::uint64_t stored_checksum = r.u64();

  const ModelConfig& c = model.config;
  r.matrix(model.tok_embed, c.vocab_size, c.d_model);
  r.matrix(model.pos_embed, c.max_seq_len, c.d_model);
  model.layers.resize(static_cast<std::size_t>(c.n_layers));
  for (LayerWeights& layer : model.layers) {
    r.vector(layer.ln_attn, c.d_model);
    r.matrix(layer.q_proj, c.d_model, c.d_model);
    r.matrix(layer.k_proj, c.d_model, c.d_model);
    r.matrix(layer.v_proj, c.d_model, c.d_model);
    r.matrix(layer.o_proj, c.d_model, c.d_model);
    r.vector(layer.ln_post_attn, c.d_model);
    r.vector(layer.ln_mlp, c.d_model);
    r.matrix(layer.gate_proj, c.d_ff(), c.d_model);
    r.matrix(layer.up_proj, c.d_ff(), c.d_model);
    r.matrix(layer.down_proj, c.d_model, c.d_ff());
  }
  r.vector(model.ln_final, c.d_model);
  r.matrix(model.unembed, c.vocab_size, c.d_model);

  if (weight_checksum(model) != stored_checksum) {
    throw ParseError("model checksum mismatch: " + path.string());
  }
  return model;
}

HookSet& HookSet::add_capture(LayerSite site) {
  captures.push_back({site});
  return *this;
}

HookSet& HookSet::add_inject(LayerSite site, Eigen::VectorXd vector, double strength) {
  injects.push_back({site, std::move(vector), strength});
  return *this;
}

ForwardResult forward(const Model& model, std::span<const int> tokens, const HookSet& hooks,
                      const ProjectionHook& projection_hook) {
  const ModelConfig& c = model.config;
  if (tokens.empty()) throw EmptyInput("token sequence is empty");
  if (static_cast<int>(tokens.size()) > c.max_seq_len) {
    throw SequenceTooLong(std::to_string(tokens.size()) + " tokens, max_seq_len " +
                          std::to_string(c.max_seq_len));
  }
  for (int t : tokens) {
    if (t < 0 || t >= c.vocab_size) {
      throw InvalidArgument("token id " + std::to_string(t) + " outside vocab");
    }
  }
  check_hooks(model, hooks);

  const auto n = static_cast<Eigen::Index>(tokens.size());
  const Eigen::Index d = c.d_model;
  const int dh = c.head_dim();
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  auto project = [&](int layer, std::string_view name, const Eigen::MatrixXd& input) {
    Eigen::MatrixXd out = input * model.projection(layer, name).transpose();
    if (projection_hook) projection_hook(layer, name, input, out);
    return out;
  };

  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = model.tok_embed.row(tokens[static_cast<std::size_t>(i)]) + model.pos_embed.row(i);
  }

  ForwardResult result;
  result.captured.d_model = c.d_model;

  for (int l = 0; l < c.n_layers; ++l) {
    const LayerWeights& lw = model.layers[static_cast<std::size_t>(l)];

    const Eigen::MatrixXd attn_in = rms_norm(x, lw.ln_attn);
    const Eigen::MatrixXd q = project(l, "q_proj", attn_in);
    const Eigen::MatrixXd k = project(l, "k_proj", attn_in);
    const Eigen::MatrixXd v = project(l, "v_proj", attn_in);

    Eigen::MatrixXd attn_out(n, d);
    for (int h = 0; h < c.n_heads; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
      Eigen::MatrixXd scores =
          q.middleCols(off, dh) * k.middleCols(off, dh).transpose() * attn_scale;
      // causal mask + row softmax
      for (Eigen::Index i = 0; i < n; ++i) {
        double row_max = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j <= i; ++j) row_max = std::max(row_max, scores(i, j));
        double denom = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) {
          scores(i, j) = std::exp(scores(i, j) - row_max);
          denom += scores(i, j);
        }
        for (Eigen::Index j = 0; j <= i; ++j) scores(i, j) /= denom;
        for (Eigen::Index j = i + 1; j < n; ++j) scores(i, j) = 0.0;
      }
      attn_out.middleCols(off, dh) = scores * v.middleCols(off, dh);
    }
    attn_out = project(l, "o_proj", attn_out);

    Eigen::MatrixXd site = rms_norm(attn_out, lw.ln_post_attn);
    for (const auto& cap : hooks.captures) {
      if (cap.site.layer != l) continue;
      for (Eigen::Index i = 0; i < n; ++i) {
        result.captured.records.push_back({0, l, static_cast<int>(i), site.row(i).transpose()});
      }
    }
    for (const auto& inj : hooks.injects) {
      if (inj.site.layer != l) continue;
      site.rowwise() += (inj.strength * inj.vector).transpose();
    }
    x += site;

    const Eigen::MatrixXd mlp_in = rms_norm(x, lw.ln_mlp);
    const Eigen::MatrixXd gate = project(l, "gate_proj", mlp_in);
    const Eigen::MatrixXd up = project(l, "up_proj", mlp_in);
    Eigen::MatrixXd act(n, c.d_ff());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < c.d_ff(); ++j) act(i, j) = silu(gate(i, j)) * up(i, j);
    }
    x += project(l, "down_proj", act);
  }

  const Eigen::MatrixXd final_norm = rms_norm(x, model.ln_final);
  result.logits = final_norm * model.unembed.transpose();
  return result;
}

std::vector<int> generate(const Model& model, std::span<const int> prompt, int max_new,
                          const HookSet& hooks, const Sampling& sampling,
                          const ProjectionHook& projection_hook) {
  if (prompt.empty()) throw EmptyInput("prompt is empty");
  if (max_new < 0) throw InvalidArgument("max_new must be >= 0");

  std::vector<int> tokens(prompt.begin(), prompt.end());
  std::vector<int> continuation;
  std::mt19937_64 rng(sampling.seed);

  for (int step = 0; step < max_new; ++step) {
    ForwardResult fr = forward(model, tokens, hooks, projection_hook);
    const Eigen::Index last = fr.logits.rows() - 1;

    int next = 0;
    if (sampling.mode == Sampling::Mode::Greedy) {
      double best = fr.logits(last, 0);
      for (Eigen::Index t = 1; t < fr.logits.cols(); ++t) {
        if (fr.logits(last, t) > best) {
          best = fr.logits(last, t);
          next = static_cast<int>(t);
        }
      }
    } else {
      if (sampling.temperature <= 0.0) throw InvalidArgument("temperature must be > 0");
      Eigen::VectorXd logits = fr.logits.row(last).transpose() / sampling.temperature;
      const double row_max = logits.maxCoeff();
      Eigen::VectorXd probs = (logits.array() - row_max).exp();
      probs /= probs.sum();
      const double r = next_unit(rng);
      double cum = 0.0;
      next = static_cast<int>(probs.size()) - 1;
      for (Eigen::Index t = 0; t < probs.size(); ++t) {
        cum += probs(t);
        if (r < cum) {
          next = static_cast<int>(t);
          break;
        }
      }
    }

    tokens.push_back(next);
    continuation.push_back(next);
    if (next == kEosToken && model.config.vocab_size > kEosToken) break;
  }
  return continuation;
}

ActivationBatch capture_activations(const Model& model,
                                    const std::vector<std::vector<int>>& prompts,
                                    const std::vector<LayerSite>& sites, Pooling pooling) {
  for (LayerSite site : sites) check_site(model.config, site);

  ActivationBatch batch;
  batch.d_model = model.config.d_model;
  HookSet hooks;
  for (LayerSite site : sites) hooks.add_capture(site);

  for (std::size_t p = 0; p < prompts.size(); ++p) {
    ForwardResult fr = forward(model, prompts[p], hooks);
    for (LayerSite site : sites) {
      Eigen::VectorXd pooled = Eigen::VectorXd::Zero(model.config.d_model);
      int count = 0;
      int last_position = -1;
      for (const ActivationRecord& rec : fr.captured.records) {
        if (rec.layer != site.layer) continue;
        if (pooling == Pooling::MeanPositions) {
          pooled += rec.values;
          ++count;
        } else if (rec.position > last_position) {
          pooled = rec.values;
          last_position = rec.position;
        }
      }
      if (pooling == Pooling::MeanPositions && count > 0) pooled /= count;
      batch.records.push_back({static_cast<int>(p), site.layer, -1, std::move(pooled)});
    }
  }
  return batch;
}

void save_activations(const std::filesystem::path& path, const ActivationBatch& batch) {
  ByteWriter w;
  w.raw(kActMagic, 4);
  w.u32(kActVersion);
  w.i32(batch.d_model);
  w.u64(batch.records.size());
  w.str(batch.prompt_id);
  w.str(batch.polarity);
  // columnar: index columns first, then all vectors contiguously
  for (const auto& rec : batch.records) w.i32(rec.prompt_index);
  for (const auto& rec : batch.records) w.i32(rec.layer);
  for (const auto& rec : batch.records) w.i32(rec.position);
  for (const auto& rec : batch.records) {
    if (rec.values.size() != batch.d_model) {
      throw DimensionMismatch("activation record dim != batch d_model");
    }
    w.vector(rec.values);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  if (!out.good()) throw IoError("write failed: " + path.string());
}

ActivationBatch load_activations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  ByteReader r{data};
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kActMagic, 4) != 0) throw ParseError("bad activation file magic");
  if (r.u32() != kActVersion) throw ParseError("unsupported activation file version");

  ActivationBatch batch;
  batch.d_model = r.i32();
  const std::uint64_t n = r.u64();
  batch.prompt_id = r.str();
  batch.polarity = r.str();
  batch.records.resize(n);
  for (auto& rec : batch.records) rec.prompt_index = r.i32();
  for (auto& rec : batch.records) rec.layer = r.i32();
  for (auto& rec : batch.records) rec.position = r.i32();
  for (auto& rec : batch.records) r.vector(rec.values, batch.d_model);
  return batch;
}

std::vector<int> encode_bytes(std::string_view text, bool add_bos) {
  std::vector<int> tokens;
  tokens.reserve(text.size() + 1);
  if (add_bos) tokens.push_back(kBosToken);
  for (unsigned char c : text) tokens.push_back(static_cast<int>(c));
  return tokens;
}

std::string decode_bytes(std::span<const int> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (int t : tokens) {
    if (t >= 0 && t < kByteTokens) out.push_back(static_cast<char>(t));
  }
  return out;
}

}  // namespace traitlab::microlm
