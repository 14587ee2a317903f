#include "traitlab/lora.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

#include "traitlab/errors.hpp"
#include "traitlab/format.hpp"
#include "traitlab/io.hpp"
#include "traitlab/version.hpp"

namespace traitlab::lora {

namespace {

constexpr char kAdapterMagic[4] = {'T', 'L', 'A', 'D'};
constexpr std::uint32_t kAdapterVersion = 1;

double next_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool known_target(std::string_view name) {
  return std::find(microlm::kProjectionNames.begin(), microlm::kProjectionNames.end(), name) !=
         microlm::kProjectionNames.end();
}

void check_against_weight(const Eigen::MatrixXd& weight, const LoraAdapter& adapter) {
  if (adapter.a.cols() != weight.cols() || adapter.b.rows() != weight.rows() ||
      adapter.a.rows() != adapter.rank || adapter.b.cols() != adapter.rank) {
    throw DimensionMismatch("adapter shapes (" + std::to_string(adapter.b.rows()) + "x" +
                            std::to_string(adapter.rank) + ")(" + std::to_string(adapter.a.rows()) +
                            "x" + std::to_string(adapter.a.cols()) + ") do not wrap weight " +
                            std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()));
  }
}

}  // namespace

LoraAdapter make_adapter(int d_out, int d_in, int rank, double alpha, std::uint64_t seed,
                         double dropout_rate) {
  if (rank < 1) throw RankTooLarge("rank must be >= 1");
  if (rank > std::min(d_out, d_in)) {
    throw RankTooLarge("rank " + std::to_string(rank) + " exceeds min(d_out, d_in) = " +
                       std::to_string(std::min(d_out, d_in)));
  }
  LoraAdapter adapter;
  adapter.rank = rank;
  adapter.alpha = alpha;
  adapter.dropout_rate = dropout_rate;
  adapter.a.resize(rank, d_in);
  std::mt19937_64 rng(seed);
  const double limit = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (Eigen::Index r = 0; r < adapter.a.rows(); ++r) {
    for (Eigen::Index c = 0; c < adapter.a.cols(); ++c) {
      adapter.a(r, c) = (2.0 * next_unit(rng) - 1.0) * limit;
    }
  }
  adapter.b = Eigen::MatrixXd::Zero(d_out, rank);
  return adapter;
}

Eigen::MatrixXd effective_weight(const Eigen::MatrixXd& weight, const LoraAdapter& adapter) {
  check_against_weight(weight, adapter);
  return weight + adapter.scale() * adapter.b * adapter.a;
}

microlm::Model merge(const microlm::Model& model, const AdapterSet& adapters) {
  microlm::Model merged = model;
  for (const auto& [key, adapter] : adapters.entries) {
    const auto& [layer, name] = key;
    if (layer < 0 || layer >= model.config.n_layers || !known_target(name)) {
      throw UnknownTarget("no projection (" + std::to_string(layer) + ", " + name + ")");
    }
    Eigen::MatrixXd& weight = merged.projection(layer, name);
    weight = effective_weight(weight, adapter);
  }
  return merged;
}

microlm::ProjectionHook attach(const AdapterSet& adapters) {
  // copy the set so the hook owns its adapters
  auto owned = std::make_shared<AdapterSet>(adapters);
  return [owned](int layer, std::string_view name, const Eigen::MatrixXd& input,
                 Eigen::MatrixXd& output) {
    auto it = owned->entries.find({layer, std::string(name)});
    if (it == owned->entries.end()) return;
    const LoraAdapter& adapter = it->second;
    if (adapter.a.cols() != input.cols() || adapter.b.rows() != output.cols()) {
      throw DimensionMismatch("attached adapter does not fit projection '" + std::string(name) +
                              "'");
    }
    output.noalias() += adapter.scale() * (input * adapter.a.transpose()) * adapter.b.transpose();
  };
}

void save_adapters(const std::filesystem::path& path, const AdapterSet& adapters) {
  std::string buf;
  auto u32 = [&buf](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
  };
  auto u64 = [&buf](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
  };
  auto f64 = [&u64](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  };
  auto str = [&buf, &u32](std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf.append(s.data(), s.size());
  };
  auto matrix = [&f64](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  };

  buf.append(kAdapterMagic, 4);
  u32(kAdapterVersion);
  str(to_string(adapters.trait));
  u32(static_cast<std::uint32_t>(adapters.entries.size()));
  for (const auto& [key, adapter] : adapters.entries) {
    u32(static_cast<std::uint32_t>(key.first));
    str(key.second);
    u32(static_cast<std::uint32_t>(adapter.rank));
    f64(adapter.alpha);
    f64(adapter.dropout_rate);
    u64(static_cast<std::uint64_t>(adapter.b.rows()));  // d_out
    u64(static_cast<std::uint64_t>(adapter.a.cols()));  // d_in
  }
  for (const auto& [key, adapter] : adapters.entries) {
    matrix(adapter.a);
    matrix(adapter.b);
  }
  atomic_write_file(path, buf);

  std::ostringstream manifest;
  manifest << "trait: " << to_string(adapters.trait) << "\n";
  if (!adapters.entries.empty()) {
    const LoraAdapter& first = adapters.entries.begin()->second;
    manifest << "rank: " << first.rank << "\n";
    manifest << "alpha: " << format_double(first.alpha) << "\n";
    manifest << "dropout: " << format_double(first.dropout_rate) << "\n";
  }
  manifest << "targets:\n";
  for (const auto& [key, adapter] : adapters.entries) {
    manifest << "  layer " << key.first << " " << key.second << " (" << adapter.b.rows() << "x"
             << adapter.a.cols() << ", rank " << adapter.rank << ")\n";
  }
  std::filesystem::path manifest_path = path;
  manifest_path += ".manifest.txt";
  atomic_write_file(manifest_path, manifest.str());
}

AdapterSet load_adapters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > data.size()) throw ParseError("truncated adapter file");
  };
  auto u32 = [&]() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(data[pos + i]);
    pos += 4;
    return v;
  };
  auto u64 = [&]() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(data[pos + i]);
    pos += 8;
    return v;
  };
  auto f64 = [&]() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  };
  auto str = [&]() {
    std::uint32_t n = u32();
    need(n);
    std::string s = data.substr(pos, n);
    pos += n;
    return s;
  };

  need(4);
  if (std::memcmp(data.data(), kAdapterMagic, 4) != 0) throw ParseError("bad adapter file magic");
  pos += 4;
  if (u32() != kAdapterVersion) throw ParseError("unsupported adapter file version");

  AdapterSet set;
  set.trait = parse_trait(str());
  const std::uint32_t n_entries = u32();
  struct Entry {
    int layer;
    std::string name;
    int rank;
    double alpha;
    double dropout;
    Eigen::Index d_out;
    Eigen::Index d_in;
  };
  std::vector<Entry> table;
  table.reserve(n_entries);
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    Entry e;
    e.layer = static_cast<int>(u32());
    e.name = str();
    e.rank = static_cast<int>(u32());
    e.alpha = f64();
    e.dropout = f64();
    e.d_out = static_cast<Eigen::Index>(u64());
    e.d_in = static_cast<Eigen::Index>(u64());
    table.push_back(std::move(e));
  }
  for (const Entry& e : table) {
    LoraAdapter adapter;
    adapter.target = e.name;
    adapter.rank = e.rank;
    adapter.alpha = e.alpha;
    adapter.dropout_rate = e.dropout;
    adapter.a.resize(e.rank, e.d_in);
    for (Eigen::Index r = 0; r < adapter.a.rows(); ++r) {
      for (Eigen::Index c = 0; c < adapter.a.cols(); ++c) adapter.a(r, c) = f64();
    }
    adapter.b.resize(e.d_out, e.rank);
    for (Eigen::Index r = 0; r < adapter.b.rows(); ++r) {
      for (Eigen::Index c = 0; c < adapter.b.cols(); ++c) adapter.b(r, c) = f64();
    }
    set.entries[{e.layer, e.name}] = std::move(adapter);
  }
  return set;
}

}  // namespace traitlab::lora
