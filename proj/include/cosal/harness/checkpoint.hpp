// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "cosal/core/error.hpp"
#include "cosal/core/nn.hpp"
#include "cosal/harness/config.hpp"

namespace cosal::harness {

/// Versioned training artifact: config snapshot, epoch, per-step loss
/// history, and every parameter and buffer tensor keyed by module path.
/// The writer is canonical, so save -> load -> save is byte-identical.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  RunConfig config;
  std::int64_t epoch = 0;
  std::vector<double> loss_history;
  std::vector<std::pair<std::string, Tensor<float>>> params;
  std::vector<std::pair<std::string, Tensor<float>>> buffers;

  template <typename ModuleT>
  static Checkpoint from_network(const RunConfig& cfg, ModuleT& net, std::int64_t epoch,
                                 std::vector<double> losses) {
    Checkpoint ck;
    ck.config = cfg;
    ck.epoch = epoch;
    ck.loss_history = std::move(losses);
    for (const auto& [name, var] : net.named_parameters())
      ck.params.emplace_back(name, var.value());
    for (auto& [name, buf] : net.named_buffers()) ck.buffers.emplace_back(name, *buf);
    return ck;
  }

  /// Copies stored tensors into a freshly constructed network. Every stored
  /// name must exist with the same shape, and the network must not have
  /// parameters the checkpoint lacks.
  template <typename ModuleT>
  void apply_to(ModuleT& net) const {
    auto named = net.named_parameters();
    check<ConfigError>(named.size() == params.size(), "checkpoint holds ", params.size(),
                       " parameter tensors but the network has ", named.size());
    for (std::size_t i = 0; i < named.size(); ++i) {
      check<ConfigError>(named[i].first == params[i].first,
                         "checkpoint parameter order mismatch: '", params[i].first, "' vs '",
                         named[i].first, "'");
      check<ConfigError>(named[i].second.value().shape() == params[i].second.shape(),
                         "checkpoint shape mismatch for ", params[i].first);
      auto var = named[i].second;
      var.value() = params[i].second;
    }
    auto bufs = net.named_buffers();
    check<ConfigError>(bufs.size() == buffers.size(), "checkpoint holds ", buffers.size(),
                       " buffers but the network has ", bufs.size());
    for (std::size_t i = 0; i < bufs.size(); ++i) {
      check<ConfigError>(bufs[i].first == buffers[i].first, "checkpoint buffer order mismatch: '",
                         buffers[i].first, "' vs '", bufs[i].first, "'");
      *bufs[i].second = buffers[i].second;
    }
  }
};

namespace detail {

inline constexpr char kCkptMagic[8] = {'C', 'O', 'S', 'A', 'L', 'C', 'K', '1'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  check<IngestionError>(static_cast<bool>(is), "checkpoint truncated while reading ", what);
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, const char* what) {
  const auto len = read_pod<std::uint32_t>(is, what);
  std::string s(len, '\0');
  is.read(s.data(), len);
  check<IngestionError>(static_cast<bool>(is), "checkpoint truncated while reading ", what);
  return s;
}

inline void write_tensor(std::ostream& os, const Tensor<float>& t) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) write_pod<std::int64_t>(os, d);
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(t.numel())));
}

inline Tensor<float> read_tensor(std::istream& is, const char* what) {
  const auto rank = read_pod<std::uint32_t>(is, what);
  Shape shape(rank);
  for (auto& d : shape) d = read_pod<std::int64_t>(is, what);
  Tensor<float> t(shape);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(t.numel())));
  check<IngestionError>(static_cast<bool>(is), "checkpoint truncated while reading ", what);
  return t;
}

inline void write_section(std::ostream& os,
                          const std::vector<std::pair<std::string, Tensor<float>>>& sec) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(sec.size()));
  for (const auto& [name, tensor] : sec) {
    write_string(os, name);
    write_tensor(os, tensor);
  }
}

inline std::vector<std::pair<std::string, Tensor<float>>> read_section(std::istream& is,
                                                                       const char* what) {
  const auto n = read_pod<std::uint32_t>(is, what);
  std::vector<std::pair<std::string, Tensor<float>>> sec;
  sec.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = read_string(is, what);
    Tensor<float> t = read_tensor(is, what);
    sec.emplace_back(std::move(name), std::move(t));
  }
  return sec;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  check<IngestionError>(os.good(), "cannot open checkpoint for writing: ", path.string());
  os.write(detail::kCkptMagic, sizeof detail::kCkptMagic);
  detail::write_pod<std::uint32_t>(os, Checkpoint::kVersion);
  detail::write_string(os, serialize_config(ck.config));
  detail::write_pod<std::int64_t>(os, ck.epoch);
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ck.loss_history.size()));
  for (double v : ck.loss_history) detail::write_pod<double>(os, v);
  detail::write_section(os, ck.params);
  detail::write_section(os, ck.buffers);
  check<IngestionError>(os.good(), "failed writing checkpoint: ", path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  check<IngestionError>(is.good(), "cannot open checkpoint: ", path.string());
  char magic[sizeof detail::kCkptMagic];
  is.read(magic, sizeof magic);
  check<IngestionError>(static_cast<bool>(is) &&
                            std::memcmp(magic, detail::kCkptMagic, sizeof magic) == 0,
                        "not a checkpoint file: ", path.string());
  const auto version = detail::read_pod<std::uint32_t>(is, "version");
  check<ConfigError>(version == Checkpoint::kVersion, "checkpoint version ", version,
                     " unsupported (expected ", Checkpoint::kVersion, ")");
  Checkpoint ck;
  ck.config = parse_config_text(detail::read_string(is, "config"), /*env_overrides=*/false);
  ck.epoch = detail::read_pod<std::int64_t>(is, "epoch");
  const auto n_losses = detail::read_pod<std::uint32_t>(is, "loss history");
  ck.loss_history.resize(n_losses);
  for (auto& v : ck.loss_history) v = detail::read_pod<double>(is, "loss history");
  ck.params = detail::read_section(is, "parameters");
  ck.buffers = detail::read_section(is, "buffers");
  return ck;
}

}  // namespace cosal::harness
