#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gaitkit/error.hpp"
#include "gaitkit/model.hpp"

namespace gaitkit {

// Layout (all integers u32 little-endian, floats IEEE-754 binary32 little-endian):
//   magic "GKCP" | version
//   channel count | channels... | temporal_kernel | embedding_dim | frames | joints | partitions
//   tensor count | per tensor: name length | name bytes | rows | cols | rows*cols floats (row-major)
inline constexpr std::array<char, 4> kCheckpointMagic{'G', 'K', 'C', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  require(static_cast<bool>(is), ErrorCode::CheckpointError, "truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint32_t checked_u32(std::size_t v) {
  require(v <= 0xFFFFFFFFu, ErrorCode::CheckpointError, "value does not fit the checkpoint format");
  return static_cast<std::uint32_t>(v);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const ModelParams<float>& params) {
  const auto& cfg = params.config;
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, detail::checked_u32(cfg.channels.size()));
  for (const auto c : cfg.channels) detail::put_u32(os, detail::checked_u32(c));
  for (const auto v : {cfg.temporal_kernel, cfg.embedding_dim, cfg.frames, cfg.joints, cfg.partitions})
    detail::put_u32(os, detail::checked_u32(v));
  std::uint32_t count = 0;
  for_each_tensor(params, [&](const std::string&, const Mat<float>&) { ++count; });
  detail::put_u32(os, count);
  for_each_tensor(params, [&](const std::string& name, const Mat<float>& m) {
    detail::put_u32(os, detail::checked_u32(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(os, detail::checked_u32(static_cast<std::size_t>(m.rows())));
    detail::put_u32(os, detail::checked_u32(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.size(); ++i) detail::put_u32(os, std::bit_cast<std::uint32_t>(m.data()[i]));
  });
  require(static_cast<bool>(os), ErrorCode::IoError, "failed writing checkpoint");
}

inline ModelParams<float> read_checkpoint(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  require(static_cast<bool>(is) && magic == kCheckpointMagic, ErrorCode::CheckpointError, "bad checkpoint magic");
  const auto version = detail::get_u32(is);
  require(version == kCheckpointVersion, ErrorCode::CheckpointError,
          "unsupported checkpoint version " + std::to_string(version));
  ModelConfig cfg;
  const auto n_channels = detail::get_u32(is);
  require(n_channels >= 2 && n_channels <= 64, ErrorCode::CheckpointError, "implausible channel count");
  cfg.channels.clear();
  for (std::uint32_t i = 0; i < n_channels; ++i) cfg.channels.push_back(detail::get_u32(is));
  cfg.temporal_kernel = detail::get_u32(is);
  cfg.embedding_dim = detail::get_u32(is);
  cfg.frames = detail::get_u32(is);
  cfg.joints = detail::get_u32(is);
  cfg.partitions = detail::get_u32(is);
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorCode::CheckpointError, e.what());
  }
  auto params = ModelParams<float>::zeros(cfg);
  std::uint32_t expected = 0;
  for_each_tensor(params, [&](const std::string&, const Mat<float>&) { ++expected; });
  const auto count = detail::get_u32(is);
  require(count == expected, ErrorCode::CheckpointError, "tensor count does not match config");
  for_each_tensor(params, [&](const std::string& name, Mat<float>& m) {
    const auto len = detail::get_u32(is);
    require(len < 1024, ErrorCode::CheckpointError, "implausible tensor name length");
    std::string got(len, '\0');
    is.read(got.data(), len);
    require(static_cast<bool>(is) && got == name, ErrorCode::CheckpointError,
            "expected tensor '" + name + "', found '" + got + "'");
    const auto rows = detail::get_u32(is);
    const auto cols = detail::get_u32(is);
    require(rows == m.rows() && cols == m.cols(), ErrorCode::CheckpointError, "shape mismatch for " + name);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<float>(detail::get_u32(is));
  });
  return params;
}

inline void save_checkpoint(const std::string& path, const ModelParams<float>& params) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot open " + path + " for writing");
  write_checkpoint(os, params);
}

inline ModelParams<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path);
  return read_checkpoint(is);
}

}  // namespace gaitkit
