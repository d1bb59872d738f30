#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "flaglp/grid.hpp"

namespace flaglp {

inline constexpr char kBlockMagic[4] = {'F', 'L', 'G', 'F'};
inline constexpr std::uint16_t kBlockVersion = 1;
inline constexpr std::size_t kBlockHeaderBytes = 32;

/// 32-byte little-endian header: magic "FLGF", version u16, n u8, m u8, L u8,
/// zero padding up to byte 24, payload length in bytes as u64.
struct BlockHeader {
  std::uint16_t version = kBlockVersion;
  std::uint8_t n = 0;
  std::uint8_t m = 0;
  std::uint8_t L = 0;
  std::uint64_t payloadBytes = 0;
};

struct Block {
  BlockHeader header;
  std::vector<cplx> values;
};

/// Payload is (re, im) float64 pairs in row-major lattice order.
void write_block(std::ostream& out, const BlockHeader& header, std::span<const cplx> values);
Block read_block(std::istream& in);

void save_function(const std::filesystem::path& path, const SampledFunction& f);
SampledFunction load_function(const std::filesystem::path& path);

/// One line per sample: lattice coordinates then re, im. Refuses grids with
/// more than 2^16 samples.
void write_csv(std::ostream& out, const SampledFunction& f);

}  // namespace flaglp
