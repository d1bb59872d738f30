#include "flaglp/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "flaglp/error.hpp"

namespace flaglp {

static_assert(std::endian::native == std::endian::little,
              "block format is little-endian; big-endian hosts are not supported");

void write_block(std::ostream& out, const BlockHeader& header, std::span<const cplx> values) {
  unsigned char raw[kBlockHeaderBytes] = {};
  std::memcpy(raw, kBlockMagic, 4);
  std::memcpy(raw + 4, &header.version, 2);
  raw[6] = header.n;
  raw[7] = header.m;
  raw[8] = header.L;
  const std::uint64_t payload = values.size() * 2 * sizeof(double);
  std::memcpy(raw + 24, &payload, 8);
  out.write(reinterpret_cast<const char*>(raw), kBlockHeaderBytes);
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(payload));
  if (!out) throw IoError("failed to write block");
}

Block read_block(std::istream& in) {
  unsigned char raw[kBlockHeaderBytes];
  in.read(reinterpret_cast<char*>(raw), kBlockHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kBlockHeaderBytes)) {
    throw IoError("truncated block header");
  }
  if (std::memcmp(raw, kBlockMagic, 4) != 0) throw IoError("bad block magic");
  Block b;
  std::memcpy(&b.header.version, raw + 4, 2);
  if (b.header.version != kBlockVersion) throw IoError("unsupported block version");
  b.header.n = raw[6];
  b.header.m = raw[7];
  b.header.L = raw[8];
  std::memcpy(&b.header.payloadBytes, raw + 24, 8);
  if (b.header.payloadBytes % (2 * sizeof(double)) != 0) throw IoError("payload is not (re, im) pairs");
  b.values.resize(b.header.payloadBytes / (2 * sizeof(double)));
  in.read(reinterpret_cast<char*>(b.values.data()), static_cast<std::streamsize>(b.header.payloadBytes));
  if (in.gcount() != static_cast<std::streamsize>(b.header.payloadBytes)) {
    throw IoError("truncated block payload");
  }
  return b;
}

void save_function(const std::filesystem::path& path, const SampledFunction& f) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  BlockHeader h;
  h.n = static_cast<std::uint8_t>(f.grid().n());
  h.m = static_cast<std::uint8_t>(f.grid().m());
  h.L = static_cast<std::uint8_t>(f.grid().L());
  write_block(out, h, f.values());
}

SampledFunction load_function(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Block b = read_block(in);
  Grid grid;
  try {
    grid = make_grid(b.header.n, b.header.m, b.header.L);
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (b.values.size() != grid.size()) throw IoError(path.string() + ": payload does not match grid");
  return SampledFunction(grid, std::move(b.values));
}

void write_csv(std::ostream& out, const SampledFunction& f) {
  const Grid& g = f.grid();
  if (g.size() > (std::size_t{1} << 16)) throw ConfigError("CSV export is limited to 2^16 samples");
  for (int a = 0; a < g.dims(); ++a) out << 'i' << a << ',';
  out << "re,im\n";
  out.precision(17);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Coords c = g.coords(i);
    for (int a = 0; a < g.dims(); ++a) out << c[a] << ',';
    out << f[i].real() << ',' << f[i].imag() << '\n';
  }
}

}  // namespace flaglp
