#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flaglp/filters.hpp"
#include "flaglp/grid.hpp"

namespace flaglp {

inline constexpr const char* kCorpusGenerator = "mt19937_64";

enum class CorpusKind { BandLimited, Indicator, Atom, Bump };

std::string kind_tag(CorpusKind kind);

struct CorpusItem {
  CorpusKind kind = CorpusKind::BandLimited;
  std::uint64_t seed = 0;
  SampledFunction f;
};

/// Element i uses kinds[i % kinds.size()] and its own seed derived from
/// (seed, i), so prefixes of a corpus are stable when count grows.
struct CorpusOptions {
  std::size_t count = 20;
  std::uint64_t seed = 1;
  std::vector<CorpusKind> kinds{CorpusKind::BandLimited, CorpusKind::Indicator, CorpusKind::Atom,
                                CorpusKind::Bump};
  /// Bank whose low-pass channel band-limited fields avoid, and whose
  /// rectangles carry the atoms.
  FilterProfile profile{};
  int N = 2;
};

std::vector<CorpusItem> generate_corpus(const Grid& grid, const CorpusOptions& options);

/// Real Gaussian field supported on frequencies where the bank's low-pass
/// response vanishes and the second-factor frequency is nonzero. Unit L2 norm.
SampledFunction band_limited_field(const FilterBank& bank, std::uint64_t seed);

/// Writes item_NNNN.bin per element plus manifest.json.
void write_corpus(const std::filesystem::path& dir, const Grid& grid, const CorpusOptions& options,
                  const std::vector<CorpusItem>& items);

}  // namespace flaglp
