#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace magcn {

enum class Modality : unsigned { kLanguage = 1, kVision = 2, kAcoustic = 4 };

char modality_letter(Modality m);

/// Subset of {L, V, A}, written like "L+V+A".
class ModalitySet {
 public:
  constexpr ModalitySet() = default;
  static ModalitySet all();
  /// Accepts letters in any order separated by '+', e.g. "A+V".
  static ModalitySet parse(const std::string& text);

  bool has(Modality m) const { return (bits_ & static_cast<unsigned>(m)) != 0; }
  ModalitySet with(Modality m) const;
  bool empty() const { return bits_ == 0; }
  std::size_t size() const;
  /// Canonical L+V+A ordering.
  std::string str() const;

  bool operator==(const ModalitySet&) const = default;

 private:
  unsigned bits_ = 0;
};

/// The seven subsets of the modality-contribution study, in V, A, L, A+V,
/// L+V, L+A, L+V+A order.
std::vector<ModalitySet> modality_grid();

}  // namespace magcn
