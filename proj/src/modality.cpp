#include "magcn/modality.hpp"

#include "magcn/errors.hpp"

namespace magcn {

// ---- modality sets ----------------------------------------------------------

char modality_letter(Modality m) {
  switch (m) {
    case Modality::kLanguage:
      return 'L';
    case Modality::kVision:
      return 'V';
    case Modality::kAcoustic:
      return 'A';
  }
  return '?';
}

ModalitySet ModalitySet::all() {
  return ModalitySet().with(Modality::kLanguage).with(Modality::kVision).with(Modality::kAcoustic);
}

ModalitySet ModalitySet::parse(const std::string& text) {
  ModalitySet set;
  for (char c : text) {
    switch (c) {
      case 'L':
      case 'l':
        set = set.with(Modality::kLanguage);
        break;
      case 'V':
      case 'v':
        set = set.with(Modality::kVision);
        break;
      case 'A':
      case 'a':
        set = set.with(Modality::kAcoustic);
        break;
      case '+':
      case ',':
      case ' ':
        break;
      default:
        throw ConfigError("unknown modality '" + std::string(1, c) + "' in \"" + text + "\"");
    }
  }
  if (set.empty()) throw ConfigError("empty modality set \"" + text + "\"");
  return set;
}

ModalitySet ModalitySet::with(Modality m) const {
  ModalitySet s = *this;
  s.bits_ |= static_cast<unsigned>(m);
  return s;
}

std::size_t ModalitySet::size() const {
  return static_cast<std::size_t>(has(Modality::kLanguage)) + has(Modality::kVision) + has(Modality::kAcoustic);
}

std::string ModalitySet::str() const {
  // The language-free pair is conventionally written acoustic first.
  if (!has(Modality::kLanguage) && has(Modality::kVision) && has(Modality::kAcoustic)) return "A+V";
  std::string out;
  for (Modality m : {Modality::kLanguage, Modality::kVision, Modality::kAcoustic}) {
    if (!has(m)) continue;
    if (!out.empty()) out += '+';
    out += modality_letter(m);
  }
  return out;
}

std::vector<ModalitySet> modality_grid() {
  return {ModalitySet::parse("V"),   ModalitySet::parse("A"),   ModalitySet::parse("L"),
          ModalitySet::parse("A+V"), ModalitySet::parse("L+V"), ModalitySet::parse("L+A"),
          ModalitySet::parse("L+V+A")};
}

}  // namespace magcn
