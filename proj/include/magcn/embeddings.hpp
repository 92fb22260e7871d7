#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "magcn/params.hpp"
#include "magcn/tensor.hpp"

namespace magcn {

enum class Polarity { kNone = 0, kPositive = 1, kNegative = 2 };

/// Opinion lexicon: disjoint positive and negative word sets, matched
/// case-insensitively.
class Lexicon {
 public:
  Lexicon() = default;

  /// Words appearing in both lists are dropped from both and counted.
  static Lexicon from_words(std::span<const std::string> positive, std::span<const std::string> negative);

  /// One word per line; blank lines and lines starting with ';' are skipped.
  static Lexicon load(const std::filesystem::path& positive_path, const std::filesystem::path& negative_path);

  Polarity polarity(const std::string& word) const;
  bool contains(const std::string& word) const { return polarity(word) != Polarity::kNone; }

  const std::set<std::string>& positive_words() const { return positive_; }
  const std::set<std::string>& negative_words() const { return negative_; }
  std::size_t conflicts() const { return conflicts_; }
  bool empty() const { return positive_.empty() && negative_.empty(); }

 private:
  std::set<std::string> positive_;
  std::set<std::string> negative_;
  std::size_t conflicts_ = 0;
};

std::string to_lower(std::string s);

/// flag_i = 1 iff token_i is a lexicon word.
std::vector<std::size_t> sentiment_flags(std::span<const std::string> tokens, const Lexicon& lexicon);
/// 0 = not in lexicon, 1 = positive, 2 = negative. Used by the polarity-aware table.
std::vector<std::size_t> polarity_flags(std::span<const std::string> tokens, const Lexicon& lexicon);

/// Trainable lookup table indexed by sentiment flag. Row 0 is the
/// non-sentiment row; the binary variant has 2 rows, the polarity-aware one 3.
struct SentimentEmbedding {
  Tensor table;

  std::size_t width() const { return table.cols(); }
  std::size_t rows() const { return table.rows(); }

  /// Rows initialised uniform(-0.1, 0.1), each from its own seed.
  static SentimentEmbedding create(ParamStore& store, const std::string& name, std::size_t width, Rng& rng,
                                   bool polarity_aware = false);
};

struct TokenIds {
  std::vector<std::size_t> ids;
  Tensor table;  // V x d_e
};

/// Word representation E: either pre-extracted vectors or ids into a trainable table.
struct TokenInput {
  std::variant<Tensor, TokenIds> source;

  std::size_t length() const;
  Tensor word_vectors() const;
};

struct LanguageInput {
  Tensor x_l;        // n x (d_e + d_s)
  Tensor sentiment;  // n x d_s, rows table[flag_i]
};

/// x_i = [e_i; s_i]. A null or zero-width embedding leaves E unchanged.
LanguageInput build_language_input(const TokenInput& tokens, std::span<const std::size_t> flags,
                                   const SentimentEmbedding* embedding);

}  // namespace magcn
