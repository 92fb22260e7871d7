#include "magcn/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "magcn/errors.hpp"

namespace magcn {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> read_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read lexicon file " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line.front() == ';') continue;
    words.push_back(line);
  }
  return words;
}

}  // namespace

Lexicon Lexicon::from_words(std::span<const std::string> positive, std::span<const std::string> negative) {
  Lexicon lex;
  for (const auto& w : positive) lex.positive_.insert(to_lower(w));
  for (const auto& w : negative) lex.negative_.insert(to_lower(w));
  std::vector<std::string> both;
  std::set_intersection(lex.positive_.begin(), lex.positive_.end(), lex.negative_.begin(), lex.negative_.end(),
                        std::back_inserter(both));
  for (const auto& w : both) {
    lex.positive_.erase(w);
    lex.negative_.erase(w);
  }
  lex.conflicts_ = both.size();
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& positive_path, const std::filesystem::path& negative_path) {
  const auto pos = read_word_list(positive_path);
  const auto neg = read_word_list(negative_path);
  return from_words(pos, neg);
}

Polarity Lexicon::polarity(const std::string& word) const {
  const std::string w = to_lower(word);
  if (positive_.count(w)) return Polarity::kPositive;
  if (negative_.count(w)) return Polarity::kNegative;
  return Polarity::kNone;
}

std::vector<std::size_t> sentiment_flags(std::span<const std::string> tokens, const Lexicon& lexicon) {
  std::vector<std::size_t> flags;
  flags.reserve(tokens.size());
  for (const auto& t : tokens) flags.push_back(lexicon.contains(t) ? 1 : 0);
  return flags;
}

std::vector<std::size_t> polarity_flags(std::span<const std::string> tokens, const Lexicon& lexicon) {
  std::vector<std::size_t> flags;
  flags.reserve(tokens.size());
  for (const auto& t : tokens) flags.push_back(static_cast<std::size_t>(lexicon.polarity(t)));
  return flags;
}

SentimentEmbedding SentimentEmbedding::create(ParamStore& store, const std::string& name, std::size_t width,
                                              Rng& rng, bool polarity_aware) {
  const std::size_t rows = polarity_aware ? 3 : 2;
  std::vector<double> values;
  values.reserve(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    Rng row_rng = rng.fork();
    for (std::size_t j = 0; j < width; ++j) values.push_back(row_rng.uniform(-0.1, 0.1));
  }
  return {store.add(name, Tensor::matrix(rows, width, std::move(values)))};
}

std::size_t TokenInput::length() const {
  if (const auto* vectors = std::get_if<Tensor>(&source)) return vectors->rows();
  return std::get<TokenIds>(source).ids.size();
}

Tensor TokenInput::word_vectors() const {
  if (const auto* vectors = std::get_if<Tensor>(&source)) return *vectors;
  const auto& t = std::get<TokenIds>(source);
  return gather_rows(t.table, t.ids);
}

LanguageInput build_language_input(const TokenInput& tokens, std::span<const std::size_t> flags,
                                   const SentimentEmbedding* embedding) {
  const std::size_t n = tokens.length();
  if (n == 0) throw ContractError("build_language_input: empty token sequence");
  if (flags.size() != n) {
    throw DimensionError("build_language_input: " + std::to_string(flags.size()) + " flags for " +
                         std::to_string(n) + " tokens");
  }
  Tensor e = tokens.word_vectors();
  if (embedding == nullptr || embedding->width() == 0) {
    return {e, Tensor::zeros({n, 0})};
  }
  Tensor s = gather_rows(embedding->table, flags);
  return {concat_cols({e, s}), s};
}

}  // namespace magcn
