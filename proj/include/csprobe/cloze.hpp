#pragma once

// Sentence tokenization, cloze-item construction, and two-choice pair encoding.

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

namespace csprobe {

/// Internal mask sentinel. Providers translate it to their model's own token.
inline constexpr std::string_view kMaskToken = "<mask>";

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::string raw;
};

struct ClozeItem {
  std::string sentence_id;
  std::size_t mask_index = 0;
  std::string original;
  std::vector<std::string> masked_tokens;
};

enum class Choice { A, B };

std::string_view to_string(Choice c) noexcept;
Choice other(Choice c) noexcept;

struct ChoicePair {
  std::string id;
  std::vector<std::string> shared_masked_tokens;
  std::size_t diff_index = 0;
  std::string choice_a;
  std::string choice_b;
  Choice gold = Choice::A;

  const std::string& choice(Choice c) const { return c == Choice::A ? choice_a : choice_b; }
};

enum class NotEncodableReason { LengthMismatch, MultiTokenDiff, ZeroDiff };

std::string_view to_string(NotEncodableReason r) noexcept;

struct NotEncodable {
  NotEncodableReason reason;
};

using EncodeResult = std::variant<ChoicePair, NotEncodable>;

/// Case-insensitive token set.
class StopwordSet {
 public:
  StopwordSet() = default;
  explicit StopwordSet(const std::vector<std::string>& words);

  /// One token per line; blank lines and lines starting with '#' are ignored.
  static StopwordSet load(std::istream& in);
  /// The bundled English function-word list.
  static const StopwordSet& bundled();

  bool contains(std::string_view token) const;
  std::size_t size() const noexcept { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

/// True when every code point of `token` is Unicode punctuation.
bool is_punctuation(std::string_view token);

/// Whitespace-and-punctuation tokenization. Punctuation becomes separate
/// tokens; apostrophes and hyphens joining word characters stay inside the
/// word, so contractions remain one token. `<mask>` is kept whole.
Sentence tokenize(std::string_view raw, std::string id = {});

/// Join tokens back into text: no space before closing punctuation or
/// clitics, none after opening brackets/quotes.
std::string detokenize(const std::vector<std::string>& tokens);

std::vector<ClozeItem> build_cloze_tests(const Sentence& sentence, const StopwordSet& stopwords);

/// The pair id is taken from `a.id`.
EncodeResult encode_pair(const Sentence& a, const Sentence& b, Choice gold);

// Dataset records --------------------------------------------------------

struct SentenceRecord {
  std::string id;
  std::string text;
};

struct PairRecord {
  std::string id;
  std::string sentence_a;
  std::string sentence_b;
  Choice gold = Choice::A;
};

/// `id<TAB>sentence` per line; blank lines skipped.
std::vector<SentenceRecord> read_sentence_dataset(std::istream& in);
/// `id<TAB>sentence_a<TAB>sentence_b<TAB>gold` with gold in {a, b}.
std::vector<PairRecord> read_pair_dataset(std::istream& in);

}  // namespace csprobe
