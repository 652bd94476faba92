#include "csprobe/cloze.hpp"

#include <sstream>

#include "csprobe/embedding.hpp"
#include "csprobe/error.hpp"

namespace csprobe {

namespace {

constexpr char kDefaultStopwords[] =
#include "default_stopwords.inc"
    ;

struct CodePoint {
  char32_t value;
  std::size_t offset;
  std::size_t length;
};

std::vector<CodePoint> decode_utf8(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = b0;
    if (b0 >= 0xF0 && b0 < 0xF8) {
      len = 4;
      cp = b0 & 0x07;
    } else if (b0 >= 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if (b0 >= 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if (b0 >= 0x80) {
      len = 0;  // stray continuation byte
    }
    bool valid = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; valid && k < len; ++k) {
      const auto bk = static_cast<unsigned char>(s[i + k]);
      if ((bk & 0xC0) != 0x80) valid = false;
      cp = (cp << 6) | (bk & 0x3F);
    }
    if (!valid) {
      out.push_back({0xFFFD, i, 1});
      ++i;
      continue;
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

bool is_space_cp(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f' ||
         c == 0x00A0 || (c >= 0x2000 && c <= 0x200A) || c == 0x202F || c == 0x205F ||
         c == 0x3000;
}

bool in(char32_t c, char32_t lo, char32_t hi) { return c >= lo && c <= hi; }

// Unicode general category P* (connector, dash, open, close, initial, final, other).
bool is_punct_cp(char32_t c) {
  if (c < 0x80) {
    switch (c) {
      case '!': case '"': case '#': case '%': case '&': case '\'': case '(': case ')':
      case '*': case ',': case '-': case '.': case '/': case ':': case ';': case '?':
      case '@': case '[': case '\\': case ']': case '_': case '{': case '}':
        return true;
      default:
        return false;
    }
  }
  return c == 0x00A1 || c == 0x00A7 || c == 0x00AB || c == 0x00B6 || c == 0x00B7 ||
         c == 0x00BB || c == 0x00BF || in(c, 0x2010, 0x2027) || in(c, 0x2030, 0x2043) ||
         in(c, 0x2045, 0x2051) || in(c, 0x2053, 0x205E) || in(c, 0x3001, 0x3003) ||
         in(c, 0x3008, 0x3011) || in(c, 0x3014, 0x301F) || in(c, 0xFF01, 0xFF03) ||
         in(c, 0xFF05, 0xFF0A) || in(c, 0xFF0C, 0xFF0F) || c == 0xFF1A || c == 0xFF1B ||
         c == 0xFF1F || c == 0xFF20 || in(c, 0xFF3B, 0xFF3D) || c == 0xFF3F ||
         c == 0xFF5B || c == 0xFF5D || in(c, 0xFF5F, 0xFF65);
}

bool is_word_cp(char32_t c) { return !is_space_cp(c) && !is_punct_cp(c); }
bool is_digit_cp(char32_t c) { return c >= '0' && c <= '9'; }

// Punctuation that stays inside a word when flanked by word characters.
bool is_word_joiner(char32_t c) {
  return c == '\'' || c == 0x2019 || c == '-' || c == 0x2010;
}

bool is_number_joiner(char32_t c) { return c == '.' || c == ','; }

bool attaches_left(std::string_view tok) {
  static const std::unordered_set<std::string_view> closing = {
      ".", ",", "!", "?", ";", ":", ")", "]", "}", "\xE2\x80\x9D", "\xE2\x80\x99",
      "\xE2\x80\xA6", "%", "\xC2\xBB"};
  if (closing.contains(tok)) return true;
  return tok.size() > 1 && (tok.front() == '\'' || tok.starts_with("\xE2\x80\x99"));
}

bool attaches_right(std::string_view tok) {
  static const std::unordered_set<std::string_view> opening = {
      "(", "[", "{", "\xE2\x80\x9C", "\xE2\x80\x98", "\xC2\xAB", "\xC2\xBF", "\xC2\xA1"};
  return opening.contains(tok);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\v\f") == std::string_view::npos;
}

}  // namespace

std::string_view to_string(Choice c) noexcept { return c == Choice::A ? "a" : "b"; }

Choice other(Choice c) noexcept { return c == Choice::A ? Choice::B : Choice::A; }

std::string_view to_string(NotEncodableReason r) noexcept {
  switch (r) {
    case NotEncodableReason::LengthMismatch: return "length_mismatch";
    case NotEncodableReason::MultiTokenDiff: return "multi_token_diff";
    case NotEncodableReason::ZeroDiff: return "zero_diff";
  }
  return "unknown";
}

StopwordSet::StopwordSet(const std::vector<std::string>& words) {
  for (const auto& w : words) words_.insert(fold_case(w));
}

StopwordSet StopwordSet::load(std::istream& in) {
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    words.push_back(line.substr(first, last - first + 1));
  }
  return StopwordSet(words);
}

const StopwordSet& StopwordSet::bundled() {
  static const StopwordSet set = [] {
    std::istringstream in(kDefaultStopwords);
    return load(in);
  }();
  return set;
}

bool StopwordSet::contains(std::string_view token) const {
  return words_.contains(fold_case(token));
}

bool is_punctuation(std::string_view token) {
  if (token.empty()) return false;
  for (const auto& cp : decode_utf8(token)) {
    if (!is_punct_cp(cp.value)) return false;
  }
  return true;
}

Sentence tokenize(std::string_view raw, std::string id) {
  if (is_blank(raw)) throw Error(ErrorCode::EmptyInput, "cannot tokenize blank text");
  const auto cps = decode_utf8(raw);
  Sentence sentence{std::move(id), {}, std::string(raw)};
  std::string word;
  auto flush = [&] {
    if (!word.empty()) sentence.tokens.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const auto& cp = cps[i];
    const std::string_view bytes = raw.substr(cp.offset, cp.length);
    if (is_space_cp(cp.value)) {
      flush();
      continue;
    }
    if (!is_punct_cp(cp.value)) {
      word.append(bytes);
      continue;
    }
    const bool has_prev = !word.empty() && i > 0 && is_word_cp(cps[i - 1].value);
    const bool has_next = i + 1 < cps.size() && is_word_cp(cps[i + 1].value);
    if (has_prev && has_next) {
      if (is_word_joiner(cp.value) ||
          (is_number_joiner(cp.value) && is_digit_cp(cps[i - 1].value) &&
           is_digit_cp(cps[i + 1].value))) {
        word.append(bytes);
        continue;
      }
    }
    flush();
    sentence.tokens.emplace_back(bytes);
  }
  flush();
  return sentence;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  bool glue_next = true;
  for (const auto& tok : tokens) {
    if (!glue_next && !attaches_left(tok)) out.push_back(' ');
    out += tok;
    glue_next = attaches_right(tok);
  }
  return out;
}

std::vector<ClozeItem> build_cloze_tests(const Sentence& sentence, const StopwordSet& stopwords) {
  std::vector<ClozeItem> items;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    const std::string& tok = sentence.tokens[i];
    if (tok == kMaskToken || stopwords.contains(tok) || is_punctuation(tok)) continue;
    ClozeItem item{sentence.id, i, tok, sentence.tokens};
    item.masked_tokens[i] = std::string(kMaskToken);
    items.push_back(std::move(item));
  }
  return items;
}

EncodeResult encode_pair(const Sentence& a, const Sentence& b, Choice gold) {
  if (a.tokens.size() != b.tokens.size()) {
    return NotEncodable{NotEncodableReason::LengthMismatch};
  }
  std::size_t diffs = 0;
  std::size_t at = 0;
  for (std::size_t i = 0; i < a.tokens.size(); ++i) {
    if (a.tokens[i] != b.tokens[i]) {
      ++diffs;
      at = i;
    }
  }
  if (diffs == 0) return NotEncodable{NotEncodableReason::ZeroDiff};
  if (diffs > 1) return NotEncodable{NotEncodableReason::MultiTokenDiff};
  ChoicePair pair{a.id, a.tokens, at, a.tokens[at], b.tokens[at], gold};
  pair.shared_masked_tokens[at] = std::string(kMaskToken);
  return pair;
}

std::vector<SentenceRecord> read_sentence_dataset(std::istream& in) {
  std::vector<SentenceRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw ParseError(line_no, "expected 2 tab-separated fields, found " +
                                    std::to_string(fields.size()));
    }
    if (fields[0].empty() || is_blank(fields[1])) throw ParseError(line_no, "empty id or sentence");
    out.push_back({std::string(fields[0]), std::string(fields[1])});
  }
  return out;
}

std::vector<PairRecord> read_pair_dataset(std::istream& in) {
  std::vector<PairRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 4) {
      throw ParseError(line_no, "expected 4 tab-separated fields, found " +
                                    std::to_string(fields.size()));
    }
    if (fields[0].empty() || is_blank(fields[1]) || is_blank(fields[2])) {
      throw ParseError(line_no, "empty id or sentence");
    }
    const std::string gold = fold_case(fields[3]);
    if (gold != "a" && gold != "b") {
      throw ParseError(line_no, "gold label must be 'a' or 'b', found '" +
                                    std::string(fields[3]) + "'");
    }
    out.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2]),
                   gold == "a" ? Choice::A : Choice::B});
  }
  return out;
}

}  // namespace csprobe
