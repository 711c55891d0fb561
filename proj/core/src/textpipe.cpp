#include "qaexpert/textpipe.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "qaexpert/assets.hpp"
#include "qaexpert/error.hpp"
#include "qaexpert/io_util.hpp"

namespace qaexpert::textpipe {

namespace {

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_ascii_alnum(char c) { return is_ascii_alpha(c) || (c >= '0' && c <= '9'); }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

bool all_lower_alpha(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::unordered_set<std::string> term_set(const assets::Lexicon& lexicon) {
  std::unordered_set<std::string> out;
  for (const auto& entry : lexicon.entries) out.insert(std::string(io::trim(entry)));
  return out;
}

}  // namespace

Lexicons::Lexicons() {
  stopwords_ = term_set(assets::load_lexicon("stopwords.txt"));
  familiar_ = term_set(assets::load_lexicon("familiar_words.txt"));
  abbreviations_ = term_set(assets::load_lexicon("abbreviations.txt"));
  for (const auto& entry : assets::load_lexicon("sentiment.txt").entries) {
    auto cols = io::split(entry, '\t');
    require(cols.size() == 3, ErrorCode::kInvalidArgument, "bad sentiment entry: " + entry);
    sentiment_[cols[0]] = SentimentEntry{io::parse_double(cols[1]), io::parse_double(cols[2])};
  }
  for (const auto& entry : assets::load_lexicon("lemma_exceptions.txt").entries) {
    auto cols = io::split(entry, '\t');
    require(cols.size() == 2, ErrorCode::kInvalidArgument, "bad lemma exception: " + entry);
    lemma_exceptions_[cols[0]] = cols[1];
  }
  for (const auto& term : term_set(assets::load_lexicon("datascience_terms.txt"))) {
    data_science_.insert(lemmatize(term, *this));
  }
  for (const char* category : {"programming", "technology"}) {
    std::unordered_set<std::string> terms;
    for (const auto& term : term_set(assets::load_lexicon(std::string("category_") + category + ".txt"))) {
      terms.insert(lemmatize(term, *this));
    }
    categories_.emplace_back(category, std::move(terms));
  }
}

const Lexicons& Lexicons::bundled() {
  static const Lexicons instance;
  return instance;
}

bool Lexicons::is_stopword(std::string_view word) const { return stopwords_.count(std::string(word)) > 0; }
bool Lexicons::is_familiar(std::string_view word) const { return familiar_.count(std::string(word)) > 0; }
bool Lexicons::is_abbreviation(std::string_view token) const {
  return abbreviations_.count(std::string(token)) > 0;
}

std::optional<SentimentEntry> Lexicons::sentiment(std::string_view word) const {
  auto it = sentiment_.find(std::string(word));
  if (it == sentiment_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string_view> Lexicons::lemma_exception(std::string_view word) const {
  auto it = lemma_exceptions_.find(std::string(word));
  if (it == lemma_exceptions_.end()) return std::nullopt;
  return std::string_view(it->second);
}

namespace {

bool is_consonant_at(std::string_view w, std::size_t i) {
  const char c = w[i];
  if (is_vowel(c)) return false;
  if (c == 'y') return i == 0 || !is_consonant_at(w, i - 1);
  return true;
}

// Number of vowel-consonant sequences, as in Porter's "measure".
int measure_of(std::string_view w) {
  int m = 0;
  bool prev_vowel = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool vowel = !is_consonant_at(w, i);
    if (prev_vowel && !vowel) ++m;
    prev_vowel = vowel;
  }
  return m;
}

bool has_vowel(std::string_view w) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!is_consonant_at(w, i)) return true;
  }
  return false;
}

bool ends_cvc(std::string_view w) {
  const std::size_t n = w.size();
  if (n < 3) return false;
  const char last = w[n - 1];
  return is_consonant_at(w, n - 3) && !is_consonant_at(w, n - 2) && is_consonant_at(w, n - 1) &&
         last != 'w' && last != 'x' && last != 'y';
}

// Restores the base of a verb after "-ing"/"-ed" has been removed.
std::string repair_verb_stem(std::string stem) {
  const std::size_t n = stem.size();
  if (stem.ends_with("at") || stem.ends_with("bl") || stem.ends_with("iz")) return stem + "e";
  if (n >= 2 && stem[n - 1] == stem[n - 2] && is_consonant_at(stem, n - 1) &&
      stem[n - 1] != 'l' && stem[n - 1] != 's' && stem[n - 1] != 'z') {
    stem.pop_back();
    return stem;
  }
  if (measure_of(stem) == 1 && ends_cvc(stem)) return stem + "e";
  return stem;
}

std::string lemmatize_once(const std::string& w, const Lexicons& lexicons) {
  if (auto exception = lexicons.lemma_exception(w)) return std::string(*exception);
  const std::size_t n = w.size();
  if (n <= 3) return w;
  if (w.ends_with("ies") && n > 4) return w.substr(0, n - 3) + "y";
  if (w.ends_with("sses")) return w.substr(0, n - 2);
  if (w.ends_with("ches") || w.ends_with("shes") || w.ends_with("xes") || w.ends_with("zes")) {
    return w.substr(0, n - 2);
  }
  if (w.ends_with("s") && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is")) {
    return w.substr(0, n - 1);
  }
  if (w.ends_with("ing")) {
    const std::string stem = w.substr(0, n - 3);
    if (stem.size() >= 3 && has_vowel(stem)) return repair_verb_stem(stem);
    return w;
  }
  if (w.ends_with("ied") && n > 4) return w.substr(0, n - 3) + "y";
  if (w.ends_with("eed")) return w;
  if (w.ends_with("ed")) {
    const std::string stem = w.substr(0, n - 2);
    if (stem.size() >= 3 && has_vowel(stem)) {
      if (stem.back() == 'e') return w.substr(0, n - 1);
      return repair_verb_stem(stem);
    }
  }
  return w;
}

}  // namespace

std::string lemmatize(std::string_view word, const Lexicons& lexicons) {
  std::string current = to_lower_ascii(word);
  if (!all_lower_alpha(current)) return current;
  for (int i = 0; i < 16; ++i) {
    std::string next = lemmatize_once(current, lexicons);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

namespace {

// Blanks out fenced code blocks and inline backtick spans.
std::string strip_code(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 3, "```") == 0) {
      std::size_t close = text.find("```", i + 3);
      i = close == std::string_view::npos ? text.size() : close + 3;
      out.push_back(' ');
      continue;
    }
    if (text[i] == '`') {
      std::size_t close = text.find('`', i + 1);
      if (close != std::string_view::npos) {
        i = close + 1;
        out.push_back(' ');
        continue;
      }
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

bool looks_like_link(std::string_view chunk) {
  return chunk.find("://") != std::string_view::npos || chunk.starts_with("www.") ||
         chunk.find("(www.") != std::string_view::npos;
}

std::string strip_links(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      out.push_back(text[i]);
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && !is_space(text[end])) ++end;
    std::string_view chunk = text.substr(i, end - i);
    if (!looks_like_link(chunk)) out.append(chunk);
    i = end;
  }
  return out;
}

// Maximal runs of word characters. Bytes >= 0x80 are kept inside tokens so
// emojis and other non-ASCII symbols surface as tokens that the
// alphabetic filter removes.
std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (is_ascii_alnum(ch) || ch == '_' || ch == '\'' || u >= 0x80) {
      current.push_back(ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  for (auto& t : tokens) {
    while (!t.empty() && t.front() == '\'') t.erase(t.begin());
    while (!t.empty() && t.back() == '\'') t.pop_back();
  }
  std::erase_if(tokens, [](const std::string& t) { return t.empty(); });
  return tokens;
}

}  // namespace

TokenList preprocess(std::string_view text, const Lexicons& lexicons) {
  TokenList out;
  const std::string lowered = to_lower_ascii(text);
  const std::string cleaned = strip_links(strip_code(lowered));
  const auto raw = tokenize(cleaned);
  out.raw_word_count = raw.size();
  for (const auto& token : raw) {
    if (lexicons.is_stopword(token)) continue;
    if (!all_lower_alpha(token)) continue;
    std::string lemma = lemmatize(token, lexicons);
    if (lemma.empty() || lexicons.is_stopword(lemma)) continue;
    out.tokens.push_back(std::move(lemma));
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text, const Lexicons& lexicons) {
  std::vector<std::string> sentences;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    std::string_view piece = io::trim(text.substr(start, end - start));
    if (!piece.empty()) sentences.emplace_back(piece);
    start = end;
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && (text[end] == '.' || text[end] == '!' || text[end] == '?')) ++end;
    while (end < text.size() && (text[end] == '"' || text[end] == '\'' || text[end] == ')')) ++end;
    const bool boundary = end == text.size() || is_space(text[end]);
    if (boundary && c == '.' && end == i + 1) {
      std::size_t word_start = i;
      while (word_start > 0 && !is_space(text[word_start - 1])) --word_start;
      std::string token = to_lower_ascii(text.substr(word_start, i + 1 - word_start));
      while (!token.empty() && (token.front() == '(' || token.front() == '"')) token.erase(token.begin());
      if (lexicons.is_abbreviation(token)) {
        i = end;
        continue;
      }
    }
    if (boundary) flush(end);
    i = end;
  }
  flush(text.size());
  return sentences;
}

int count_syllables(std::string_view word) {
  require(!word.empty() && std::all_of(word.begin(), word.end(), is_ascii_alpha),
          ErrorCode::kInvalidArgument, "count_syllables expects a non-empty alphabetic word");
  const std::string w = to_lower_ascii(word);
  const std::size_t n = w.size();
  int groups = 0;
  bool prev_vowel = false;
  for (std::size_t i = 0; i < n; ++i) {
    const bool vowel = is_vowel(w[i]) || (w[i] == 'y' && i > 0);
    if (vowel && !prev_vowel) ++groups;
    prev_vowel = vowel;
  }
  auto consonant = [&](std::size_t i) { return !is_vowel(w[i]) && w[i] != 'y'; };
  if (n > 2 && w.back() == 'e') {
    const bool consonant_le = w[n - 2] == 'l' && consonant(n - 3);
    if (!consonant_le && consonant(n - 2)) --groups;
  } else if (n > 3 && w.ends_with("ed")) {
    const char before = w[n - 3];
    if (consonant(n - 3) && before != 't' && before != 'd') --groups;
  } else if (n > 3 && w.ends_with("es")) {
    const char before = w[n - 3];
    if (consonant(n - 3) && std::string_view("sxzcgh").find(before) == std::string_view::npos) --groups;
  }
  return std::max(1, groups);
}

double shannon_entropy_bits(std::string_view text) {
  std::unordered_map<std::uint32_t, std::size_t> counts;
  std::size_t total = 0;
  for (std::size_t i = 0; i < text.size();) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    len = std::min(len, text.size() - i);
    std::uint32_t cp = 0;
    for (std::size_t k = 0; k < len; ++k) cp = (cp << 8) | static_cast<unsigned char>(text[i + k]);
    ++counts[cp];
    ++total;
    i += len;
  }
  if (total == 0) return 0.0;
  double h = 0.0;
  for (const auto& [cp, count] : counts) {
    const double p = static_cast<double>(count) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h <= 0.0 ? 0.0 : h;
}

ReadabilityScores readability(const ReadabilityCounts& c) {
  ReadabilityScores r;
  if (c.words <= 0 || c.sentences <= 0) return r;
  const double wps = c.words / c.sentences;
  const double spw = c.syllables / c.words;
  r.flesch_reading_ease = 206.835 - 1.015 * wps - 84.6 * spw;
  r.flesch_kincaid_grade = 0.39 * wps + 11.8 * spw - 15.59;
  r.gunning_fog = 0.4 * (wps + 100.0 * c.polysyllables / c.words);
  r.smog = 1.0430 * std::sqrt(c.polysyllables * 30.0 / c.sentences) + 3.1291;
  r.smog_low_confidence = c.sentences < 3;
  r.automated_readability_index = 4.71 * c.chars / c.words + 0.5 * wps - 21.43;
  const double letters_per_100 = c.letters / c.words * 100.0;
  const double sentences_per_100 = c.sentences / c.words * 100.0;
  r.coleman_liau = 0.0588 * letters_per_100 - 0.296 * sentences_per_100 - 15.8;
  const double pct_difficult = 100.0 * c.difficult / c.words;
  r.dale_chall = 0.1579 * pct_difficult + 0.0496 * wps + (pct_difficult > 5.0 ? 3.6365 : 0.0);
  r.spache = 0.121 * wps + 0.082 * (100.0 * c.unfamiliar / c.words) + 0.659;
  return r;
}

std::size_t count_words(std::string_view text) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t end = i;
    bool alnum = false;
    for (; end < text.size() && !is_space(text[end]); ++end) {
      if (is_ascii_alnum(text[end])) alnum = true;
    }
    if (alnum) ++count;
    i = end;
  }
  return count;
}

TextMetrics measure(std::string_view text, const Lexicons& lexicons) {
  TextMetrics m;
  m.entropy_bits = shannon_entropy_bits(text);

  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto u = static_cast<unsigned char>(text[i]);
    if ((u & 0xC0) == 0x80) continue;  // UTF-8 continuation byte
    if (!is_space(text[i])) ++m.char_count;
    if (is_ascii_alpha(text[i])) ++m.letter_count;
  }

  std::vector<std::string> words;  // lowercase letters of each word, may be empty for numbers
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t end = i;
    while (end < text.size() && !is_space(text[end])) ++end;
    std::string_view chunk = text.substr(i, end - i);
    i = end;
    if (std::none_of(chunk.begin(), chunk.end(), is_ascii_alnum)) continue;
    std::string letters;
    for (char ch : chunk) {
      if (is_ascii_alpha(ch)) letters.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    words.push_back(std::move(letters));
  }
  m.word_count = words.size();
  m.sentence_count = split_sentences(text, lexicons).size();

  double polarity_sum = 0.0, subjectivity_sum = 0.0;
  std::size_t sentiment_hits = 0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const std::string& word = words[w];
    if (word.empty()) continue;
    const int syllables = count_syllables(word);
    m.syllable_count += static_cast<std::size_t>(syllables);
    if (syllables >= 3) ++m.polysyllable_count;
    const bool familiar = lexicons.is_familiar(word) || lexicons.is_familiar(lemmatize(word, lexicons));
    if (!familiar) {
      ++m.unfamiliar_word_count;
      if (syllables >= 2) ++m.difficult_word_count;
    }
    if (auto entry = lexicons.sentiment(word)) {
      double polarity = entry->polarity;
      if (w > 0) {
        const std::string& prev = words[w - 1];
        if (prev == "not" || prev == "never" || prev == "no" || prev == "dont" || prev == "isnt") {
          polarity *= -0.5;
        }
      }
      polarity_sum += polarity;
      subjectivity_sum += entry->subjectivity;
      ++sentiment_hits;
    }
  }
  if (sentiment_hits > 0) {
    const auto n = static_cast<double>(sentiment_hits);
    m.polarity = std::clamp(polarity_sum / n, -1.0, 1.0);
    m.subjectivity = std::clamp(subjectivity_sum / n, 0.0, 1.0);
  }

  if (m.word_count > 0) {
    m.avg_word_length = static_cast<double>(m.letter_count) / static_cast<double>(m.word_count);
  }
  if (m.sentence_count > 0) {
    m.avg_sentence_length = static_cast<double>(m.word_count) / static_cast<double>(m.sentence_count);
  }
  m.reading_time_s = static_cast<double>(m.char_count) * kReadingMillisPerChar / 1000.0;

  const TokenList tokens = preprocess(text, lexicons);
  const auto n_tokens = static_cast<double>(tokens.tokens.size());
  auto score = [&](const std::unordered_set<std::string>& terms) {
    if (tokens.tokens.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& t : tokens.tokens) hits += terms.count(t);
    return static_cast<double>(hits) / n_tokens;
  };
  m.data_science_score = score(lexicons.data_science_terms());
  for (const auto& [name, terms] : lexicons.categories()) m.category_scores[name] = score(terms);

  ReadabilityCounts counts;
  counts.words = static_cast<double>(m.word_count);
  counts.sentences = static_cast<double>(m.sentence_count);
  counts.syllables = static_cast<double>(m.syllable_count);
  counts.polysyllables = static_cast<double>(m.polysyllable_count);
  counts.chars = static_cast<double>(m.char_count);
  counts.letters = static_cast<double>(m.letter_count);
  counts.difficult = static_cast<double>(m.difficult_word_count);
  counts.unfamiliar = static_cast<double>(m.unfamiliar_word_count);
  m.readability = readability(counts);
  return m;
}

}  // namespace qaexpert::textpipe
