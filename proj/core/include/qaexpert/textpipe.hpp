#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace qaexpert::textpipe {

struct TokenList {
  std::vector<std::string> tokens;  // lowercase alphabetic lemmas
  std::size_t raw_word_count = 0;   // tokens before any filtering
};

struct ReadabilityScores {
  double flesch_reading_ease = 0.0;
  double flesch_kincaid_grade = 0.0;
  double gunning_fog = 0.0;
  double smog = 0.0;
  double automated_readability_index = 0.0;
  double coleman_liau = 0.0;
  double dale_chall = 0.0;
  double spache = 0.0;
  bool smog_low_confidence = false;  // fewer than 3 sentences
};

struct TextMetrics {
  std::size_t word_count = 0;
  std::size_t syllable_count = 0;
  std::size_t polysyllable_count = 0;  // words with >= 3 syllables
  std::size_t char_count = 0;          // non-whitespace code points
  std::size_t letter_count = 0;
  std::size_t difficult_word_count = 0;
  std::size_t unfamiliar_word_count = 0;
  std::size_t sentence_count = 0;
  double avg_word_length = 0.0;      // letters per word
  double avg_sentence_length = 0.0;  // words per sentence
  double reading_time_s = 0.0;
  double entropy_bits = 0.0;         // per character
  double polarity = 0.0;             // [-1, 1]
  double subjectivity = 0.0;         // [0, 1]
  double data_science_score = 0.0;   // [0, 1]
  std::map<std::string, double> category_scores;
  ReadabilityScores readability;
};

// Raw counts the readability formulas consume.
struct ReadabilityCounts {
  double words = 0;
  double sentences = 0;
  double syllables = 0;
  double polysyllables = 0;
  double chars = 0;
  double letters = 0;
  double difficult = 0;
  double unfamiliar = 0;
};

// Published formulas:
//   FRE   = 206.835 - 1.015 W/S - 84.6 Sy/W
//   FKGL  = 0.39 W/S + 11.8 Sy/W - 15.59
//   Fog   = 0.4 (W/S + 100 poly/W)
//   SMOG  = 1.0430 sqrt(poly * 30 / S) + 3.1291
//   ARI   = 4.71 chars/W + 0.5 W/S - 21.43
//   CLI   = 0.0588 L - 0.296 Sm - 15.8   (letters and sentences per 100 words)
//   DC    = 0.1579 pct_difficult + 0.0496 W/S (+3.6365 when pct_difficult > 5)
//   Spache (revised) = 0.121 W/S + 0.082 pct_unfamiliar + 0.659
// All scores are 0 when there are no words or no sentences.
ReadabilityScores readability(const ReadabilityCounts& counts);

inline constexpr double kReadingMillisPerChar = 14.69;

struct SentimentEntry {
  double polarity = 0.0;
  double subjectivity = 0.0;
};

// Shipped word lists. Immutable once built; share freely across threads.
class Lexicons {
 public:
  static const Lexicons& bundled();

  bool is_stopword(std::string_view word) const;
  bool is_familiar(std::string_view word) const;
  bool is_abbreviation(std::string_view lowercase_token) const;
  std::optional<SentimentEntry> sentiment(std::string_view word) const;
  std::optional<std::string_view> lemma_exception(std::string_view word) const;

  // Term lists are stored lemmatized so they match preprocess() output.
  const std::unordered_set<std::string>& data_science_terms() const { return data_science_; }
  const std::vector<std::pair<std::string, std::unordered_set<std::string>>>& categories() const {
    return categories_;
  }

 private:
  Lexicons();

  std::unordered_set<std::string> stopwords_;
  std::unordered_set<std::string> familiar_;
  std::unordered_set<std::string> abbreviations_;
  std::unordered_map<std::string, SentimentEntry> sentiment_;
  std::unordered_map<std::string, std::string> lemma_exceptions_;
  std::unordered_set<std::string> data_science_;
  std::vector<std::pair<std::string, std::unordered_set<std::string>>> categories_;
};

// Rule-based suffix normalisation with an irregular-form dictionary. The
// rules are applied until nothing changes, so lemmatize is idempotent.
std::string lemmatize(std::string_view word, const Lexicons& lexicons = Lexicons::bundled());

// Lowercase, tokenize, drop stopwords, drop non-alphabetic tokens together
// with code spans, emojis and links, then lemmatize.
TokenList preprocess(std::string_view text, const Lexicons& lexicons = Lexicons::bundled());

// Splits on '.', '!' and '?' followed by whitespace or end of text, except
// after a known abbreviation. Text without terminal punctuation is one
// sentence; blank text has none.
std::vector<std::string> split_sentences(std::string_view text,
                                         const Lexicons& lexicons = Lexicons::bundled());

// Vowel-group heuristic with silent-e, "-le", "-ed" and "-es" adjustments;
// never below 1. Throws kInvalidArgument on empty or non-alphabetic input.
int count_syllables(std::string_view word);

// Whitespace-delimited chunks containing at least one ASCII letter or digit;
// the word_count reported by measure().
std::size_t count_words(std::string_view text);

// Shannon entropy in bits over the UTF-8 code points of `text`.
double shannon_entropy_bits(std::string_view text);

TextMetrics measure(std::string_view text, const Lexicons& lexicons = Lexicons::bundled());

}  // namespace qaexpert::textpipe
