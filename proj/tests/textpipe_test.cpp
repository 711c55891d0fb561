#include <gtest/gtest.h>

#include <cctype>
#include <cmath>
#include <map>
#include <random>

#include "qaexpert/assets.hpp"
#include "qaexpert/error.hpp"
#include "qaexpert/textpipe.hpp"

namespace tp = qaexpert::textpipe;

namespace {

// Shannon entropy from a hand-built frequency table; only valid for ASCII.
double entropy_oracle(const std::string& s) {
  std::map<char, double> freq;
  for (char c : s) freq[c] += 1.0;
  double h = 0.0;
  for (const auto& [c, n] : freq) {
    const double p = n / static_cast<double>(s.size());
    h -= p * std::log2(p);
  }
  return h;
}

std::string random_text(std::mt19937_64& rng, std::size_t len) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,!?'`-_:/()[]\n\t";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += alphabet[pick(rng)];
  return s;
}

}  // namespace

TEST(Preprocess, EmptyTextGivesNoTokens) {
  const auto t = tp::preprocess("");
  EXPECT_TRUE(t.tokens.empty());
  EXPECT_EQ(t.raw_word_count, 0u);
}

TEST(Preprocess, StopwordsDroppedAndLemmatized) {
  const auto t = tp::preprocess("The models ARE running!");
  EXPECT_EQ(t.tokens, (std::vector<std::string>{"model", "run"}));
  EXPECT_GE(t.raw_word_count, t.tokens.size());
}

TEST(Preprocess, LinksCodeAndEmojiStripped) {
  const auto t = tp::preprocess("see https://a.io `x=1` \xF0\x9F\x99\x82");
  EXPECT_EQ(t.tokens, (std::vector<std::string>{"see"}));
}

TEST(Preprocess, FencedCodeBlockStripped) {
  const auto t = tp::preprocess("Try this:\n```\nimport pandas as pd\n```\nworks");
  for (const auto& tok : t.tokens) EXPECT_NE(tok, "pandas");
}

TEST(Preprocess, TokensAreLowercaseAlphabeticOnRandomText) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto text = random_text(rng, 1 + trial % 120);
    const auto t = tp::preprocess(text);
    EXPECT_GE(t.raw_word_count, t.tokens.size());
    for (const auto& tok : t.tokens) {
      ASSERT_FALSE(tok.empty());
      for (char c : tok) ASSERT_TRUE(c >= 'a' && c <= 'z') << "token '" << tok << "' from '" << text << "'";
    }
  }
}

TEST(Preprocess, IdempotentOnJoinedOutput) {
  std::mt19937_64 rng(12);
  const std::vector<std::string> samples = {
      "The models ARE running and the studies were completed quickly.",
      "I think you should try using random forests, they're easier to tune!",
      "Statistics, probabilities and regressions: analysts' daily bread."};
  for (const auto& s : samples) {
    const auto once = tp::preprocess(s);
    std::string joined;
    for (const auto& tok : once.tokens) joined += tok + " ";
    EXPECT_EQ(tp::preprocess(joined).tokens, once.tokens) << s;
  }
  for (int trial = 0; trial < 100; ++trial) {
    const auto once = tp::preprocess(random_text(rng, 80));
    std::string joined;
    for (const auto& tok : once.tokens) joined += tok + " ";
    EXPECT_EQ(tp::preprocess(joined).tokens, once.tokens);
  }
}

TEST(Lemmatize, IsIdempotent) {
  for (const char* w : {"running", "studies", "models", "classes", "analyses", "better", "went", "data",
                        "learning", "tries", "boxes", "stopped"}) {
    const auto once = tp::lemmatize(w);
    EXPECT_EQ(tp::lemmatize(once), once) << w;
  }
}

TEST(SplitSentences, TerminalPunctuation) {
  EXPECT_EQ(tp::split_sentences("Hi. Bye.").size(), 2u);
  EXPECT_EQ(tp::split_sentences("What? Really! Yes.").size(), 3u);
}

TEST(SplitSentences, AbbreviationGuard) { EXPECT_EQ(tp::split_sentences("e.g. this works.").size(), 1u); }

TEST(SplitSentences, NoPunctuationIsOneSentence) {
  EXPECT_EQ(tp::split_sentences("no punctuation").size(), 1u);
  EXPECT_TRUE(tp::split_sentences("   ").empty());
}

TEST(CountSyllables, DictionaryExamples) {
  EXPECT_EQ(tp::count_syllables("cat"), 1);
  EXPECT_EQ(tp::count_syllables("data"), 2);
  EXPECT_EQ(tp::count_syllables("gobbledygook"), 4);
  EXPECT_EQ(tp::count_syllables("table"), 2);
  EXPECT_EQ(tp::count_syllables("the"), 1);
}

TEST(CountSyllables, RejectsNonAlphabetic) {
  EXPECT_THROW(tp::count_syllables(""), qaexpert::Error);
  EXPECT_THROW(tp::count_syllables("x1"), qaexpert::Error);
}

TEST(CountWords, WhitespaceChunksWithAlnum) {
  EXPECT_EQ(tp::count_words(""), 0u);
  EXPECT_EQ(tp::count_words("hello world"), 2u);
  EXPECT_EQ(tp::count_words("a -- b"), 2u);
  EXPECT_EQ(tp::count_words("  trailing   spaces  "), 2u);
  EXPECT_EQ(tp::count_words("x=1, y=2"), 2u);
}

TEST(Entropy, HandExamples) {
  EXPECT_EQ(tp::shannon_entropy_bits("aaaa"), 0.0);
  EXPECT_EQ(tp::shannon_entropy_bits("abcd"), 2.0);
  EXPECT_EQ(tp::shannon_entropy_bits(""), 0.0);
}

TEST(Entropy, MatchesFrequencyOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_text(rng, 1 + trial);
    EXPECT_NEAR(tp::shannon_entropy_bits(s), entropy_oracle(s), 1e-12) << s;
  }
}

TEST(Entropy, UnchangedBySelfConcatenation) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_text(rng, 5 + trial);
    EXPECT_NEAR(tp::measure(s + s).entropy_bits, tp::measure(s).entropy_bits, 1e-12);
  }
}

TEST(Entropy, BoundedByAlphabetSize) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_text(rng, 10 + trial);
    std::map<char, int> distinct;
    for (char c : s) distinct[c]++;
    const double h = tp::shannon_entropy_bits(s);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log2(static_cast<double>(distinct.size())) + 1e-12);
  }
}

TEST(Measure, CatSatOnTheMat) {
  const auto m = tp::measure("The cat sat on the mat.");
  EXPECT_EQ(m.word_count, 6u);
  EXPECT_EQ(m.sentence_count, 1u);
  EXPECT_EQ(m.syllable_count, 6u);
  EXPECT_EQ(m.polysyllable_count, 0u);
  // 206.835 - 1.015 * 6 - 84.6 * 1 evaluates to 116.145.
  const double fre = 206.835 - 1.015 * (6.0 / 1.0) - 84.6 * (6.0 / 6.0);
  EXPECT_NEAR(fre, 116.145, 1e-9);
  EXPECT_NEAR(m.readability.flesch_reading_ease, fre, 1e-9);
  EXPECT_NEAR(m.readability.gunning_fog, 2.4, 1e-12);
  EXPECT_TRUE(m.readability.smog_low_confidence);
}

TEST(Measure, ReadingTimeFromCharacters) {
  const auto m = tp::measure("Regression models");
  EXPECT_EQ(m.char_count, 16u);
  EXPECT_NEAR(m.reading_time_s, 16 * tp::kReadingMillisPerChar / 1000.0, 1e-12);
}

TEST(Measure, RangesOnRandomText) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = tp::measure(random_text(rng, trial * 3));
    EXPECT_GE(m.polarity, -1.0);
    EXPECT_LE(m.polarity, 1.0);
    EXPECT_GE(m.subjectivity, 0.0);
    EXPECT_LE(m.subjectivity, 1.0);
    EXPECT_GE(m.data_science_score, 0.0);
    EXPECT_LE(m.data_science_score, 1.0);
    for (const auto& [name, score] : m.category_scores) {
      EXPECT_GE(score, 0.0);
      EXPECT_LE(score, 1.0);
    }
    EXPECT_LE(m.polysyllable_count, m.word_count);
    EXPECT_LE(m.difficult_word_count, m.word_count);
    if (m.word_count > 0 && m.sentence_count > 0) {
      EXPECT_TRUE(std::isfinite(m.readability.flesch_reading_ease));
      EXPECT_TRUE(std::isfinite(m.readability.smog));
      EXPECT_TRUE(std::isfinite(m.readability.dale_chall));
    }
  }
}

TEST(Measure, NoSentimentMatchesGivesZero) {
  const auto m = tp::measure("zxqv blorptastic");
  EXPECT_EQ(m.polarity, 0.0);
  EXPECT_EQ(m.subjectivity, 0.0);
}

TEST(Measure, CategoriesAreTheShippedLists) {
  const auto m = tp::measure("python code");
  ASSERT_EQ(m.category_scores.size(), 2u);
  EXPECT_TRUE(m.category_scores.count("programming"));
  EXPECT_TRUE(m.category_scores.count("technology"));
}

TEST(Readability, FleschDecreasesWithSyllablesPerWord) {
  // Same word and sentence counts, more syllables per word in the second text.
  const auto a = tp::measure("The cat sat on the mat.");
  const auto b = tp::measure("The elephant meditated on the veranda.");
  ASSERT_EQ(a.word_count, b.word_count);
  ASSERT_EQ(a.sentence_count, b.sentence_count);
  ASSERT_GT(b.syllable_count, a.syllable_count);
  EXPECT_LT(b.readability.flesch_reading_ease, a.readability.flesch_reading_ease);
}

TEST(Readability, PublishedFormulasOnCounts) {
  tp::ReadabilityCounts c;
  c.words = 120;
  c.sentences = 8;
  c.syllables = 180;
  c.polysyllables = 12;
  c.chars = 600;
  c.letters = 560;
  c.difficult = 9;
  c.unfamiliar = 14;
  const auto r = tp::readability(c);
  const double wps = 120.0 / 8.0, spw = 180.0 / 120.0;
  EXPECT_NEAR(r.flesch_reading_ease, 206.835 - 1.015 * wps - 84.6 * spw, 1e-9);
  EXPECT_NEAR(r.flesch_kincaid_grade, 0.39 * wps + 11.8 * spw - 15.59, 1e-9);
  EXPECT_NEAR(r.gunning_fog, 0.4 * (wps + 100.0 * 12.0 / 120.0), 1e-9);
  EXPECT_NEAR(r.smog, 1.0430 * std::sqrt(12.0 * 30.0 / 8.0) + 3.1291, 1e-9);
  EXPECT_NEAR(r.automated_readability_index, 4.71 * 600.0 / 120.0 + 0.5 * wps - 21.43, 1e-9);
  EXPECT_NEAR(r.coleman_liau, 0.0588 * (560.0 / 120.0 * 100.0) - 0.296 * (8.0 / 120.0 * 100.0) - 15.8, 1e-9);
  const double pct_difficult = 100.0 * 9.0 / 120.0;
  EXPECT_NEAR(r.dale_chall, 0.1579 * pct_difficult + 0.0496 * wps + 3.6365, 1e-9);
  EXPECT_NEAR(r.spache, 0.121 * wps + 0.082 * (100.0 * 14.0 / 120.0) + 0.659, 1e-9);
}

TEST(Readability, ZeroWithoutWords) {
  const auto r = tp::readability({});
  EXPECT_EQ(r.flesch_reading_ease, 0.0);
  EXPECT_EQ(r.smog, 0.0);
}

TEST(Assets, EveryLexiconHasAVersion) {
  const auto versions = qaexpert::assets::versions();
  EXPECT_GE(versions.size(), 8u);
  for (const auto& [file, version] : versions) EXPECT_FALSE(version.empty()) << file;
}
