#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Versioned lexicon assets compiled into the library. Each lexicon is UTF-8,
// one entry per line, preceded by a header line "#lexicon <name> <version>".
// Entries may carry extra tab-separated columns (the sentiment lexicon does).
namespace qaexpert::assets {

struct Lexicon {
  std::string name;
  std::string version;
  std::vector<std::string> entries;
};

// Raw bytes of a bundled asset file, e.g. "stopwords.txt". Throws kNotFound.
std::string_view raw(std::string_view file_name);

Lexicon parse_lexicon(std::string_view text);
Lexicon load_lexicon(std::string_view file_name);

// (asset file name, version) for every bundled asset; recorded in run manifests.
std::vector<std::pair<std::string, std::string>> versions();

}  // namespace qaexpert::assets
