#include "qaexpert/assets.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "qaexpert/error.hpp"

namespace qaexpert::assets {
namespace detail {
extern const std::pair<std::string_view, std::string_view> kEmbedded[];
extern const std::size_t kEmbeddedCount;
}  // namespace detail

std::string_view raw(std::string_view file_name) {
  for (std::size_t i = 0; i < detail::kEmbeddedCount; ++i) {
    if (detail::kEmbedded[i].first == file_name) return detail::kEmbedded[i].second;
  }
  fail(ErrorCode::kNotFound, "no bundled asset named " + std::string(file_name));
}

Lexicon parse_lexicon(std::string_view text) {
  Lexicon lexicon;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    if (line.empty()) continue;
    if (!header_seen) {
      std::istringstream header{std::string(line)};
      std::string tag;
      header >> tag >> lexicon.name >> lexicon.version;
      require(tag == "#lexicon" && !lexicon.name.empty() && !lexicon.version.empty(),
              ErrorCode::kInvalidArgument, "lexicon is missing its '#lexicon <name> <version>' header");
      header_seen = true;
      continue;
    }
    lexicon.entries.emplace_back(line);
  }
  require(header_seen, ErrorCode::kInvalidArgument, "empty lexicon");
  return lexicon;
}

Lexicon load_lexicon(std::string_view file_name) { return parse_lexicon(raw(file_name)); }

std::vector<std::pair<std::string, std::string>> versions() {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < detail::kEmbeddedCount; ++i) {
    const auto& [name, body] = detail::kEmbedded[i];
    std::string version;
    if (name.ends_with(".json")) {
      version = nlohmann::json::parse(body).value("version", "");
    } else {
      version = parse_lexicon(body).version;
    }
    out.emplace_back(std::string(name), version);
  }
  return out;
}

}  // namespace qaexpert::assets
