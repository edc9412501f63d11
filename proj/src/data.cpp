#include "emoint/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "emoint/error.hpp"

namespace emoint {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

char to_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (to_lower(s[i]) != prefix[i]) return false;
  }
  return true;
}

bool is_stripped_token(std::string_view token) {
  return token.front() == '@' || starts_with_ci(token, "http://") ||
         starts_with_ci(token, "https://") || starts_with_ci(token, "www.");
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_kept_tokens(std::string_view s) {
  std::string out;
  for (auto token : split_ws(s)) {
    if (is_stripped_token(token)) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(token);
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
  throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::string_view emotion_name(Emotion e) {
  switch (e) {
    case Emotion::kJoy: return "joy";
    case Emotion::kAnger: return "anger";
    case Emotion::kFear: return "fear";
    case Emotion::kSadness: return "sadness";
  }
  return "?";
}

Emotion parse_emotion(std::string_view name) {
  for (auto e : kAllEmotions) {
    if (emotion_name(e) == name) return e;
  }
  throw Error(ErrorCode::kParse, "unknown emotion '" + std::string(name) + "'");
}

std::string_view split_name(SplitName s) {
  switch (s) {
    case SplitName::kTrain: return "train";
    case SplitName::kDev: return "dev";
    case SplitName::kTest: return "test";
  }
  return "?";
}

SplitName parse_split_name(std::string_view name) {
  if (name == "train") return SplitName::kTrain;
  if (name == "dev") return SplitName::kDev;
  if (name == "test") return SplitName::kTest;
  throw Error(ErrorCode::kParse, "unknown split '" + std::string(name) + "'");
}

DatasetSplit parse_dataset(std::istream& in, SplitName split) {
  DatasetSplit out;
  out.name = split;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;

    auto fields = split_tabs(line);
    if (fields.size() != 3 && fields.size() != 4) {
      fail_line(line_no, "expected 4 tab-separated fields, found " + std::to_string(fields.size()));
    }
    TweetRecord rec;
    rec.id = std::string(trim(fields[0]));
    if (rec.id.empty()) fail_line(line_no, "empty id");
    rec.raw_text = std::string(fields[1]);
    if (trim(rec.raw_text).empty()) fail_line(line_no, "empty text");
    try {
      rec.emotion = parse_emotion(trim(fields[2]));
    } catch (const Error& e) {
      fail_line(line_no, e.what());
    }
    if (fields.size() == 4) {
      auto value = trim(fields[3]);
      if (!(value.empty() || value == "NONE" || value == "NA" || value == "?")) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(v)) {
          fail_line(line_no, "non-numeric intensity '" + std::string(value) + "'");
        }
        if (v < 0.0 || v > 1.0) {
          fail_line(line_no, "intensity " + std::string(value) + " outside [0,1]");
        }
        rec.intensity = v;
      }
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

DatasetSplit read_dataset(const std::string& path, SplitName split) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset '" + path + "'");
  try {
    return parse_dataset(in, split);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::string format_decimal(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_dataset(std::ostream& out, const DatasetSplit& split) {
  for (const auto& r : split.records) {
    out << r.id << '\t' << r.raw_text << '\t' << emotion_name(r.emotion) << '\t'
        << (r.intensity ? format_decimal(*r.intensity) : std::string("NONE")) << '\n';
  }
}

bool is_allowed_char(char c) {
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) return true;
  switch (c) {
    case '@': case '-': case '!': case ':': case '(': case ')': case ',':
    case ';': case '?': case '.': case '#': case '\'': case '*':
      return true;
    default:
      return false;
  }
}

std::string preprocess(std::string_view raw_text) {
  std::string text = join_kept_tokens(raw_text);
  for (auto& c : text) {
    if (!is_allowed_char(c)) c = ' ';
  }
  // Filtering can expose new "@x" or "www." tokens (e.g. "~@x"); strip again.
  text = join_kept_tokens(text);
  for (auto& c : text) c = to_lower(c);
  return text;
}

EmotionBuckets split_by_emotion(const DatasetSplit& split) {
  EmotionBuckets buckets;
  for (const auto& r : split.records) buckets[emotion_index(r.emotion)].push_back(r);
  return buckets;
}

}  // namespace emoint
