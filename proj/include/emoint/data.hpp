#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace emoint {

enum class Emotion { kJoy, kAnger, kFear, kSadness };

inline constexpr std::array<Emotion, 4> kAllEmotions = {
    Emotion::kJoy, Emotion::kAnger, Emotion::kFear, Emotion::kSadness};

std::string_view emotion_name(Emotion e);
// Throws Error(kParse) for anything other than the four lowercase names.
Emotion parse_emotion(std::string_view name);
inline std::size_t emotion_index(Emotion e) { return static_cast<std::size_t>(e); }

struct TweetRecord {
  std::string id;
  std::string raw_text;
  Emotion emotion = Emotion::kJoy;
  std::optional<double> intensity;  // absent for unlabeled test data

  bool operator==(const TweetRecord&) const = default;
};

enum class SplitName { kTrain, kDev, kTest };

std::string_view split_name(SplitName s);
SplitName parse_split_name(std::string_view name);

struct DatasetSplit {
  SplitName name = SplitName::kTrain;
  std::vector<TweetRecord> records;
};

/// Parses the shared-task TSV layout `id \t text \t emotion \t intensity`.
///
/// A missing fourth field, an empty one, or one of the placeholders
/// `NONE`/`NA`/`?` marks the record as unlabeled. Blank lines are skipped.
/// Errors carry the 1-based line number.
DatasetSplit parse_dataset(std::istream& in, SplitName split);
DatasetSplit read_dataset(const std::string& path, SplitName split);

// Inverse of parse_dataset. Intensities use the shortest round-trip decimal form.
void write_dataset(std::ostream& out, const DatasetSplit& split);

// Strip URLs and mentions, replace characters outside the allowed set with
// spaces, lowercase, collapse whitespace. Idempotent.
std::string preprocess(std::string_view raw_text);

// True for the characters preprocess() keeps (space excluded).
bool is_allowed_char(char c);

using EmotionBuckets = std::array<std::vector<TweetRecord>, 4>;

EmotionBuckets split_by_emotion(const DatasetSplit& split);

std::string format_decimal(double value);

}  // namespace emoint
