#include "cdl/emotion.hpp"

#include "cdl/error.hpp"

namespace cdl {

namespace {
constexpr std::array<std::string_view, kNumEmotions> kNames = {"Neutral", "Like", "Sad",
                                                               "Disgust", "Angry", "Happy"};
}

std::string_view emotion_name(Emotion e) { return kNames.at(static_cast<std::size_t>(e)); }

std::optional<Emotion> parse_emotion(std::string_view name) {
  for (int i = 0; i < kNumEmotions; ++i)
    if (kNames[i] == name) return static_cast<Emotion>(i);
  return std::nullopt;
}

Emotion emotion_from_name(std::string_view name) {
  if (auto e = parse_emotion(name)) return *e;
  throw ValidationError("unknown emotion category '" + std::string(name) + "'");
}

Emotion emotion_from_id(int id) {
  if (id < 0 || id >= kNumEmotions)
    throw ValidationError("emotion id out of range: " + std::to_string(id));
  return static_cast<Emotion>(id);
}

}  // namespace cdl
