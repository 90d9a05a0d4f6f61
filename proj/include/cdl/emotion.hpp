#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace cdl {

/// The six emotion categories of the NLPCC2017 emotional conversation data.
enum class Emotion : int { Neutral = 0, Like = 1, Sad = 2, Disgust = 3, Angry = 4, Happy = 5 };

inline constexpr int kNumEmotions = 6;

inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions = {
    Emotion::Neutral, Emotion::Like, Emotion::Sad, Emotion::Disgust, Emotion::Angry, Emotion::Happy};

std::string_view emotion_name(Emotion e);
std::optional<Emotion> parse_emotion(std::string_view name);
/// Throws ValidationError on an unknown name.
Emotion emotion_from_name(std::string_view name);
Emotion emotion_from_id(int id);

inline int emotion_id(Emotion e) { return static_cast<int>(e); }

}  // namespace cdl
