#ifndef AESTH_ATTRIBUTES_HPP_
#define AESTH_ATTRIBUTES_HPP_

#include <array>
#include <string>
#include <vector>

namespace aesth {

/// Canonical output order, shared by the model head, manifest columns,
/// evaluation report rows, and CLI attribute flags. The first eight are
/// attributes scored in [-1, 1]; the last is the overall score in [0, 1].
inline constexpr std::array<const char*, 9> kAttributeNames = {
    "balancing_elements", "content",        "color_harmony",
    "depth_of_field",     "light",          "object_emphasis",
    "rule_of_thirds",     "vivid_color",    "overall",
};

inline constexpr int kNumOutputs = 9;

enum AttributeIndex : int {
    kBalancingElements = 0,
    kContent = 1,
    kColorHarmony = 2,
    kDepthOfField = 3,
    kLight = 4,
    kObjectEmphasis = 5,
    kRuleOfThirds = 6,
    kVividColor = 7,
    kOverall = 8,
};

inline std::vector<std::string> attribute_name_list() {
    return std::vector<std::string>(kAttributeNames.begin(), kAttributeNames.end());
}

/// Index of a named attribute, or -1 when unknown.
inline int attribute_index(const std::string& name) {
    for (int i = 0; i < kNumOutputs; ++i) {
        if (name == kAttributeNames[static_cast<std::size_t>(i)]) return i;
    }
    return -1;
}

}  // namespace aesth

#endif  // AESTH_ATTRIBUTES_HPP_
