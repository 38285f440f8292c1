#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "figcap/errors.hpp"

namespace figcap {

/// Integer caption quality on the 1 (low) .. 6 (high) scale.
class QualityScore {
public:
    static constexpr int kMin = 1;
    static constexpr int kMax = 6;
    static constexpr int kLevels = 6;

    explicit QualityScore(int value) : value_(value) {
        if (value < kMin || value > kMax)
            throw InvalidArgumentError("quality score out of range 1..6: " +
                                       std::to_string(value));
    }

    static std::optional<QualityScore> try_from(int value) {
        if (value < kMin || value > kMax)
            return std::nullopt;
        return QualityScore(value);
    }

    int value() const { return value_; }
    auto operator<=>(const QualityScore&) const = default;

private:
    int value_;
};

/// One prompt block: either plain text or a reference to an image file.
struct MessageBlock {
    enum class Type { kText, kImage };

    Type type = Type::kText;
    std::string content; // text payload, or the image_ref for kImage

    static MessageBlock text(std::string s) { return {Type::kText, std::move(s)}; }
    static MessageBlock image(std::string ref) { return {Type::kImage, std::move(ref)}; }

    bool operator==(const MessageBlock&) const = default;
};

/// Ordered prompt content; block order is part of the contract.
using MessageSequence = std::vector<MessageBlock>;

/// All text blocks joined with newlines. Image blocks are skipped.
std::string sequence_text(const MessageSequence& seq);

} // namespace figcap
