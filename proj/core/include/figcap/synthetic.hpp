#pragma once

#include <cstdint>
#include <string>

#include "figcap/corpus.hpp"

namespace figcap::corpus {

struct SyntheticSpec {
    std::size_t task_count = 20;
    std::uint64_t seed = 17;
    std::size_t min_profiles = 1;
    std::size_t max_profiles = 3;
    std::string split_name = "synthetic";
};

/// Deterministic toy dataset for smoke runs and tests: one paper per task,
/// text-only records with distinct captions, paragraphs, mentions and OCR
/// strings. Same spec -> identical dataset, across processes.
Dataset make_synthetic_dataset(const SyntheticSpec& spec);

} // namespace figcap::corpus
