#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deepframe/archspec.hpp"
#include "deepframe/coherence.hpp"
#include "deepframe/minimizer.hpp"

namespace deepframe {

struct Candidate {
    ArchitectureSpec spec;
    MinResult result;
    std::int64_t param_count = 0;
    CoherenceReport report;  // at the minimizer

    double score() const noexcept { return result.objective; }
};

Candidate evaluate_candidate(const ArchitectureSpec& spec, const MinimizeOptions& opts);

struct RankingReport {
    std::vector<Candidate> ranked;       // best first
    std::vector<std::string> excluded;   // names dropped by the constraint
    std::optional<std::int64_t> max_params;

    std::string constraint() const;
};

// Filters by parameter budget and sorts by (score, param_count, name).
// Throws SpecError when nothing survives the filter.
RankingReport rank(std::vector<Candidate> candidates, std::optional<std::int64_t> max_params = std::nullopt);

}  // namespace deepframe
