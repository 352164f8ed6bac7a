#include "deepframe/selection.hpp"

#include <algorithm>
#include <tuple>

namespace deepframe {

Candidate evaluate_candidate(const ArchitectureSpec& spec, const MinimizeOptions& opts) {
    Candidate c;
    c.spec = spec;
    c.param_count = param_count(spec);
    c.result = minimize_deep_frame_potential(spec, opts);
    c.report = analyze(build_global_frame(spec, c.result.params, true));
    return c;
}

std::string RankingReport::constraint() const {
    return max_params ? "param_count <= " + std::to_string(*max_params) : "none";
}

RankingReport rank(std::vector<Candidate> candidates, std::optional<std::int64_t> max_params) {
    RankingReport out;
    out.max_params = max_params;
    for (auto& c : candidates) {
        if (max_params && c.param_count > *max_params)
            out.excluded.push_back(c.spec.name);
        else
            out.ranked.push_back(std::move(c));
    }
    if (out.ranked.empty())
        throw SpecError("candidates", candidates.empty() ? "no candidate architectures"
                                                         : "no candidate satisfies " + out.constraint());
    std::sort(out.ranked.begin(), out.ranked.end(), [](const Candidate& a, const Candidate& b) {
        return std::make_tuple(a.score(), a.param_count, a.spec.name, spec_hash(a.spec)) <
               std::make_tuple(b.score(), b.param_count, b.spec.name, spec_hash(b.spec));
    });
    std::sort(out.excluded.begin(), out.excluded.end());
    return out;
}

}  // namespace deepframe
