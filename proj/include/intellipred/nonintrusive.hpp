#pragma once

#include "intellipred/error.hpp"
#include "intellipred/interchange.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace intellipred {

struct EntropyOptions
{
    /// Divide each hypothesis score by its token count (at least 1) before the softmax.
    bool length_norm = false;
};

/// Normalised beam probabilities, same order as the source hypotheses.
struct BeamPosterior
{
    std::vector<double> probabilities;
};

inline double hypothesis_score(const BeamHypothesis& h, const EntropyOptions& opts)
{
    if (!opts.length_norm)
        return h.score;
    return h.score / static_cast<double>(std::max<std::size_t>(1, h.tokens.size()));
}

/// Max-subtracted softmax over hypothesis scores.
inline BeamPosterior beam_posterior(const BeamSet& b, const EntropyOptions& opts = {})
{
    if (b.hypotheses.empty())
        throw ValidationError(fmt::format("beam '{}': empty hypothesis list", b.utterance_id));
    std::vector<double> s;
    s.reserve(b.hypotheses.size());
    for (const auto& h : b.hypotheses) {
        if (!std::isfinite(h.score))
            throw ValidationError(fmt::format("beam '{}': non-finite score", b.utterance_id));
        s.push_back(hypothesis_score(h, opts));
    }
    const double top = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double& v : s) {
        v = std::exp(v - top);
        z += v;
    }
    for (double& v : s)
        v /= z;
    return {std::move(s)};
}

/// sum_i p_i ln p_i over the beam posterior (nats, <= 0). Closer to 0 means a more confident decode.
inline double negative_entropy(const BeamPosterior& post)
{
    double acc = 0.0;
    for (double p : post.probabilities)
        if (p > 0.0)
            acc += p * std::log(p);
    return std::min(acc, 0.0);
}

inline double negative_entropy(const BeamSet& b, const EntropyOptions& opts = {})
{
    return negative_entropy(beam_posterior(b, opts));
}

} // namespace intellipred
