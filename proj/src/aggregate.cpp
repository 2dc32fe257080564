#include "liftkit/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "liftkit/errors.hpp"
#include "liftkit/metrics.hpp"
#include "liftkit/rng.hpp"

namespace liftkit {

Strategy strategy_from_string(const std::string& s) {
    if (s == "R") return Strategy::kRandom;
    if (s == "B") return Strategy::kBest;
    if (s == "A") return Strategy::kAverage;
    if (s == "M") return Strategy::kMedian;
    if (s == "Bjoint") return Strategy::kBestJoint;
    throw ConfigError("unknown aggregation strategy: " + s);
}

std::string strategy_to_string(Strategy s) {
    switch (s) {
        case Strategy::kRandom: return "R";
        case Strategy::kBest: return "B";
        case Strategy::kAverage: return "A";
        case Strategy::kMedian: return "M";
        case Strategy::kBestJoint: return "Bjoint";
    }
    return "?";
}

namespace {

void require_hypotheses(const HypothesisSet& hs) {
    if (hs.count() < 1) throw ConfigError("aggregate: empty hypothesis set");
}

}  // namespace

Pose3D aggregate_average(const HypothesisSet& hs) {
    require_hypotheses(hs);
    Coords3 acc = Coords3::Zero(hs.joints(), 3);
    for (const auto& p : hs.poses) acc += p;
    Pose3D out;
    out.coords = acc / static_cast<double>(hs.count());
    return out;
}

Pose3D aggregate_median(const HypothesisSet& hs) {
    require_hypotheses(hs);
    const int H = hs.count();
    const int J = hs.joints();
    Pose3D out;
    out.coords.resize(J, 3);
    std::vector<double> vals(H);
    for (int j = 0; j < J; ++j)
        for (int c = 0; c < 3; ++c) {
            for (int h = 0; h < H; ++h) vals[h] = hs.poses[h](j, c);
            std::sort(vals.begin(), vals.end());
            out.coords(j, c) = H % 2 == 1 ? vals[H / 2]
                                          : 0.5 * (vals[H / 2 - 1] + vals[H / 2]);
        }
    return out;
}

AggregationResult select_random(const HypothesisSet& hs, std::uint64_t seed) {
    require_hypotheses(hs);
    Rng rng(derive_seed(seed, 0x5e1ec7));
    AggregationResult r;
    r.strategy = Strategy::kRandom;
    r.chosen_index = static_cast<int>(rng.uniform_int(hs.count()));
    r.pose.coords = hs.poses[*r.chosen_index];
    r.confidence = confidence(hs);
    return r;
}

AggregationResult select_best(const HypothesisSet& hs, const Pose3D& gt) {
    require_hypotheses(hs);
    AggregationResult r;
    r.strategy = Strategy::kBest;
    int best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (int h = 0; h < hs.count(); ++h) {
        Pose3D cand;
        cand.coords = hs.poses[h];
        const double err = mpjpe(cand, gt);
        if (err < best_err) {
            best_err = err;
            best = h;
        }
    }
    r.chosen_index = best;
    r.pose.coords = hs.poses[best];
    r.confidence = confidence(hs);
    return r;
}

Pose3D select_best_jointwise(const HypothesisSet& hs, const Pose3D& gt) {
    require_hypotheses(hs);
    const int J = hs.joints();
    if (gt.joints() != J) throw ConfigError("aggregate: ground truth joint count mismatch");
    Pose3D out;
    out.coords.resize(J, 3);
    for (int j = 0; j < J; ++j) {
        int best = 0;
        double best_err = std::numeric_limits<double>::infinity();
        for (int h = 0; h < hs.count(); ++h) {
            const double err = (hs.poses[h].row(j) - gt.coords.row(j)).norm();
            if (err < best_err) {
                best_err = err;
                best = h;
            }
        }
        out.coords.row(j) = hs.poses[best].row(j);
    }
    return out;
}

std::optional<double> confidence(const HypothesisSet& hs) {
    require_hypotheses(hs);
    const int H = hs.count();
    if (H < 2) return std::nullopt;
    const int J = hs.joints();
    double acc = 0.0;
    for (int j = 0; j < J; ++j)
        for (int c = 0; c < 3; ++c) {
            double mean = 0.0;
            for (int h = 0; h < H; ++h) mean += hs.poses[h](j, c);
            mean /= H;
            double ss = 0.0;
            for (int h = 0; h < H; ++h) {
                const double d = hs.poses[h](j, c) - mean;
                ss += d * d;
            }
            acc += ss / (H - 1);
        }
    return acc / (3.0 * J);
}

AggregationResult aggregate(const HypothesisSet& hs, Strategy strategy, std::uint64_t seed,
                            const Pose3D* gt) {
    switch (strategy) {
        case Strategy::kRandom: return select_random(hs, seed);
        case Strategy::kBest:
            if (!gt) throw ConfigError("aggregate: strategy B requires ground truth");
            return select_best(hs, *gt);
        case Strategy::kBestJoint: {
            if (!gt) throw ConfigError("aggregate: strategy Bjoint requires ground truth");
            AggregationResult r;
            r.strategy = Strategy::kBestJoint;
            r.pose = select_best_jointwise(hs, *gt);
            r.confidence = confidence(hs);
            return r;
        }
        case Strategy::kAverage: {
            AggregationResult r;
            r.strategy = Strategy::kAverage;
            r.pose = aggregate_average(hs);
            r.confidence = confidence(hs);
            return r;
        }
        case Strategy::kMedian: {
            AggregationResult r;
            r.strategy = Strategy::kMedian;
            r.pose = aggregate_median(hs);
            r.confidence = confidence(hs);
            return r;
        }
    }
    throw ConfigError("aggregate: unreachable strategy");
}

ConfidenceFilterResult confidence_filter(
    const std::vector<std::pair<const HypothesisSet*, const Pose3D*>>& frames,
    double recall, Strategy strategy, std::uint64_t seed) {
    if (frames.empty()) throw ConfigError("confidence_filter: no frames");
    if (!(recall > 0.0 && recall <= 1.0))
        throw ConfigError("confidence_filter: recall must lie in (0, 1]");

    const size_t n = frames.size();
    std::vector<double> scores(n);
    std::vector<double> errors(n);
    for (size_t i = 0; i < n; ++i) {
        const auto& [hs, gt] = frames[i];
        const auto score = confidence(*hs);
        if (!score) throw ConfigError("confidence_filter: needs H >= 2 per frame");
        scores[i] = *score;
        const AggregationResult agg = aggregate(*hs, strategy, derive_seed(seed, i), gt);
        errors[i] = mpjpe(agg.pose, *gt);
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    const size_t keep = static_cast<size_t>(std::ceil(recall * static_cast<double>(n)));

    ConfidenceFilterResult out;
    out.kept.assign(order.begin(), order.begin() + keep);
    std::sort(out.kept.begin(), out.kept.end());
    double kept_sum = 0.0, full_sum = 0.0;
    for (size_t i = 0; i < n; ++i) full_sum += errors[i];
    for (size_t i : out.kept) kept_sum += errors[i];
    out.kept_mpjpe = kept_sum / static_cast<double>(keep);
    out.full_mpjpe = full_sum / static_cast<double>(n);
    return out;
}

}  // namespace liftkit
