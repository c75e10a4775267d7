#ifndef MBGP_DELAYLAB_HPP
#define MBGP_DELAYLAB_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mbgp/diagnostics.hpp"
#include "mbgp/errors.hpp"
#include "mbgp/model.hpp"
#include "mbgp/tracemap.hpp"

namespace mbgp {

// Delay samples for one border link of one case, grouped by round.
class DelaySeries {
public:
    DelaySeries() = default;
    DelaySeries(std::string case_id, BorderLink link, int rounds)
        : case_id(std::move(case_id)), link(std::move(link)), rounds(rounds) {}

    std::string case_id;
    BorderLink link;
    int rounds = 0;

    void add(DelaySample s, Diagnostics& diag) {
        if (s.time_point < 0 || s.time_point >= rounds)
            throw ValidationError("time point " + std::to_string(s.time_point) +
                                  " outside campaign of " + std::to_string(rounds) + " rounds");
        auto& bucket = by_round_[s.time_point];
        for (const auto& existing : bucket) {
            if (existing.destination_ip == s.destination_ip) {
                diag.warn("duplicate_sample",
                          s.destination_ip.str() + " already sampled at round " +
                              std::to_string(s.time_point) + ", keeping the first");
                return;
            }
        }
        bucket.push_back(std::move(s));
    }

    const std::vector<DelaySample>& at(int t) const {
        static const std::vector<DelaySample> empty;
        auto it = by_round_.find(t);
        return it == by_round_.end() ? empty : it->second;
    }

    const std::map<int, std::vector<DelaySample>>& by_round() const { return by_round_; }

    std::size_t sample_count() const {
        std::size_t n = 0;
        for (const auto& [t, v] : by_round_) n += v.size();
        return n;
    }

private:
    std::map<int, std::vector<DelaySample>> by_round_;
};

// Border-link delay for one path: farside aggregated RTT minus nearside.
// Negative results are kept and flagged.
inline double link_delay(const AnnotatedPath& path, int link_hop_index, Diagnostics& diag) {
    const LinkAt* la = nullptr;
    for (const auto& candidate : path.border_links)
        if (candidate.nearside_hop == link_hop_index) la = &candidate;
    if (!la)
        throw ValidationError("no border link starts at hop " + std::to_string(link_hop_index));

    const Hop* near = nullptr;
    const Hop* far = nullptr;
    for (const auto& h : path.path.hops) {
        if (h.index == la->nearside_hop) near = &h;
        if (h.index == la->farside_hop) far = &h;
    }
    if (!near || !near->aggregated_rtt_ms)
        throw MissingRtt("nearside hop " + std::to_string(la->nearside_hop) + " has no RTT");
    if (!far || !far->aggregated_rtt_ms)
        throw MissingRtt("farside hop " + std::to_string(la->farside_hop) + " has no RTT");

    double delay = *far->aggregated_rtt_ms - *near->aggregated_rtt_ms;
    if (delay < 0)
        diag.warn("NEGATIVE_DELAY",
                  "negative link delay " + std::to_string(delay) + " ms towards " +
                      path.path.destination_ip.str());
    return delay;
}

// Linear interpolation between closest ranks: h = q * (n - 1).
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
    double h = q * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(h));
    auto hi = static_cast<std::size_t>(std::ceil(h));
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::vector<PercentileBand> percentile_bands(const DelaySeries& series) {
    std::vector<PercentileBand> out;
    for (int t = 0; t < series.rounds; ++t) {
        const auto& samples = series.at(t);
        PercentileBand b;
        b.time_point = t;
        b.sample_count = samples.size();
        if (!samples.empty()) {
            std::vector<double> v;
            v.reserve(samples.size());
            for (const auto& s : samples) v.push_back(s.delay_ms);
            std::sort(v.begin(), v.end());
            b.p25 = percentile_sorted(v, 0.25);
            b.p50 = percentile_sorted(v, 0.50);
            b.p75 = percentile_sorted(v, 0.75);
        }
        out.push_back(b);
    }
    return out;
}

// Half-open bins [k*w, (k+1)*w); negative delays land in negative bins.
inline std::vector<std::pair<double, std::size_t>> delay_histogram(const DelaySeries& series,
                                                                   int time_point,
                                                                   double bin_width_ms) {
    if (bin_width_ms <= 0) throw ValidationError("bin width must be positive");
    std::map<std::int64_t, std::size_t> bins;
    for (const auto& s : series.at(time_point))
        ++bins[static_cast<std::int64_t>(std::floor(s.delay_ms / bin_width_ms))];
    std::vector<std::pair<double, std::size_t>> out;
    for (const auto& [k, n] : bins) out.emplace_back(static_cast<double>(k) * bin_width_ms, n);
    return out;
}

enum class ChangeKind { LevelShift, Spike };

inline std::string to_string(ChangeKind k) {
    return k == ChangeKind::LevelShift ? "LEVEL_SHIFT" : "SPIKE";
}

struct ChangeEvent {
    ChangeKind kind = ChangeKind::Spike;
    int time_point = 0;
    double magnitude_ms = 0.0;
    std::size_t affected_ip_count = 0;
    bool persistent = false;

    auto operator<=>(const ChangeEvent&) const = default;
};

struct ChangeParams {
    double abs_threshold_ms = 5.0;
    double iqr_k = 3.0;
    int window = 8;
    int persist = 4;
};

// Change detection over per-round medians. The baseline at a point is the
// median of the trailing `window` points that carry data; the threshold is
// the larger of the absolute floor and iqr_k times the window's IQR. A level
// shift needs `persist` consecutive data points above threshold and wins over
// a spike verdict at the same point; a spike needs the next point back near
// the baseline.
inline std::vector<ChangeEvent> detect_changes(const DelaySeries& series,
                                               const ChangeParams& params = {}) {
    struct Point {
        int t;
        double median;
        std::vector<double> delays;
    };
    std::vector<Point> points;
    for (const auto& [t, samples] : series.by_round()) {
        if (samples.empty()) continue;
        std::vector<double> v;
        v.reserve(samples.size());
        for (const auto& s : samples) v.push_back(s.delay_ms);
        std::sort(v.begin(), v.end());
        points.push_back({t, percentile_sorted(v, 0.5), std::move(v)});
    }
    if (points.size() < 2 * static_cast<std::size_t>(params.window))
        throw InsufficientData("need " + std::to_string(2 * params.window) +
                               " data points, have " + std::to_string(points.size()));

    std::vector<ChangeEvent> events;
    std::size_t i = static_cast<std::size_t>(params.window);
    while (i < points.size()) {
        std::vector<double> window_medians;
        for (std::size_t j = i - params.window; j < i; ++j)
            window_medians.push_back(points[j].median);
        std::sort(window_medians.begin(), window_medians.end());
        double baseline = percentile_sorted(window_medians, 0.5);
        double iqr = percentile_sorted(window_medians, 0.75) -
                     percentile_sorted(window_medians, 0.25);
        double threshold = std::max(params.abs_threshold_ms, params.iqr_k * iqr);

        auto affected = [&] {
            std::size_t n = 0;
            for (double d : points[i].delays)
                if (d - baseline > threshold) ++n;
            return n;
        };

        bool shift = i + params.persist <= points.size();
        for (std::size_t j = i; shift && j < i + params.persist; ++j)
            if (points[j].median - baseline <= threshold) shift = false;
        if (shift) {
            events.push_back({ChangeKind::LevelShift, points[i].t,
                              points[i].median - baseline, affected(), true});
            i += params.persist;
            continue;
        }

        bool spike = points[i].median - baseline > threshold && i + 1 < points.size() &&
                     std::abs(points[i + 1].median - baseline) <= params.abs_threshold_ms;
        if (spike)
            events.push_back(
                {ChangeKind::Spike, points[i].t, points[i].median - baseline, affected(), false});
        ++i;
    }
    return events;
}

struct StabilityEntry {
    bool stable = true;
    std::vector<BorderLink> links;  // distinct, sorted

    auto operator<=>(const StabilityEntry&) const = default;
};

struct StabilityReport {
    std::map<IpAddress, StabilityEntry> by_ip;
    std::size_t stable_count = 0;
    std::size_t unstable_count = 0;
};

// Per-destination link stability across rounds: stable means one link in
// every round where the destination appears.
inline StabilityReport stability_report(
    const std::vector<std::pair<int, std::map<IpAddress, BorderLink>>>& per_round) {
    StabilityReport r;
    for (const auto& [round, assignment] : per_round) {
        for (const auto& [ip, link] : assignment) {
            auto& entry = r.by_ip[ip];
            auto pos = std::lower_bound(entry.links.begin(), entry.links.end(), link);
            if (pos == entry.links.end() || *pos != link) entry.links.insert(pos, link);
        }
    }
    for (auto& [ip, entry] : r.by_ip) {
        entry.stable = entry.links.size() == 1;
        ++(entry.stable ? r.stable_count : r.unstable_count);
    }
    return r;
}

struct IsolationEntry {
    BorderLink link;  // the link the event happened on
    ChangeEvent event;
    bool isolated = true;

    auto operator<=>(const IsolationEntry&) const = default;
};

struct IsolationReport {
    std::vector<IsolationEntry> entries;
};

inline std::string correlation_label(bool isolated) {
    return isolated ? "ISOLATED" : "CORRELATED";
}

// For every event on one link, whether the other link shows any event within
// one round of it.
inline IsolationReport compare_links(const DelaySeries& series_a, const DelaySeries& series_b,
                                     const std::vector<ChangeEvent>& events_a,
                                     const std::vector<ChangeEvent>& events_b) {
    IsolationReport r;
    auto scan = [&r](const BorderLink& link, const std::vector<ChangeEvent>& own,
                     const std::vector<ChangeEvent>& other) {
        for (const auto& e : own) {
            bool isolated = true;
            for (const auto& o : other)
                if (std::abs(o.time_point - e.time_point) <= 1) isolated = false;
            r.entries.push_back({link, e, isolated});
        }
    };
    scan(series_a.link, events_a, events_b);
    scan(series_b.link, events_b, events_a);
    return r;
}

inline double negative_fraction(const DelaySeries& series) {
    std::size_t total = 0, negative = 0;
    for (const auto& [t, samples] : series.by_round()) {
        total += samples.size();
        for (const auto& s : samples)
            if (s.delay_ms < 0) ++negative;
    }
    return total == 0 ? 0.0 : static_cast<double>(negative) / static_cast<double>(total);
}

}  // namespace mbgp

#endif
