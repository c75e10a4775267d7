#ifndef MBGP_MODEL_HPP
#define MBGP_MODEL_HPP

#include <algorithm>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mbgp/errors.hpp"
#include "mbgp/ip.hpp"

namespace mbgp {

// Layer-3 interconnection between a nearside and a farside border router,
// as seen in traceroute: two consecutive responding hops in different ASes.
struct BorderLink {
    IpAddress nearside_ip;
    IpAddress farside_ip;
    Asn nearside_asn = 0;
    Asn farside_asn = 0;
    bool crosses_ixp = false;
    std::optional<std::uint64_t> bandwidth_bps;  // operator-supplied, never measured

    auto operator<=>(const BorderLink&) const = default;
};

inline void validate(const BorderLink& l) {
    if (l.nearside_asn == l.farside_asn)
        throw ValidationError("border link endpoints must be in different ASes");
    if (l.nearside_ip == l.farside_ip)
        throw ValidationError("border link endpoints must be distinct addresses");
    if (l.bandwidth_bps && *l.bandwidth_bps == 0)
        throw ValidationError("border link bandwidth must be positive");
}

// One deployment: a nearside router sharing traffic to a destination prefix
// across parallel border links towards one farside AS.
struct MBGPCase {
    Asn nearside_asn = 0;
    std::string nearside_router;  // LG hostname, stable across renumbering
    Asn farside_asn = 0;
    IpPrefix destination_prefix;
    std::vector<BorderLink> border_links;  // discovered; may be empty at inference time
    AddressFamily address_family = AddressFamily::V4;

    auto operator<=>(const MBGPCase&) const = default;
};

inline void validate(const MBGPCase& c) {
    if (c.nearside_asn == c.farside_asn)
        throw ValidationError("nearside and farside AS must differ");
    if (c.address_family != c.destination_prefix.address.family)
        throw ValidationError("address family does not match destination prefix");
    for (const auto& l : c.border_links) {
        validate(l);
        if (l.nearside_asn != c.nearside_asn || l.farside_asn != c.farside_asn)
            throw ValidationError("border link ASes do not match the case");
    }
}

// Canonical identifier of a deployment tuple. Distinct tuples yield distinct
// keys: the router name is the only free-form field and '|' never appears in
// LG hostnames.
inline std::string case_key(const MBGPCase& c) {
    return std::to_string(c.nearside_asn) + "|" + c.nearside_router + "|" +
           std::to_string(c.farside_asn) + "|" + c.destination_prefix.str();
}

enum class Origin { Igp, Egp, Incomplete };
enum class LearnedFrom { Ebgp, Ibgp };

inline std::string to_string(Origin o) {
    switch (o) {
        case Origin::Igp: return "IGP";
        case Origin::Egp: return "EGP";
        default: return "INCOMPLETE";
    }
}

inline std::string to_string(LearnedFrom l) {
    return l == LearnedFrom::Ebgp ? "EBGP" : "IBGP";
}

// One route block from an LG route-detail response. Attributes a block did
// not carry stay unset; unrecognized status letters are preserved verbatim.
struct RouteEntry {
    IpPrefix prefix;
    std::set<char> status_flags;
    IpAddress next_hop;
    std::optional<std::int64_t> local_pref;
    std::optional<std::int64_t> weight;
    std::vector<Asn> as_path;
    std::optional<Origin> origin;
    std::optional<std::int64_t> med;
    std::optional<std::int64_t> igp_metric;
    std::optional<LearnedFrom> learned_from;
    Asn neighbor_asn = 0;

    bool has_flag(char c) const { return status_flags.count(c) > 0; }

    auto operator<=>(const RouteEntry&) const = default;
};

inline void validate(const RouteEntry& r) {
    if (r.has_flag('E') && r.has_flag('I'))
        throw ValidationError("status flags E and I are mutually exclusive");
    if (!r.as_path.empty() && r.neighbor_asn != r.as_path.front())
        throw ValidationError("neighbor_asn must equal the first AS in the path");
}

// One hop of a traceroute: every probe reply, plus the RTT aggregate filled
// in at ingest. An empty replies list marks an unresponsive hop.
struct Hop {
    int index = 0;
    struct Reply {
        std::optional<IpAddress> responder;
        std::optional<double> rtt_ms;
        auto operator<=>(const Reply&) const = default;
    };
    std::vector<Reply> replies;
    std::optional<double> aggregated_rtt_ms;

    auto operator<=>(const Hop&) const = default;
};

struct TraceroutePath {
    IpAddress source_ip;
    IpAddress destination_ip;
    std::int64_t timestamp = 0;  // UTC seconds
    std::vector<Hop> hops;
    int paris_variation = 0;

    auto operator<=>(const TraceroutePath&) const = default;
};

inline void validate(const TraceroutePath& p) {
    int prev = 0;
    for (const auto& h : p.hops) {
        if (h.index <= prev)
            throw ValidationError("hop indices must be strictly increasing from 1");
        prev = h.index;
        bool any_timed = false;
        for (const auto& r : h.replies) {
            if (r.rtt_ms && *r.rtt_ms < 0)
                throw ValidationError("reply RTT must be non-negative");
            if (r.responder && r.rtt_ms) any_timed = true;
        }
        if (h.aggregated_rtt_ms.has_value() != any_timed)
            throw ValidationError(
                "aggregated RTT must be present exactly when a timed reply exists");
        if (h.aggregated_rtt_ms && *h.aggregated_rtt_ms < 0)
            throw ValidationError("aggregated RTT must be non-negative");
    }
    if (!p.hops.empty() && p.hops.front().index < 1)
        throw ValidationError("hop indices must start at 1");
}

// One border-link delay measurement: farside RTT minus nearside RTT for one
// destination at one round. Negative values are kept and flagged upstream.
struct DelaySample {
    std::string case_id;
    BorderLink link;
    IpAddress destination_ip;
    int time_point = 0;  // 0-based round index
    double delay_ms = 0.0;

    auto operator<=>(const DelaySample&) const = default;
};

struct PercentileBand {
    int time_point = 0;
    std::optional<double> p25;
    std::optional<double> p50;
    std::optional<double> p75;
    std::size_t sample_count = 0;

    auto operator<=>(const PercentileBand&) const = default;
};

inline void validate(const PercentileBand& b) {
    if (b.sample_count >= 1) {
        if (!b.p25 || !b.p50 || !b.p75)
            throw ValidationError("non-empty band must carry all three percentiles");
        if (!(*b.p25 <= *b.p50 && *b.p50 <= *b.p75))
            throw ValidationError("band percentiles must be ordered");
    }
}

}  // namespace mbgp

#endif
