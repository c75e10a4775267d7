#ifndef MBGP_SIMNET_HPP
#define MBGP_SIMNET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mbgp/errors.hpp"
#include "mbgp/json_io.hpp"
#include "mbgp/lgparse.hpp"
#include "mbgp/model.hpp"

namespace mbgp {

// One BGP route as seen by the simulated nearside router.
struct SimRoute {
    IpPrefix prefix;
    std::int64_t local_pref = 100;
    std::vector<Asn> as_path;
    Origin origin = Origin::Igp;
    std::int64_t med = 0;
    LearnedFrom learned_from = LearnedFrom::Ebgp;
    std::int64_t igp_metric = 0;
    Asn neighbor_asn = 0;
    IpAddress neighbor_ip;
    std::uint32_t router_id = 0;
    int received_order = 0;  // age proxy, lower is older

    auto operator<=>(const SimRoute&) const = default;
};

inline void validate(const SimRoute& r) {
    if (r.as_path.empty()) throw ValidationError("simulated route needs a non-empty AS path");
}

// Ranking: highest local_pref, shortest path, lowest origin, lowest MED among
// routes from the same neighbor AS, eBGP over iBGP, lowest IGP metric. With
// multipath enabled every survivor sharing the winner's neighbor AS is
// installed; otherwise the oldest route (lowest router ID on ties) wins alone.
inline std::vector<SimRoute> decide(std::vector<SimRoute> routes, bool multipath_enabled) {
    if (routes.empty()) throw EmptyInput("no routes to decide between");
    for (const auto& r : routes) validate(r);

    auto keep_min = [&routes](auto key) {
        auto best = key(routes[0]);
        for (const auto& r : routes) best = std::min(best, key(r));
        std::erase_if(routes, [&](const SimRoute& r) { return key(r) != best; });
    };

    keep_min([](const SimRoute& r) { return -r.local_pref; });
    keep_min([](const SimRoute& r) { return r.as_path.size(); });
    keep_min([](const SimRoute& r) { return r.origin; });

    std::map<Asn, std::int64_t> group_min_med;
    for (const auto& r : routes) {
        auto [it, fresh] = group_min_med.emplace(r.neighbor_asn, r.med);
        if (!fresh) it->second = std::min(it->second, r.med);
    }
    std::erase_if(routes,
                  [&](const SimRoute& r) { return r.med != group_min_med.at(r.neighbor_asn); });

    keep_min([](const SimRoute& r) { return r.learned_from; });
    keep_min([](const SimRoute& r) { return r.igp_metric; });

    auto age_rank = [](const SimRoute& r) {
        return std::tuple(r.received_order, r.router_id, r.neighbor_ip);
    };
    const SimRoute winner = *std::min_element(
        routes.begin(), routes.end(),
        [&](const SimRoute& a, const SimRoute& b) { return age_rank(a) < age_rank(b); });

    std::vector<SimRoute> installed;
    if (multipath_enabled) {
        for (const auto& r : routes)
            if (r.neighbor_asn == winner.neighbor_asn) installed.push_back(r);
        if (installed.size() < 2) installed = {winner};
    } else {
        installed = {winner};
    }
    std::sort(installed.begin(), installed.end(), [](const SimRoute& a, const SimRoute& b) {
        return std::tie(a.neighbor_ip, a.router_id) < std::tie(b.neighbor_ip, b.router_id);
    });
    return installed;
}

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Published load-sharing hash: splitmix64 folded over the address bytes,
// with distinct initial states per family.
inline std::uint64_t ip_hash64(const IpAddress& ip) {
    std::uint64_t h = ip.family == AddressFamily::V4 ? 0x4d424750'00000004ull
                                                     : 0x4d424750'00000006ull;
    for (int i = 0; i < ip.byte_count(); ++i)
        h = mix64(h ^ ip.bytes[static_cast<std::size_t>(i)]);
    return h;
}

inline std::size_t assign_link(const IpAddress& ip, std::size_t link_count) {
    if (link_count == 0) throw EmptyInput("no links to share over");
    return static_cast<std::size_t>(ip_hash64(ip) % link_count);
}

inline std::size_t assign_link(const IpAddress& ip, const std::vector<SimRoute>& installed) {
    if (installed.empty()) throw EmptyInput("no installed routes");
    return assign_link(ip, installed.size());
}

struct LinkSpec {
    double base_ms = 20.0;
    double jitter_ms = 0.0;
    int farside_hops = 0;  // intra-AS hops between border router and destination
    bool crosses_ixp = false;

    auto operator<=>(const LinkSpec&) const = default;
};

enum class SimEventKind { Surge, Shift };

inline std::string to_string(SimEventKind k) {
    return k == SimEventKind::Surge ? "SURGE" : "SHIFT";
}

struct SimEvent {
    int link = 0;  // 0-based index into the scenario's links
    SimEventKind kind = SimEventKind::Surge;
    int start_round = 0;
    int end_round = 0;
    double delta_ms = 0.0;
    double affected_ip_fraction = 1.0;  // of the scenario's whole IP population

    auto operator<=>(const SimEvent&) const = default;
};

struct SimScenario {
    Asn nearside_asn = 0;
    Asn farside_asn = 0;
    std::string nearside_router;
    std::vector<LinkSpec> links;
    IpPrefix destination_prefix;
    int ip_count = 0;
    int rounds = 0;
    int interval_s = 900;
    std::uint64_t seed = 0;
    std::int64_t start_timestamp = 1600000000;
    std::vector<SimEvent> events;

    auto operator<=>(const SimScenario&) const = default;
};

inline void validate(const SimScenario& s) {
    auto fail = [](const std::string& what) { throw InvalidScenario(what); };
    if (s.nearside_asn == 0 || s.farside_asn == 0) fail("both AS numbers must be set");
    if (s.nearside_asn == s.farside_asn) fail("nearside and farside AS must differ");
    if (s.nearside_router.empty()) fail("nearside router name must be set");
    if (s.links.empty()) fail("at least one border link is required");
    if (s.links.size() > 200) fail("at most 200 border links are supported");
    for (const auto& l : s.links) {
        if (!(l.base_ms >= 0) || !std::isfinite(l.base_ms)) fail("link base_ms must be >= 0");
        if (!(l.jitter_ms >= 0) || !std::isfinite(l.jitter_ms)) fail("link jitter_ms must be >= 0");
        if (l.farside_hops < 0 || l.farside_hops > 50) fail("farside_hops must be in [0, 50]");
    }
    if (s.ip_count < 1) fail("ip_count must be >= 1");
    if (static_cast<std::uint64_t>(s.ip_count) >
        s.destination_prefix.usable_hosts(std::uint64_t(1) << 32))
        fail("ip_count exceeds the destination prefix's usable hosts");
    if (s.rounds < 1) fail("rounds must be >= 1");
    if (s.interval_s < 1) fail("interval_s must be >= 1");
    for (const auto& e : s.events) {
        if (e.link < 0 || static_cast<std::size_t>(e.link) >= s.links.size())
            fail("event targets a link outside the scenario");
        if (e.start_round < 0 || e.start_round > e.end_round || e.end_round >= s.rounds)
            fail("event rounds must satisfy 0 <= start <= end < rounds");
        if (!(e.affected_ip_fraction > 0) || !(e.affected_ip_fraction <= 1))
            fail("affected_ip_fraction must be in (0, 1]");
        if (!std::isfinite(e.delta_ms)) fail("event delta_ms must be finite");
    }
    const bool v6 = s.destination_prefix.address.family == AddressFamily::V6;
    IpPrefix near_space = IpPrefix::parse(v6 ? "2001:db8:18::/48" : "198.18.0.0/16");
    if (near_space.contains(s.destination_prefix.address))
        fail("destination prefix collides with simulated nearside address space");
}

// Fixed infrastructure addressing of the simulated topology. Link indices
// select the last byte group; the destination prefix is the scenario's own.
struct SimTopology {
    bool v6 = false;

    explicit SimTopology(const SimScenario& s)
        : v6(s.destination_prefix.address.family == AddressFamily::V6) {}

    IpAddress at(const std::string& v4, const std::string& v6_addr) const {
        return IpAddress::parse(v6 ? v6_addr : v4);
    }
    IpAddress source() const { return at("198.18.0.100", "2001:db8:18::100"); }
    IpAddress core() const { return at("198.18.0.1", "2001:db8:18::1"); }
    IpAddress egress(int link) const {
        auto n = std::to_string(10 + link);
        return at("198.18.1." + n, "2001:db8:18:1::" + n);
    }
    IpAddress ixp(int link) const {
        auto n = std::to_string(10 + link);
        return at("198.18.8." + n, "2001:db8:18:8::" + n);
    }
    IpAddress farside(int link) const {
        auto n = std::to_string(10 + link);
        return at("198.19.0." + n, "2001:db8:19::" + n);
    }
    IpAddress farside_hop(int link, int hop) const {
        auto n = std::to_string(10 + link);
        auto h = std::to_string(hop);
        return at("198.19." + h + "." + n, "2001:db8:19:" + h + "::" + n);
    }
    IpPrefix near_prefix() const {
        return IpPrefix::parse(v6 ? "2001:db8:18::/48" : "198.18.0.0/16");
    }
    IpPrefix far_prefix() const {
        return IpPrefix::parse(v6 ? "2001:db8:19::/48" : "198.19.0.0/16");
    }
    IpPrefix ixp_prefix() const {
        return IpPrefix::parse(v6 ? "2001:db8:18:8::/64" : "198.18.8.0/24");
    }
};

struct GroundTruth {
    MBGPCase case_tuple;
    std::vector<BorderLink> links;
    std::map<IpAddress, int> link_by_ip;
    std::vector<SimEvent> events;
    std::vector<std::vector<IpAddress>> affected_by_event;
    std::int64_t start_timestamp = 0;
    int interval_s = 0;
    int rounds = 0;
};

struct SimOutput {
    std::vector<TraceroutePath> paths;
    GroundTruth truth;
};

// Deterministic per-hop noise: uniform in [-amplitude, +amplitude], derived
// by hashing (seed, address, round, hop) so no call-order dependence exists.
inline double hop_jitter(std::uint64_t seed, const IpAddress& ip, int round, int hop,
                         double amplitude) {
    if (amplitude == 0.0) return 0.0;
    std::uint64_t h = mix64(seed ^ ip_hash64(ip));
    h = mix64(h ^ static_cast<std::uint64_t>(round));
    h = mix64(h ^ static_cast<std::uint64_t>(hop));
    double unit = static_cast<double>(h >> 11) * 0x1.0p-53;
    return (2.0 * unit - 1.0) * amplitude;
}

inline std::vector<IpAddress> scenario_targets(const SimScenario& s) {
    std::vector<IpAddress> ips;
    ips.reserve(static_cast<std::size_t>(s.ip_count));
    IpAddress host = s.destination_prefix.first_host();
    for (int i = 0; i < s.ip_count; ++i) {
        ips.push_back(host);
        host = host.plus(1);
    }
    return ips;
}

inline SimOutput generate(const SimScenario& s) {
    validate(s);
    SimTopology topo(s);
    const auto ips = scenario_targets(s);
    const auto k = s.links.size();

    GroundTruth truth;
    truth.start_timestamp = s.start_timestamp;
    truth.interval_s = s.interval_s;
    truth.rounds = s.rounds;
    truth.events = s.events;

    for (std::size_t l = 0; l < k; ++l) {
        BorderLink b;
        b.nearside_ip = topo.egress(static_cast<int>(l));
        b.farside_ip = topo.farside(static_cast<int>(l));
        b.nearside_asn = s.nearside_asn;
        b.farside_asn = s.farside_asn;
        b.crosses_ixp = s.links[l].crosses_ixp;
        truth.links.push_back(b);
    }
    truth.case_tuple.nearside_asn = s.nearside_asn;
    truth.case_tuple.nearside_router = s.nearside_router;
    truth.case_tuple.farside_asn = s.farside_asn;
    truth.case_tuple.destination_prefix = s.destination_prefix;
    truth.case_tuple.border_links = truth.links;
    truth.case_tuple.address_family = s.destination_prefix.address.family;
    validate(truth.case_tuple);

    std::vector<std::vector<IpAddress>> per_link(k);
    for (const auto& ip : ips) {
        auto l = assign_link(ip, k);
        truth.link_by_ip[ip] = static_cast<int>(l);
        per_link[l].push_back(ip);
    }

    std::vector<std::set<IpAddress>> affected_sets;
    for (const auto& e : s.events) {
        auto want = static_cast<std::size_t>(
            std::max<long long>(1, std::llround(e.affected_ip_fraction * s.ip_count)));
        const auto& pool = per_link[static_cast<std::size_t>(e.link)];
        std::set<IpAddress> chosen(pool.begin(),
                                   pool.begin() + static_cast<std::ptrdiff_t>(
                                                      std::min(want, pool.size())));
        truth.affected_by_event.emplace_back(chosen.begin(), chosen.end());
        affected_sets.push_back(std::move(chosen));
    }

    SimOutput out;
    out.paths.reserve(static_cast<std::size_t>(s.rounds) * ips.size());
    for (int round = 0; round < s.rounds; ++round) {
        for (const auto& ip : ips) {
            const auto l = static_cast<std::size_t>(truth.link_by_ip.at(ip));
            const auto& spec = s.links[l];

            double delta = 0.0;
            for (std::size_t ei = 0; ei < s.events.size(); ++ei) {
                const auto& e = s.events[ei];
                if (static_cast<std::size_t>(e.link) == l && round >= e.start_round &&
                    round <= e.end_round && affected_sets[ei].count(ip))
                    delta += e.delta_ms;
            }

            TraceroutePath p;
            p.source_ip = topo.source();
            p.destination_ip = ip;
            p.timestamp = s.start_timestamp +
                          static_cast<std::int64_t>(round) * s.interval_s +
                          static_cast<std::int64_t>(
                              ip_hash64(ip) %
                              std::min<std::uint64_t>(60, static_cast<std::uint64_t>(s.interval_s)));
            p.paris_variation = static_cast<int>(ip_hash64(ip) % 1000);

            int hop = 0;
            auto push = [&](const IpAddress& responder, double base_cum, double extra) {
                Hop h;
                h.index = ++hop;
                double rtt = base_cum + extra +
                             hop_jitter(s.seed, ip, round, hop, spec.jitter_ms);
                if (rtt < 0) rtt = 0;
                h.replies.push_back({responder, rtt});
                h.aggregated_rtt_ms = h.replies[0].rtt_ms;
                p.hops.push_back(h);
            };

            push(topo.core(), 0.5, 0.0);
            push(topo.egress(static_cast<int>(l)), 1.0, 0.0);
            if (spec.crosses_ixp) push(topo.ixp(static_cast<int>(l)), 1.0 + spec.base_ms / 2, delta / 2);
            double cum = 1.0 + spec.base_ms;
            push(topo.farside(static_cast<int>(l)), cum, delta);
            for (int fh = 1; fh <= spec.farside_hops; ++fh) {
                cum += 1.0;
                push(topo.farside_hop(static_cast<int>(l), fh), cum, delta);
            }
            push(ip, cum + 1.0, delta);

            validate(p);
            out.paths.push_back(std::move(p));
        }
    }
    out.truth = std::move(truth);
    return out;
}

// Origin and exchange-point tables matching the simulated topology, in the
// text formats the prefix-table loader reads.
inline std::string emit_origin_lines(const SimScenario& s) {
    SimTopology topo(s);
    std::string out;
    out += topo.near_prefix().str() + "\t" + std::to_string(s.nearside_asn) + "\n";
    out += topo.far_prefix().str() + "\t" + std::to_string(s.farside_asn) + "\n";
    out += s.destination_prefix.str() + "\t" + std::to_string(s.farside_asn) + "\n";
    return out;
}

inline std::string emit_ixp_lines(const SimScenario& s) {
    return SimTopology(s).ixp_prefix().str() + "\n";
}

// LG responses consistent with the scenario: a peering summary naming one
// neighbor per link plus a single-homed transit peer, and a route-detail
// response with one block per link, all flagged multipath with equal
// attributes (plain best-only when the scenario has a single link).
inline std::map<std::string, std::string> emit_lg_fixture(const SimScenario& s) {
    validate(s);
    SimTopology topo(s);
    const auto k = s.links.size();
    const std::string far = std::to_string(s.farside_asn);

    std::string summary;
    summary += s.nearside_router + "> " + std::string(kSummaryCommand) + "\n\n";
    summary += "  BGP4 Summary\n";
    summary += "  Router ID: " + topo.core().str() +
               "   Local AS Number: " + std::to_string(s.nearside_asn) + "\n";
    summary += "  Number of Neighbors Configured: " + std::to_string(k + 1) +
               ", UP: " + std::to_string(k + 1) + "\n";
    summary += "  Neighbor Address  AS#         State   Time          Rt:Accepted Filtered Sent     ToSend\n";
    for (std::size_t l = 0; l < k; ++l)
        summary += "  " + topo.farside(static_cast<int>(l)).str() + "   " + far +
                   "       ESTAB  87d 6h36m48s   " + std::to_string(120 + l) +
                   "           0        1024   0\n";
    summary += "  192.0.2.9   1299        ESTAB  12d 1h 2m39s   80          0        512    0\n";

    std::string detail;
    detail += " BGP routing table information of " + s.destination_prefix.str() + ":\n";
    detail += " Status: B - Best, M - Multipath, E - External, I - Internal\n\n";
    for (std::size_t l = 0; l < k; ++l) {
        std::string flags = k >= 2 ? (l == 0 ? "BME" : "ME") : "BE";
        detail += " " + std::to_string(l + 1) + "  Prefix: " + s.destination_prefix.str() + "\n";
        detail += "    Status: " + flags + "\n";
        detail += "    NEXT_HOP: " + topo.farside(static_cast<int>(l)).str() + "   Metric: 1\n";
        detail += "    LOCAL_PREF: 100   MED: 0   Weight: 0\n";
        detail += "    ORIGIN: igp\n";
        detail += "    AS_PATH: " + far + "\n";
        detail += "    Learned from Peer: " + topo.farside(static_cast<int>(l)).str() + " (" + far +
                  ")\n\n";
    }

    return {{kSummaryCommand, summary},
            {route_detail_command(representative_address(s.destination_prefix)), detail}};
}

inline void to_json(json& j, const LinkSpec& l) {
    j = json{{"base_ms", l.base_ms},
             {"jitter_ms", l.jitter_ms},
             {"farside_hops", l.farside_hops},
             {"crosses_ixp", l.crosses_ixp}};
}

inline void from_json(const json& j, LinkSpec& l) {
    l.base_ms = j.value("base_ms", 20.0);
    l.jitter_ms = j.value("jitter_ms", 0.0);
    l.farside_hops = j.value("farside_hops", 0);
    l.crosses_ixp = j.value("crosses_ixp", false);
}

inline void to_json(json& j, const SimEventKind& k) { j = to_string(k); }

inline void from_json(const json& j, SimEventKind& k) {
    auto s = j.get<std::string>();
    if (s == "SURGE")
        k = SimEventKind::Surge;
    else if (s == "SHIFT")
        k = SimEventKind::Shift;
    else
        throw ParseError("unknown event kind '" + s + "'");
}

inline void to_json(json& j, const SimEvent& e) {
    j = json{{"link", e.link},
             {"kind", e.kind},
             {"start_round", e.start_round},
             {"end_round", e.end_round},
             {"delta_ms", e.delta_ms},
             {"affected_ip_fraction", e.affected_ip_fraction}};
}

inline void from_json(const json& j, SimEvent& e) {
    j.at("link").get_to(e.link);
    j.at("kind").get_to(e.kind);
    j.at("start_round").get_to(e.start_round);
    j.at("end_round").get_to(e.end_round);
    j.at("delta_ms").get_to(e.delta_ms);
    e.affected_ip_fraction = j.value("affected_ip_fraction", 1.0);
}

inline void to_json(json& j, const SimScenario& s) {
    j = json{{"nearside_asn", s.nearside_asn},
             {"farside_asn", s.farside_asn},
             {"nearside_router", s.nearside_router},
             {"links", s.links},
             {"destination_prefix", s.destination_prefix},
             {"ip_count", s.ip_count},
             {"rounds", s.rounds},
             {"interval_s", s.interval_s},
             {"seed", s.seed},
             {"start_timestamp", s.start_timestamp},
             {"events", s.events}};
}

inline void from_json(const json& j, SimScenario& s) {
    j.at("nearside_asn").get_to(s.nearside_asn);
    j.at("farside_asn").get_to(s.farside_asn);
    j.at("nearside_router").get_to(s.nearside_router);
    j.at("links").get_to(s.links);
    j.at("destination_prefix").get_to(s.destination_prefix);
    j.at("ip_count").get_to(s.ip_count);
    j.at("rounds").get_to(s.rounds);
    s.interval_s = j.value("interval_s", 900);
    s.seed = j.value("seed", std::uint64_t{0});
    s.start_timestamp = j.value("start_timestamp", std::int64_t{1600000000});
    if (j.contains("events")) j.at("events").get_to(s.events);
}

inline void to_json(json& j, const GroundTruth& t) {
    j = json{{"case", t.case_tuple},
             {"links", t.links},
             {"link_by_ip", json::object()},
             {"events", t.events},
             {"affected_by_event", t.affected_by_event},
             {"start_timestamp", t.start_timestamp},
             {"interval_s", t.interval_s},
             {"rounds", t.rounds}};
    for (const auto& [ip, link] : t.link_by_ip) j["link_by_ip"][ip.str()] = link;
}

inline void from_json(const json& j, GroundTruth& t) {
    j.at("case").get_to(t.case_tuple);
    j.at("links").get_to(t.links);
    j.at("events").get_to(t.events);
    j.at("affected_by_event").get_to(t.affected_by_event);
    j.at("start_timestamp").get_to(t.start_timestamp);
    j.at("interval_s").get_to(t.interval_s);
    j.at("rounds").get_to(t.rounds);
    t.link_by_ip.clear();
    for (const auto& [key, value] : j.at("link_by_ip").items())
        t.link_by_ip[IpAddress::parse(key)] = value.get<int>();
}

}  // namespace mbgp

#endif
