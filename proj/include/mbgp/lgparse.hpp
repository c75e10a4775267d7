#ifndef MBGP_LGPARSE_HPP
#define MBGP_LGPARSE_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "mbgp/diagnostics.hpp"
#include "mbgp/errors.hpp"
#include "mbgp/model.hpp"

namespace mbgp {

struct NeighborEntry {
    IpAddress neighbor_ip;
    Asn remote_asn = 0;
    std::string session_state;

    auto operator<=>(const NeighborEntry&) const = default;
};

enum class VerdictReason {
    MultipathFlags,
    AttributesEqualAndFlagged,
    SinglePath,
    AttributeMismatch,
    NoRoutes
};

inline std::string to_string(VerdictReason r) {
    switch (r) {
        case VerdictReason::MultipathFlags: return "MULTIPATH_FLAGS";
        case VerdictReason::AttributesEqualAndFlagged: return "ATTRIBUTES_EQUAL_AND_FLAGGED";
        case VerdictReason::SinglePath: return "SINGLE_PATH";
        case VerdictReason::AttributeMismatch: return "ATTRIBUTE_MISMATCH";
        default: return "NO_ROUTES";
    }
}

struct MBGPVerdict {
    bool deployed = false;
    std::vector<RouteEntry> tied_paths;
    VerdictReason reason = VerdictReason::NoRoutes;
};

namespace lgdetail {

inline std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    std::istringstream in(text);
    while (std::getline(in, cur)) {
        if (!cur.empty() && cur.back() == '\r') cur.pop_back();
        lines.push_back(cur);
    }
    return lines;
}

inline std::vector<std::string> tokens(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

inline std::optional<std::string> find_field(const std::string& body, const std::regex& re) {
    std::smatch m;
    if (std::regex_search(body, m, re)) return m[1].str();
    return std::nullopt;
}

inline std::optional<std::int64_t> find_int(const std::string& body, const std::regex& re) {
    auto s = find_field(body, re);
    if (!s) return std::nullopt;
    return std::stoll(*s);
}

}  // namespace lgdetail

inline std::optional<Asn> parse_local_asn(const std::string& text) {
    static const std::regex re(R"(Local AS Number\s*:?\s*(\d+))");
    std::smatch m;
    if (std::regex_search(text, m, re)) return static_cast<Asn>(std::stoul(m[1].str()));
    return std::nullopt;
}

// Neighbor table from a summary response. Rows are the lines after the header
// whose first token is an IP address; banners, prompts, and footers never are.
inline std::vector<NeighborEntry> parse_bgp_summary(const std::string& text, Diagnostics& diag) {
    auto lines = lgdetail::split_lines(text);
    std::size_t header = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].find("Neighbor Address") != std::string::npos &&
            lines[i].find("AS#") != std::string::npos) {
            header = i;
            break;
        }
    }
    if (header == lines.size())
        throw MalformedTable("no neighbor table header in summary response");

    std::vector<NeighborEntry> out;
    for (std::size_t i = header + 1; i < lines.size(); ++i) {
        auto tok = lgdetail::tokens(lines[i]);
        if (tok.empty()) continue;
        auto ip = IpAddress::try_parse(tok[0]);
        if (!ip) continue;
        if (tok.size() < 2) {
            diag.warn("row_parse_failed", "neighbor row too short: '" + lines[i] + "'");
            continue;
        }
        Asn asn = 0;
        try {
            std::size_t pos = 0;
            auto v = std::stoul(tok[1], &pos);
            if (pos != tok[1].size()) throw std::invalid_argument(tok[1]);
            asn = static_cast<Asn>(v);
        } catch (const std::exception&) {
            diag.warn("row_parse_failed", "bad AS number in row: '" + lines[i] + "'");
            continue;
        }
        bool dup = std::any_of(out.begin(), out.end(),
                               [&](const NeighborEntry& e) { return e.neighbor_ip == *ip; });
        if (dup) {
            diag.warn("duplicate_neighbor", "duplicate neighbor " + ip->str() + ", keeping first");
            continue;
        }
        out.push_back({*ip, asn, tok.size() > 2 ? tok[2] : ""});
    }
    return out;
}

// Phase 1 filter: ASes reachable via at least two distinct neighbor addresses.
inline std::map<Asn, std::vector<IpAddress>> multipath_candidates(
    const std::vector<NeighborEntry>& entries) {
    std::map<Asn, std::vector<IpAddress>> by_asn;
    for (const auto& e : entries) {
        auto& ips = by_asn[e.remote_asn];
        if (std::find(ips.begin(), ips.end(), e.neighbor_ip) == ips.end())
            ips.push_back(e.neighbor_ip);
    }
    std::map<Asn, std::vector<IpAddress>> out;
    for (auto& [asn, ips] : by_asn)
        if (ips.size() >= 2) out.emplace(asn, std::move(ips));
    return out;
}

inline std::vector<RouteEntry> parse_route_detail(const std::string& text, Diagnostics& diag) {
    static const std::regex re_no_routes(R"(matching display condition\s*:\s*0\b)");
    if (text.find("No matched routes") != std::string::npos ||
        std::regex_search(text, re_no_routes))
        throw NoRoutesFound("response reports no route for the queried address");

    static const std::regex re_block_start(R"(^\s*\d+\s+Prefix:)");
    static const std::regex re_prefix(R"(Prefix:\s*([0-9A-Fa-f:.\/]+))");
    static const std::regex re_status(R"(Status:\s*([A-Za-z]+))");
    static const std::regex re_next_hop(R"(NEXT_HOP:\s*([0-9A-Fa-f:.]+))");
    static const std::regex re_metric(R"(Metric:\s*(-?\d+))");
    static const std::regex re_local_pref(R"(LOCAL_PREF:\s*(-?\d+))");
    static const std::regex re_med(R"(MED:\s*(-?\d+))");
    static const std::regex re_origin(R"(ORIGIN:\s*([A-Za-z]+))");
    static const std::regex re_weight(R"(Weight:\s*(-?\d+))");
    static const std::regex re_as_path(R"(AS_PATH:[ \t]*([0-9][0-9 \t]*)?)");
    static const std::regex re_learned(R"(Learned from Peer:\s*([0-9A-Fa-f:.]+)\s*\((\d+)\))");

    auto lines = lgdetail::split_lines(text);
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (std::regex_search(lines[i], re_block_start)) {
            if (!blocks.empty()) blocks.back().second = i;
            blocks.push_back({i, lines.size()});
        }
    }
    if (blocks.empty()) throw MalformedTable("no route blocks in detail response");

    std::vector<RouteEntry> out;
    for (auto [begin, end] : blocks) {
        std::string body;
        for (std::size_t i = begin; i < end; ++i) {
            body += lines[i];
            body += '\n';
        }

        RouteEntry r;
        auto ptext = lgdetail::find_field(body, re_prefix);
        auto pfx = ptext ? IpPrefix::try_parse(*ptext) : std::nullopt;
        auto nhtext = lgdetail::find_field(body, re_next_hop);
        auto nh = nhtext ? IpAddress::try_parse(*nhtext) : std::nullopt;
        if (!pfx || !nh) {
            diag.warn("block_parse_failed",
                      "route block at line " + std::to_string(begin + 1) +
                          " lacks a parseable prefix or next hop");
            continue;
        }
        r.prefix = *pfx;
        r.next_hop = *nh;
        std::string where = " in route block for " + r.prefix.str();

        if (auto st = lgdetail::find_field(body, re_status))
            r.status_flags = std::set<char>(st->begin(), st->end());
        else
            diag.warn("missing_attribute", "no status flags" + where);

        r.local_pref = lgdetail::find_int(body, re_local_pref);
        if (!r.local_pref) diag.warn("missing_attribute", "LOCAL_PREF absent" + where);
        r.weight = lgdetail::find_int(body, re_weight);
        if (!r.weight) diag.warn("missing_attribute", "Weight absent" + where);
        r.med = lgdetail::find_int(body, re_med);
        if (!r.med) diag.warn("missing_attribute", "MED absent" + where);
        r.igp_metric = lgdetail::find_int(body, re_metric);
        if (!r.igp_metric) diag.warn("missing_attribute", "Metric absent" + where);

        if (auto o = lgdetail::find_field(body, re_origin)) {
            std::string lower;
            for (char c : *o) lower.push_back(static_cast<char>(std::tolower(c)));
            if (lower == "igp")
                r.origin = Origin::Igp;
            else if (lower == "egp")
                r.origin = Origin::Egp;
            else if (lower == "incomplete")
                r.origin = Origin::Incomplete;
            else
                diag.warn("missing_attribute", "unknown ORIGIN '" + *o + "'" + where);
        } else {
            diag.warn("missing_attribute", "ORIGIN absent" + where);
        }

        if (r.has_flag('E'))
            r.learned_from = LearnedFrom::Ebgp;
        else if (r.has_flag('I'))
            r.learned_from = LearnedFrom::Ibgp;
        else
            diag.warn("missing_attribute", "neither E nor I status flag" + where);

        if (auto p = lgdetail::find_field(body, re_as_path)) {
            for (const auto& t : lgdetail::tokens(*p))
                r.as_path.push_back(static_cast<Asn>(std::stoul(t)));
        } else {
            diag.warn("missing_attribute", "AS_PATH absent" + where);
        }

        std::smatch lm;
        std::optional<Asn> learned_peer_asn;
        if (std::regex_search(body, lm, re_learned))
            learned_peer_asn = static_cast<Asn>(std::stoul(lm[2].str()));
        if (!r.as_path.empty()) {
            r.neighbor_asn = r.as_path.front();
            if (learned_peer_asn && *learned_peer_asn != r.neighbor_asn)
                diag.warn("neighbor_conflict",
                          "peer AS" + std::to_string(*learned_peer_asn) +
                              " differs from first path AS" + std::to_string(r.neighbor_asn) +
                              where);
        } else if (learned_peer_asn) {
            r.neighbor_asn = *learned_peer_asn;
        } else {
            diag.warn("missing_attribute", "no neighbor AS derivable" + where);
        }

        out.push_back(std::move(r));
    }
    return out;
}

// Deployment verdict over the route blocks returned for one address. Tied
// paths must carry both M and E flags and agree on every compared attribute;
// Weight participates unless strict_six is set.
inline MBGPVerdict detect_mbgp(const std::vector<RouteEntry>& routes, bool strict_six = false) {
    if (routes.empty()) return {false, {}, VerdictReason::NoRoutes};

    std::vector<RouteEntry> flagged;
    for (const auto& r : routes)
        if (r.has_flag('M') && r.has_flag('E')) flagged.push_back(r);
    if (flagged.size() < 2) return {false, {}, VerdictReason::SinglePath};

    using Key = std::tuple<std::optional<std::int64_t>, std::optional<std::int64_t>,
                           std::vector<Asn>, std::optional<int>, std::optional<std::int64_t>,
                           std::optional<int>, std::optional<std::int64_t>, Asn>;
    auto key_of = [&](const RouteEntry& r) -> Key {
        return {r.local_pref,
                strict_six ? std::optional<std::int64_t>{} : r.weight,
                r.as_path,
                r.origin ? std::optional<int>(static_cast<int>(*r.origin)) : std::nullopt,
                r.med,
                r.learned_from ? std::optional<int>(static_cast<int>(*r.learned_from))
                               : std::nullopt,
                r.igp_metric,
                r.neighbor_asn};
    };

    std::map<Key, std::vector<RouteEntry>> groups;
    for (const auto& r : flagged) groups[key_of(r)].push_back(r);
    const std::vector<RouteEntry>* best = nullptr;
    for (const auto& [key, group] : groups)
        if (!best || group.size() > best->size()) best = &group;
    if (best->size() < 2) return {false, {}, VerdictReason::AttributeMismatch};

    bool complete = true;
    for (const auto& r : *best) {
        if (!r.local_pref || !r.origin || !r.med || !r.learned_from || !r.igp_metric ||
            r.as_path.empty())
            complete = false;
        if (!strict_six && !r.weight) complete = false;
    }

    MBGPVerdict v{true, *best,
                  complete ? VerdictReason::AttributesEqualAndFlagged
                           : VerdictReason::MultipathFlags};
    std::sort(v.tied_paths.begin(), v.tied_paths.end(),
              [](const RouteEntry& a, const RouteEntry& b) { return a.next_hop < b.next_hop; });
    return v;
}

using QueryFn = std::function<std::string(const std::string&)>;

struct InferOptions {
    bool strict_six = false;
};

inline constexpr const char* kSummaryCommand = "show ip bgp summary";

inline std::string route_detail_command(const IpAddress& addr) {
    return addr.family == AddressFamily::V6 ? "show ipv6 bgp routes detail " + addr.str()
                                            : "show ip bgp routes detail " + addr.str();
}

// Two-phase inference for one router. Phase 1 finds candidate peering ASes
// from the summary; phase 2 walks each candidate's origin prefixes in the
// given order and stops at the first deployed verdict for that AS.
inline std::vector<MBGPCase> infer_cases(const std::string& router, const QueryFn& query,
                                         const std::map<Asn, std::vector<IpPrefix>>& peer_prefixes,
                                         Diagnostics& diag, const InferOptions& opt = {}) {
    std::string summary = query(kSummaryCommand);
    auto entries = parse_bgp_summary(summary, diag);
    auto local = parse_local_asn(summary);
    if (!local)
        diag.warn("missing_local_asn", "summary for " + router + " does not state the local AS");
    auto candidates = multipath_candidates(entries);

    std::vector<MBGPCase> cases;
    for (const auto& [asn, ips] : candidates) {
        if (local && asn == *local) {
            diag.info("ibgp_neighbors", "AS" + std::to_string(asn) + " is the local AS, skipped");
            continue;
        }
        auto pit = peer_prefixes.find(asn);
        if (pit == peer_prefixes.end()) {
            diag.info("no_prefixes", "no origin prefixes known for AS" + std::to_string(asn));
            continue;
        }
        for (const auto& prefix : pit->second) {
            std::string response;
            try {
                response = query(route_detail_command(representative_address(prefix)));
            } catch (const TransportError& e) {
                diag.warn("query_failed",
                          "AS" + std::to_string(asn) + " skipped: " + e.what());
                break;
            }
            std::vector<RouteEntry> routes;
            try {
                routes = parse_route_detail(response, diag);
            } catch (const NoRoutesFound&) {
                diag.info("no_routes", "no route for " + prefix.str());
                continue;
            } catch (const MalformedTable& e) {
                diag.warn("bad_response", prefix.str() + ": " + e.what());
                continue;
            }
            auto verdict = detect_mbgp(routes, opt.strict_six);
            if (!verdict.deployed) continue;

            MBGPCase c;
            c.nearside_asn = local.value_or(0);
            c.nearside_router = router;
            c.farside_asn = verdict.tied_paths.front().neighbor_asn;
            if (c.farside_asn != asn)
                diag.warn("neighbor_conflict",
                          "tied paths for " + prefix.str() + " point at AS" +
                              std::to_string(c.farside_asn) + ", not candidate AS" +
                              std::to_string(asn));
            c.destination_prefix = verdict.tied_paths.front().prefix;
            c.address_family = c.destination_prefix.address.family;
            cases.push_back(std::move(c));
            break;
        }
    }

    std::sort(cases.begin(), cases.end(), [](const MBGPCase& a, const MBGPCase& b) {
        return std::tie(a.farside_asn, a.destination_prefix) <
               std::tie(b.farside_asn, b.destination_prefix);
    });
    cases.erase(std::unique(cases.begin(), cases.end()), cases.end());
    return cases;
}

}  // namespace mbgp

#endif
