#ifndef MBGP_TRACEMAP_HPP
#define MBGP_TRACEMAP_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mbgp/diagnostics.hpp"
#include "mbgp/errors.hpp"
#include "mbgp/json_io.hpp"
#include "mbgp/model.hpp"

namespace mbgp {

enum class HopKind { As, Ixp, Unknown };

// Longest-prefix-match table from announced prefixes to origin ASes, with a
// separate overlay of IXP address space. An address inside any IXP prefix is
// IXP no matter what origin entries cover it. Entries carrying no origin
// (multi-origin prefixes) resolve to Unknown rather than a guess.
class PrefixTable {
public:
    struct Resolution {
        HopKind kind = HopKind::Unknown;
        Asn asn = 0;

        auto operator<=>(const Resolution&) const = default;
    };

    void add(const IpPrefix& p, std::optional<Asn> origin) {
        insert(origin_trie(p.address.family), p, std::move(origin));
    }

    void add_ixp(const IpPrefix& p) { insert(ixp_trie(p.address.family), p, 0); }

    Resolution lookup(const IpAddress& a) const {
        const auto& ixp = a.family == AddressFamily::V4 ? ixp4_ : ixp6_;
        if (any_match(ixp, a)) return {HopKind::Ixp, 0};
        const auto& origins = a.family == AddressFamily::V4 ? v4_ : v6_;
        auto hit = longest_match(origins, a);
        if (hit && *hit) return {HopKind::As, **hit};
        return {HopKind::Unknown, 0};
    }

private:
    struct Node {
        int child[2] = {-1, -1};
        bool terminal = false;
        std::optional<Asn> origin;
    };
    using Trie = std::vector<Node>;

    Trie v4_{1}, v6_{1}, ixp4_{1}, ixp6_{1};

    Trie& origin_trie(AddressFamily f) { return f == AddressFamily::V4 ? v4_ : v6_; }
    Trie& ixp_trie(AddressFamily f) { return f == AddressFamily::V4 ? ixp4_ : ixp6_; }

    static void insert(Trie& t, const IpPrefix& p, std::optional<Asn> origin) {
        auto net = p.network();
        int node = 0;
        for (int i = 0; i < p.length; ++i) {
            int b = net.bit(i);
            if (t[node].child[b] < 0) {
                t[node].child[b] = static_cast<int>(t.size());
                t.push_back({});
            }
            node = t[node].child[b];
        }
        t[node].terminal = true;
        t[node].origin = std::move(origin);
    }

    // Deepest terminal's origin along the address, if any terminal matches.
    static std::optional<std::optional<Asn>> longest_match(const Trie& t, const IpAddress& a) {
        std::optional<std::optional<Asn>> hit;
        int node = 0;
        if (t[0].terminal) hit = t[0].origin;
        for (int i = 0; i < family_bits(a.family); ++i) {
            node = t[node].child[a.bit(i)];
            if (node < 0) break;
            if (t[node].terminal) hit = t[node].origin;
        }
        return hit;
    }

    static bool any_match(const Trie& t, const IpAddress& a) {
        int node = 0;
        if (t[0].terminal) return true;
        for (int i = 0; i < family_bits(a.family); ++i) {
            node = t[node].child[a.bit(i)];
            if (node < 0) return false;
            if (t[node].terminal) return true;
        }
        return false;
    }
};

namespace tracedetail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

}  // namespace tracedetail

// Origin table lines: "prefix<TAB>origin_asn". An origin of "{a,b,...}"
// marks a multi-origin prefix, kept with no usable origin. Blank lines and
// '#' comments are allowed.
inline std::vector<std::pair<IpPrefix, std::optional<Asn>>> parse_origin_lines(
    const std::string& text, Diagnostics& diag) {
    std::vector<std::pair<IpPrefix, std::optional<Asn>>> out;
    int lineno = 0;
    for (const auto& raw : tracedetail::split_lines(text)) {
        ++lineno;
        auto line = tracedetail::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ParseError("origin line " + std::to_string(lineno) + " lacks a tab separator");
        auto prefix = IpPrefix::try_parse(tracedetail::trim(line.substr(0, tab)));
        if (!prefix)
            throw ParseError("bad prefix on origin line " + std::to_string(lineno) + ": '" +
                             line.substr(0, tab) + "'");
        auto origin_text = tracedetail::trim(line.substr(tab + 1));
        if (origin_text.empty())
            throw ParseError("empty origin on line " + std::to_string(lineno));
        if (origin_text.front() == '{') {
            diag.warn("moas_prefix", prefix->str() + " has origin set " + origin_text +
                                         ", resolved as UNKNOWN");
            out.emplace_back(*prefix, std::nullopt);
            continue;
        }
        try {
            std::size_t pos = 0;
            auto v = std::stoul(origin_text, &pos);
            if (pos != origin_text.size()) throw std::invalid_argument(origin_text);
            out.emplace_back(*prefix, static_cast<Asn>(v));
        } catch (const std::exception&) {
            throw ParseError("bad origin AS on line " + std::to_string(lineno) + ": '" +
                             origin_text + "'");
        }
    }
    return out;
}

// IXP list: one prefix per line, same comment rules.
inline std::vector<IpPrefix> parse_prefix_lines(const std::string& text) {
    std::vector<IpPrefix> out;
    int lineno = 0;
    for (const auto& raw : tracedetail::split_lines(text)) {
        ++lineno;
        auto line = tracedetail::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto p = IpPrefix::try_parse(line);
        if (!p) throw ParseError("bad prefix on line " + std::to_string(lineno) + ": '" + line + "'");
        out.push_back(*p);
    }
    return out;
}

inline PrefixTable build_prefix_table(
    const std::vector<std::pair<IpPrefix, std::optional<Asn>>>& records,
    const std::vector<IpPrefix>& ixp, Diagnostics& diag) {
    PrefixTable t;
    std::map<IpPrefix, std::optional<Asn>> seen;
    for (const auto& [prefix, origin] : records) {
        auto it = seen.find(prefix);
        if (it != seen.end() && it->second != origin)
            diag.warn("duplicate_prefix", prefix.str() + " listed twice, keeping the later origin");
        seen[prefix] = origin;
        t.add(prefix, origin);
    }
    for (const auto& p : ixp) t.add_ixp(p);
    return t;
}

// Representative responder of a hop: the address that answered most probes,
// lowest address on a tie. Absent when nothing answered.
inline std::optional<IpAddress> hop_responder(const Hop& h) {
    std::map<IpAddress, int> votes;
    for (const auto& r : h.replies)
        if (r.responder) ++votes[*r.responder];
    std::optional<IpAddress> best;
    int best_votes = 0;
    for (const auto& [ip, n] : votes) {
        if (n > best_votes) {
            best = ip;
            best_votes = n;
        }
    }
    return best;
}

namespace tracedetail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    auto n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline IpAddress require_address(const json& j, const char* primary, const char* alias) {
    const json* field = nullptr;
    if (j.contains(primary)) field = &j.at(primary);
    else if (j.contains(alias)) field = &j.at(alias);
    if (!field || !field->is_string())
        throw SchemaError(primary, "required address field missing or not a string");
    auto a = IpAddress::try_parse(field->get<std::string>());
    if (!a) throw SchemaError(primary, "not an IP address: '" + field->get<std::string>() + "'");
    return *a;
}

}  // namespace tracedetail

// One measurement-platform record to a TraceroutePath. Accepts both the
// documented field names and the measurement platform's own spelling
// (src_addr/dst_addr, per-hop "result" for the reply list). Reply objects
// with neither responder nor RTT are timeout markers and are dropped.
// Duplicate hop numbers (late packets) merge into one hop.
inline TraceroutePath ingest(const json& doc, Diagnostics& diag) {
    if (!doc.is_object()) throw SchemaError("document", "not an object");
    TraceroutePath p;
    p.source_ip = tracedetail::require_address(doc, "src", "src_addr");
    p.destination_ip = tracedetail::require_address(doc, "dst", "dst_addr");

    if (!doc.contains("timestamp") || !doc.at("timestamp").is_number_integer())
        throw SchemaError("timestamp", "missing or not an integer");
    p.timestamp = doc.at("timestamp").get<std::int64_t>();

    if (!doc.contains("paris_id") || !doc.at("paris_id").is_number_integer())
        throw SchemaError("paris_id", "missing or not an integer");
    p.paris_variation = doc.at("paris_id").get<int>();

    if (!doc.contains("result") || !doc.at("result").is_array())
        throw SchemaError("result", "missing or not an array");

    std::map<int, Hop> by_index;
    for (const auto& item : doc.at("result")) {
        if (!item.is_object()) throw SchemaError("result", "hop record is not an object");
        if (!item.contains("hop") || !item.at("hop").is_number_integer())
            throw SchemaError("result.hop", "missing or not an integer");
        int index = item.at("hop").get<int>();
        if (index < 1) throw SchemaError("result.hop", "hop numbers start at 1");

        const json* replies = nullptr;
        if (item.contains("replies")) replies = &item.at("replies");
        else if (item.contains("result")) replies = &item.at("result");
        if (!replies || !replies->is_array())
            throw SchemaError("result.replies", "missing or not an array");

        auto [it, inserted] = by_index.try_emplace(index, Hop{index, {}, {}});
        if (!inserted)
            diag.info("merged_hop", "hop " + std::to_string(index) + " appears twice, merged");

        for (const auto& rj : *replies) {
            if (!rj.is_object()) throw SchemaError("result.replies", "reply is not an object");
            Hop::Reply r;
            if (rj.contains("from") && !rj.at("from").is_null()) {
                if (!rj.at("from").is_string())
                    throw SchemaError("result.replies.from", "not a string");
                auto a = IpAddress::try_parse(rj.at("from").get<std::string>());
                if (!a)
                    throw SchemaError("result.replies.from",
                                      "not an IP address: '" + rj.at("from").get<std::string>() +
                                          "'");
                r.responder = *a;
            }
            if (rj.contains("rtt") && !rj.at("rtt").is_null()) {
                if (!rj.at("rtt").is_number())
                    throw SchemaError("result.replies.rtt", "not a number");
                r.rtt_ms = rj.at("rtt").get<double>();
                if (*r.rtt_ms < 0) throw SchemaError("result.replies.rtt", "negative RTT");
            }
            if (r.responder || r.rtt_ms) it->second.replies.push_back(std::move(r));
        }
    }

    for (auto& [index, hop] : by_index) {
        std::vector<double> rtts;
        for (const auto& r : hop.replies)
            if (r.responder && r.rtt_ms) rtts.push_back(*r.rtt_ms);
        if (!rtts.empty()) hop.aggregated_rtt_ms = tracedetail::median(std::move(rtts));
        p.hops.push_back(std::move(hop));
    }
    validate(p);
    return p;
}

struct LinkAt {
    int nearside_hop = 0;  // traceroute hop numbers, not vector positions
    int farside_hop = 0;
    BorderLink link;

    auto operator<=>(const LinkAt&) const = default;
};

struct AnnotatedPath {
    TraceroutePath path;
    std::vector<PrefixTable::Resolution> hop_asns;  // one per hop
    std::vector<LinkAt> border_links;
};

// Border-link identification over one path. A link needs two consecutively
// numbered responsive hops resolving to different ASes; one IXP hop between
// them is skipped and flagged. Gaps (unresponsive, unknown, or missing hop
// numbers) suppress detection.
inline AnnotatedPath annotate(const TraceroutePath& path, const PrefixTable& table,
                              Diagnostics& diag) {
    AnnotatedPath out;
    out.path = path;

    std::vector<std::optional<IpAddress>> responders;
    for (const auto& h : path.hops) {
        auto r = hop_responder(h);
        responders.push_back(r);
        out.hop_asns.push_back(r ? table.lookup(*r) : PrefixTable::Resolution{});
    }

    auto resolution_at = [&](std::size_t pos, int expected_index)
        -> std::optional<PrefixTable::Resolution> {
        if (pos >= path.hops.size()) return std::nullopt;
        if (path.hops[pos].index != expected_index) return std::nullopt;
        return out.hop_asns[pos];
    };

    for (std::size_t i = 0; i < path.hops.size(); ++i) {
        if (out.hop_asns[i].kind != HopKind::As) continue;
        int index = path.hops[i].index;
        auto next = resolution_at(i + 1, index + 1);
        if (!next || next->kind == HopKind::Unknown) {
            if (i + 1 < path.hops.size())
                diag.warn("SKIPPED_GAP", "gap after hop " + std::to_string(index) +
                                             " suppresses border detection");
            continue;
        }

        if (next->kind == HopKind::As) {
            if (next->asn != out.hop_asns[i].asn)
                out.border_links.push_back(
                    {index, index + 1,
                     BorderLink{*responders[i], *responders[i + 1], out.hop_asns[i].asn,
                                next->asn, false, std::nullopt}});
            continue;
        }

        // next is IXP: evaluate the hop after it instead
        auto after = resolution_at(i + 2, index + 2);
        if (after && after->kind == HopKind::Ixp) {
            diag.warn("ixp_chain", "two IXP hops after hop " + std::to_string(index) +
                                       ", no border link recorded");
            continue;
        }
        if (!after || after->kind != HopKind::As) {
            if (i + 2 < path.hops.size())
                diag.warn("SKIPPED_GAP", "gap after IXP hop " + std::to_string(index + 1) +
                                             " suppresses border detection");
            continue;
        }
        if (after->asn != out.hop_asns[i].asn)
            out.border_links.push_back(
                {index, index + 2,
                 BorderLink{*responders[i], *responders[i + 2], out.hop_asns[i].asn, after->asn,
                            true, std::nullopt}});
    }
    return out;
}

struct PerDestination {
    std::vector<BorderLink> links;  // distinct matching links, sorted
    bool unstable = false;

    auto operator<=>(const PerDestination&) const = default;
};

struct CaseLinkMap {
    std::map<IpAddress, PerDestination> by_ip;
};

// Per-destination border-link assignment for one deployment. Each path
// contributes the unique link matching the case's AS pair; destinations seen
// on more than one distinct link across paths are flagged unstable.
inline CaseLinkMap match_case_links(const std::vector<AnnotatedPath>& annotated,
                                    const MBGPCase& c, Diagnostics& diag) {
    CaseLinkMap out;
    for (const auto& ap : annotated) {
        const auto& dst = ap.path.destination_ip;
        if (!c.destination_prefix.contains(dst)) {
            diag.warn("outside_prefix", dst.str() + " is outside " + c.destination_prefix.str());
            continue;
        }
        std::vector<BorderLink> matches;
        for (const auto& la : ap.border_links)
            if (la.link.nearside_asn == c.nearside_asn && la.link.farside_asn == c.farside_asn)
                matches.push_back(la.link);
        if (matches.empty()) {
            diag.warn("NO_BORDER", "path to " + dst.str() + " shows no border link for the case");
            continue;
        }
        if (matches.size() > 1) {
            diag.warn("MULTI_BORDER", "path to " + dst.str() +
                                          " crosses the AS pair more than once, excluded");
            continue;
        }
        auto& per = out.by_ip[dst];
        auto pos = std::lower_bound(per.links.begin(), per.links.end(), matches[0]);
        if (pos == per.links.end() || *pos != matches[0]) per.links.insert(pos, matches[0]);
        per.unstable = per.links.size() > 1;
    }
    return out;
}

}  // namespace mbgp

#endif
