#ifndef MBGP_JSON_IO_HPP
#define MBGP_JSON_IO_HPP

#include <json.hpp>

#include "mbgp/model.hpp"

// JSON codecs for the persistence encoding. Addresses and prefixes are
// stored in text form; absent optionals are omitted from the object.

namespace mbgp {

using json = nlohmann::json;

namespace detail {
template <typename T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}
template <typename T>
void get_opt(const json& j, const char* key, std::optional<T>& v) {
    if (j.contains(key) && !j.at(key).is_null())
        v = j.at(key).get<T>();
    else
        v = std::nullopt;
}
}  // namespace detail

inline void to_json(json& j, const IpAddress& a) { j = a.str(); }
inline void from_json(const json& j, IpAddress& a) { a = IpAddress::parse(j.get<std::string>()); }

inline void to_json(json& j, const IpPrefix& p) { j = p.str(); }
inline void from_json(const json& j, IpPrefix& p) { p = IpPrefix::parse(j.get<std::string>()); }

inline void to_json(json& j, const BorderLink& l) {
    j = json{{"nearside_ip", l.nearside_ip},
             {"farside_ip", l.farside_ip},
             {"nearside_asn", l.nearside_asn},
             {"farside_asn", l.farside_asn},
             {"crosses_ixp", l.crosses_ixp}};
    detail::put_opt(j, "bandwidth_bps", l.bandwidth_bps);
}

inline void from_json(const json& j, BorderLink& l) {
    j.at("nearside_ip").get_to(l.nearside_ip);
    j.at("farside_ip").get_to(l.farside_ip);
    j.at("nearside_asn").get_to(l.nearside_asn);
    j.at("farside_asn").get_to(l.farside_asn);
    j.at("crosses_ixp").get_to(l.crosses_ixp);
    detail::get_opt(j, "bandwidth_bps", l.bandwidth_bps);
}

inline void to_json(json& j, const MBGPCase& c) {
    j = json{{"nearside_asn", c.nearside_asn},
             {"nearside_router", c.nearside_router},
             {"farside_asn", c.farside_asn},
             {"destination_prefix", c.destination_prefix},
             {"border_links", c.border_links},
             {"address_family", c.address_family == AddressFamily::V4 ? "v4" : "v6"}};
}

inline void from_json(const json& j, MBGPCase& c) {
    j.at("nearside_asn").get_to(c.nearside_asn);
    j.at("nearside_router").get_to(c.nearside_router);
    j.at("farside_asn").get_to(c.farside_asn);
    j.at("destination_prefix").get_to(c.destination_prefix);
    j.at("border_links").get_to(c.border_links);
    c.address_family =
        j.at("address_family").get<std::string>() == "v6" ? AddressFamily::V6 : AddressFamily::V4;
}

inline void to_json(json& j, const Origin& o) { j = to_string(o); }
inline void from_json(const json& j, Origin& o) {
    auto s = j.get<std::string>();
    if (s == "IGP")
        o = Origin::Igp;
    else if (s == "EGP")
        o = Origin::Egp;
    else if (s == "INCOMPLETE")
        o = Origin::Incomplete;
    else
        throw ParseError("unknown origin '" + s + "'");
}

inline void to_json(json& j, const LearnedFrom& l) { j = to_string(l); }
inline void from_json(const json& j, LearnedFrom& l) {
    auto s = j.get<std::string>();
    if (s == "EBGP")
        l = LearnedFrom::Ebgp;
    else if (s == "IBGP")
        l = LearnedFrom::Ibgp;
    else
        throw ParseError("unknown session type '" + s + "'");
}

inline void to_json(json& j, const RouteEntry& r) {
    j = json{{"prefix", r.prefix},
             {"status_flags", std::string(r.status_flags.begin(), r.status_flags.end())},
             {"next_hop", r.next_hop},
             {"as_path", r.as_path},
             {"neighbor_asn", r.neighbor_asn}};
    detail::put_opt(j, "local_pref", r.local_pref);
    detail::put_opt(j, "weight", r.weight);
    detail::put_opt(j, "origin", r.origin);
    detail::put_opt(j, "med", r.med);
    detail::put_opt(j, "igp_metric", r.igp_metric);
    detail::put_opt(j, "learned_from", r.learned_from);
}

inline void from_json(const json& j, RouteEntry& r) {
    j.at("prefix").get_to(r.prefix);
    auto flags = j.at("status_flags").get<std::string>();
    r.status_flags = std::set<char>(flags.begin(), flags.end());
    j.at("next_hop").get_to(r.next_hop);
    j.at("as_path").get_to(r.as_path);
    j.at("neighbor_asn").get_to(r.neighbor_asn);
    detail::get_opt(j, "local_pref", r.local_pref);
    detail::get_opt(j, "weight", r.weight);
    detail::get_opt(j, "origin", r.origin);
    detail::get_opt(j, "med", r.med);
    detail::get_opt(j, "igp_metric", r.igp_metric);
    detail::get_opt(j, "learned_from", r.learned_from);
}

inline void to_json(json& j, const Hop::Reply& r) {
    j = json::object();
    detail::put_opt(j, "from", r.responder);
    detail::put_opt(j, "rtt", r.rtt_ms);
}

inline void from_json(const json& j, Hop::Reply& r) {
    detail::get_opt(j, "from", r.responder);
    detail::get_opt(j, "rtt", r.rtt_ms);
}

inline void to_json(json& j, const Hop& h) {
    j = json{{"hop", h.index}, {"replies", h.replies}};
    detail::put_opt(j, "aggregated_rtt_ms", h.aggregated_rtt_ms);
}

inline void from_json(const json& j, Hop& h) {
    j.at("hop").get_to(h.index);
    j.at("replies").get_to(h.replies);
    detail::get_opt(j, "aggregated_rtt_ms", h.aggregated_rtt_ms);
}

inline void to_json(json& j, const TraceroutePath& p) {
    j = json{{"src", p.source_ip},
             {"dst", p.destination_ip},
             {"timestamp", p.timestamp},
             {"paris_id", p.paris_variation},
             {"result", p.hops}};
}

inline void from_json(const json& j, TraceroutePath& p) {
    j.at("src").get_to(p.source_ip);
    j.at("dst").get_to(p.destination_ip);
    j.at("timestamp").get_to(p.timestamp);
    j.at("paris_id").get_to(p.paris_variation);
    j.at("result").get_to(p.hops);
}

inline void to_json(json& j, const DelaySample& s) {
    j = json{{"case_id", s.case_id},
             {"link", s.link},
             {"destination_ip", s.destination_ip},
             {"time_point", s.time_point},
             {"delay_ms", s.delay_ms}};
}

inline void from_json(const json& j, DelaySample& s) {
    j.at("case_id").get_to(s.case_id);
    j.at("link").get_to(s.link);
    j.at("destination_ip").get_to(s.destination_ip);
    j.at("time_point").get_to(s.time_point);
    j.at("delay_ms").get_to(s.delay_ms);
}

inline void to_json(json& j, const PercentileBand& b) {
    j = json{{"time_point", b.time_point}, {"sample_count", b.sample_count}};
    detail::put_opt(j, "p25", b.p25);
    detail::put_opt(j, "p50", b.p50);
    detail::put_opt(j, "p75", b.p75);
}

inline void from_json(const json& j, PercentileBand& b) {
    j.at("time_point").get_to(b.time_point);
    j.at("sample_count").get_to(b.sample_count);
    detail::get_opt(j, "p25", b.p25);
    detail::get_opt(j, "p50", b.p50);
    detail::get_opt(j, "p75", b.p75);
}

}  // namespace mbgp

#endif
