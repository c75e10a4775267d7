#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mbgp/json_io.hpp"
#include "mbgp/model.hpp"

using namespace mbgp;

namespace {

IpAddress random_address(std::mt19937_64& rng, AddressFamily fam) {
    IpAddress a;
    a.family = fam;
    for (int i = 0; i < a.byte_count(); ++i)
        a.bytes[i] = static_cast<std::uint8_t>(rng());
    return a;
}

MBGPCase random_case(std::mt19937_64& rng) {
    MBGPCase c;
    c.nearside_asn = static_cast<Asn>(rng() % 70000 + 1);
    c.nearside_router = "core" + std::to_string(rng() % 9) + ".r" + std::to_string(rng() % 99) +
                        ".example.net";
    c.farside_asn = c.nearside_asn + 1 + static_cast<Asn>(rng() % 1000);
    bool v6 = rng() % 4 == 0;
    auto fam = v6 ? AddressFamily::V6 : AddressFamily::V4;
    IpPrefix p{random_address(rng, fam), static_cast<int>(rng() % (v6 ? 129 : 33))};
    p.address = p.network();
    c.destination_prefix = p;
    c.address_family = fam;
    return c;
}

}  // namespace

TEST_CASE("case_key formats the deployment tuple") {
    MBGPCase c{6939, "core1.tor1.he.net", 19752, IpPrefix::parse("184.105.237.0/24"), {},
               AddressFamily::V4};
    CHECK(case_key(c) == "6939|core1.tor1.he.net|19752|184.105.237.0/24");
}

TEST_CASE("case_key distinguishes tuples differing in one field") {
    MBGPCase a{6939, "core1.tor1.he.net", 19752, IpPrefix::parse("184.105.237.0/24"), {},
               AddressFamily::V4};
    MBGPCase b = a;
    b.destination_prefix = IpPrefix::parse("184.105.238.0/24");
    CHECK(case_key(a) != case_key(b));
}

TEST_CASE("case_key is deterministic") {
    auto make = [] {
        return MBGPCase{6939, "core1.hkg1.he.net", 10118, IpPrefix::parse("203.0.113.0/24"), {},
                        AddressFamily::V4};
    };
    CHECK(case_key(make()) == case_key(make()));
}

TEST_CASE("case_key injectivity over random tuples") {
    std::mt19937_64 rng(7);
    std::vector<MBGPCase> cases;
    for (int i = 0; i < 300; ++i) cases.push_back(random_case(rng));
    for (std::size_t i = 0; i < cases.size(); ++i)
        for (std::size_t j = i + 1; j < cases.size(); ++j) {
            auto tuple_eq = cases[i].nearside_asn == cases[j].nearside_asn &&
                            cases[i].nearside_router == cases[j].nearside_router &&
                            cases[i].farside_asn == cases[j].farside_asn &&
                            cases[i].destination_prefix == cases[j].destination_prefix;
            CHECK((case_key(cases[i]) == case_key(cases[j])) == tuple_eq);
        }
}

TEST_CASE("MBGPCase validation") {
    MBGPCase c{6939, "r1", 6939, IpPrefix::parse("10.0.0.0/8"), {}, AddressFamily::V4};
    CHECK_THROWS_AS(validate(c), ValidationError);
    c.farside_asn = 10118;
    CHECK_NOTHROW(validate(c));

    BorderLink l{IpAddress::parse("10.0.0.1"), IpAddress::parse("10.0.0.2"), 6939, 20940};
    c.border_links.push_back(l);
    CHECK_THROWS_AS(validate(c), ValidationError);  // farside mismatch
    c.border_links[0].farside_asn = 10118;
    CHECK_NOTHROW(validate(c));
}

TEST_CASE("BorderLink validation") {
    auto a = IpAddress::parse("192.0.2.1");
    auto b = IpAddress::parse("192.0.2.2");
    CHECK_THROWS_AS(validate(BorderLink{a, b, 1, 1}), ValidationError);
    CHECK_THROWS_AS(validate(BorderLink{a, a, 1, 2}), ValidationError);
    CHECK_NOTHROW(validate(BorderLink{a, b, 1, 2}));
}

TEST_CASE("RouteEntry flag and path invariants") {
    RouteEntry r;
    r.prefix = IpPrefix::parse("203.0.113.0/24");
    r.next_hop = IpAddress::parse("192.0.2.1");
    r.status_flags = {'M', 'E'};
    r.as_path = {19752, 6453};
    r.neighbor_asn = 19752;
    CHECK_NOTHROW(validate(r));

    r.status_flags.insert('I');
    CHECK_THROWS_AS(validate(r), ValidationError);
    r.status_flags.erase('I');

    r.neighbor_asn = 6453;
    CHECK_THROWS_AS(validate(r), ValidationError);
}

TEST_CASE("hop index invariant") {
    TraceroutePath p;
    p.source_ip = IpAddress::parse("10.0.0.1");
    p.destination_ip = IpAddress::parse("10.0.0.2");
    p.hops = {Hop{1, {}, {}}, Hop{2, {}, {}}, Hop{3, {}, {}}};
    CHECK_NOTHROW(validate(p));
    p.hops[1].index = 1;
    CHECK_THROWS_AS(validate(p), ValidationError);
    p.hops = {Hop{0, {}, {}}};
    CHECK_THROWS_AS(validate(p), ValidationError);
}

TEST_CASE("IP parsing and prefix arithmetic") {
    auto a = IpAddress::parse("184.105.237.1");
    CHECK(a.str() == "184.105.237.1");
    CHECK_FALSE(IpAddress::try_parse("184.105.237.999"));
    CHECK_FALSE(IpAddress::try_parse("not an ip"));

    auto p = IpPrefix::parse("184.105.237.64/26");
    CHECK(p.network().str() == "184.105.237.64");
    CHECK(p.contains(IpAddress::parse("184.105.237.100")));
    CHECK_FALSE(p.contains(IpAddress::parse("184.105.237.128")));
    CHECK_FALSE(IpPrefix::try_parse("10.0.0.0/33"));
    CHECK_FALSE(IpPrefix::try_parse("10.0.0.0"));

    CHECK(IpPrefix::parse("10.1.2.0/24").first_host().str() == "10.1.2.1");
    CHECK(IpPrefix::parse("10.1.2.3/32").first_host().str() == "10.1.2.3");
    CHECK(IpPrefix::parse("10.0.0.0/24").usable_hosts(1000) == 254);
    CHECK(IpPrefix::parse("10.0.0.0/30").usable_hosts(1000) == 2);
    CHECK(IpPrefix::parse("10.0.0.0/32").usable_hosts(1000) == 1);
    CHECK(IpPrefix::parse("10.0.0.0/31").usable_hosts(1000) == 0);
    CHECK(IpPrefix::parse("2001:db8::/64").usable_hosts(1000) == 1000);

    CHECK(IpAddress::parse("10.0.0.255").plus(1).str() == "10.0.1.0");
    CHECK(IpAddress::parse("2001:db8::ffff").plus(2).str() == "2001:db8::1:1");
}

TEST_CASE("IPv6 prefixes parse and match") {
    auto p = IpPrefix::parse("2001:db8:19::/48");
    CHECK(p.contains(IpAddress::parse("2001:db8:19::42")));
    CHECK_FALSE(p.contains(IpAddress::parse("2001:db8:20::42")));
    CHECK_FALSE(p.contains(IpAddress::parse("10.0.0.1")));
}

TEST_CASE("persistence round trip over random model values") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        auto c = random_case(rng);
        BorderLink l{random_address(rng, c.address_family), random_address(rng, c.address_family),
                     c.nearside_asn, c.farside_asn, rng() % 2 == 0,
                     rng() % 3 == 0 ? std::optional<std::uint64_t>(rng() % 1000000)
                                    : std::nullopt};
        c.border_links.push_back(l);

        json j = c;
        CHECK(j.get<MBGPCase>() == c);

        RouteEntry r;
        r.prefix = c.destination_prefix;
        r.status_flags = {'M', 'E'};
        if (rng() % 2) r.status_flags.insert('B');
        r.next_hop = random_address(rng, c.address_family);
        r.local_pref = rng() % 400;
        if (rng() % 4 == 0) r.local_pref = std::nullopt;
        r.weight = rng() % 100;
        r.as_path = {c.farside_asn, static_cast<Asn>(rng() % 65536)};
        r.neighbor_asn = c.farside_asn;
        r.origin = static_cast<Origin>(rng() % 3);
        r.med = static_cast<std::int64_t>(rng() % 1000);
        r.igp_metric = static_cast<std::int64_t>(rng() % 50);
        r.learned_from = rng() % 2 ? LearnedFrom::Ebgp : LearnedFrom::Ibgp;
        json jr = r;
        CHECK(jr.get<RouteEntry>() == r);

        DelaySample s{case_key(c), l, random_address(rng, c.address_family),
                      static_cast<int>(rng() % 96),
                      std::generate_canonical<double, 53>(rng) * 200.0 - 5.0};
        json js = s;
        CHECK(js.get<DelaySample>() == s);
    }
}

TEST_CASE("traceroute path round trip") {
    TraceroutePath p;
    p.source_ip = IpAddress::parse("198.18.0.100");
    p.destination_ip = IpAddress::parse("203.0.113.7");
    p.timestamp = 1600000900;
    p.paris_variation = 16;
    Hop h1{1, {{IpAddress::parse("198.18.0.1"), 1.25}}, 1.25};
    Hop h2{2, {}, std::nullopt};  // unresponsive
    Hop h3{3,
           {{IpAddress::parse("198.19.0.10"), 20.5}, {std::nullopt, std::nullopt}},
           20.5};
    p.hops = {h1, h2, h3};
    json j = p;
    CHECK(j.get<TraceroutePath>() == p);
}

TEST_CASE("percentile band round trip and ordering invariant") {
    PercentileBand b{12, 17.5, 25.0, 32.5, 4};
    json j = b;
    CHECK(j.get<PercentileBand>() == b);
    CHECK_NOTHROW(validate(b));
    b.p75 = 1.0;
    CHECK_THROWS_AS(validate(b), ValidationError);
    PercentileBand empty{3, std::nullopt, std::nullopt, std::nullopt, 0};
    CHECK_NOTHROW(validate(empty));
    json je = empty;
    CHECK(je.get<PercentileBand>() == empty);
}
