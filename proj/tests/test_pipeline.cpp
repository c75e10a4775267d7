#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "mbgp/pipeline.hpp"

using namespace mbgp;

namespace {

SimScenario base_scenario() {
    SimScenario s;
    s.nearside_asn = 64500;
    s.farside_asn = 64511;
    s.nearside_router = "sim.rtr1";
    s.links = {{20.0, 0.0, 1, false}, {20.0, 0.0, 1, false}};
    s.destination_prefix = IpPrefix::parse("198.19.6.0/24");
    s.ip_count = 100;
    s.rounds = 96;
    s.interval_s = 900;
    s.seed = 1;
    return s;
}

SimScenario surge_scenario() {
    auto s = base_scenario();
    s.links = {{20.0, 0.5, 1, false}, {20.0, 0.5, 1, false}};
    s.events = {{0, SimEventKind::Surge, 12, 12, 80.0, 0.23}};
    return s;
}

PrefixTable scenario_table(const SimScenario& s, Diagnostics& diag) {
    return build_prefix_table(parse_origin_lines(emit_origin_lines(s), diag),
                              parse_prefix_lines(emit_ixp_lines(s)), diag);
}

std::vector<json> result_docs(const SimOutput& out) {
    std::vector<json> docs;
    for (const auto& p : out.paths) docs.push_back(json(p));
    return docs;
}

MBGPCase scenario_case(const SimScenario& s) {
    MBGPCase c;
    c.nearside_asn = s.nearside_asn;
    c.nearside_router = s.nearside_router;
    c.farside_asn = s.farside_asn;
    c.destination_prefix = s.destination_prefix;
    c.address_family = s.destination_prefix.address.family;
    return c;
}

std::vector<std::string> lines_of(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    REQUIRE(in.is_open());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

}  // namespace

TEST_CASE("in-memory fixture queries miss with a transport error") {
    auto query = fixture_query({{"show ip bgp summary", "banner\nrows\n"}});
    CHECK(query("show ip bgp summary") == "banner\nrows\n");
    CHECK_THROWS_AS(query("show ip bgp neighbors"), TransportError);
}

TEST_CASE("router inference recovers the scenario deployment from its fixtures") {
    auto s = surge_scenario();
    auto query = fixture_query(emit_lg_fixture(s));
    std::map<Asn, std::vector<IpPrefix>> prefixes{{s.farside_asn, {s.destination_prefix}}};

    Diagnostics diag;
    auto inference = infer_router(s.nearside_router, query, prefixes, diag);

    CHECK(inference.router == "sim.rtr1");
    CHECK(inference.local_asn == 64500);
    CHECK(inference.peer_ases == std::set<Asn>{1299, 64511});
    REQUIRE(inference.cases.size() == 1);
    CHECK(case_key(inference.cases[0]) == "64500|sim.rtr1|64511|198.19.6.0/24");
    CHECK(inference.cases[0] == scenario_case(s));
}

TEST_CASE("census over three simulated routers matches their ground truth") {
    std::vector<SimScenario> scenarios;
    for (int i = 0; i < 3; ++i) {
        auto s = base_scenario();
        s.nearside_asn = 64500 + 10 * static_cast<Asn>(i);
        s.farside_asn = 64511 + 10 * static_cast<Asn>(i);
        s.nearside_router = "sim.rtr" + std::to_string(i + 1);
        s.destination_prefix = IpPrefix::parse("198.19." + std::to_string(6 + i) + ".0/24");
        s.ip_count = 10;
        s.rounds = 16;
        scenarios.push_back(s);
    }

    std::vector<RouterInference> inferences;
    Diagnostics diag;
    for (const auto& s : scenarios) {
        auto query = fixture_query(emit_lg_fixture(s));
        std::map<Asn, std::vector<IpPrefix>> prefixes{{s.farside_asn, {s.destination_prefix}}};
        inferences.push_back(infer_router(s.nearside_router, query, prefixes, diag));
    }

    auto rows = census(inferences);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(rows[i].nearside_asn == scenarios[i].nearside_asn);
        CHECK(rows[i].case_count == 1);
        CHECK(rows[i].peer_ases_mbgp == 1);
        CHECK(rows[i].peer_ases_total == 2);
        CHECK(rows[i].routers_mbgp == 1);
        CHECK(rows[i].routers_total == 1);
    }
}

TEST_CASE("census aggregates routers of the same AS and counts non-deployments") {
    RouterInference a;
    a.router = "r1";
    a.local_asn = 6939;
    a.peer_ases = {100, 200, 300};
    a.cases.push_back(scenario_case(base_scenario()));
    a.cases[0].nearside_asn = 6939;
    a.cases[0].farside_asn = 200;

    RouterInference b;
    b.router = "r2";
    b.local_asn = 6939;
    b.peer_ases = {200, 400};

    auto rows = census({a, b});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].nearside_asn == 6939);
    CHECK(rows[0].case_count == 1);
    CHECK(rows[0].peer_ases_mbgp == 1);
    CHECK(rows[0].peer_ases_total == 4);
    CHECK(rows[0].routers_mbgp == 1);
    CHECK(rows[0].routers_total == 2);

    CHECK(census({}).empty());
}

TEST_CASE("census table prints the reference row shape") {
    CHECK(format_thousands(0) == "0");
    CHECK(format_thousands(999) == "999");
    CHECK(format_thousands(1088) == "1,088");
    CHECK(format_thousands(5868) == "5,868");
    CHECK(format_thousands(1000000) == "1,000,000");

    auto table = census_table({{6939, 1088, 611, 5868, 69, 112}});
    std::istringstream in(table);
    std::string header, row;
    REQUIRE(std::getline(in, header));
    REQUIRE(std::getline(in, row));
    CHECK(row == "6939 | 1,088 | 611/5,868 | 69/112");

    CHECK(census_table({}) ==
          "AS | cases | peering ASes with M-BGP/total | border routers with M-BGP/total\n");
}

TEST_CASE("round recovery is exact under sub-half-interval jitter") {
    const std::int64_t start = 1600000000;
    for (int interval : {120, 900, 3600}) {
        for (int r : {0, 1, 7, 95}) {
            for (int j : {0, 17, 59}) {
                for (int j0 : {0, 3, 59}) {
                    std::int64_t anchor = start + j0;
                    std::int64_t ts = start + static_cast<std::int64_t>(r) * interval + j;
                    CHECK(recover_round(ts, anchor, interval) == r);
                }
            }
        }
    }
}

TEST_CASE("analysis recovers the simulated ground truth end to end") {
    auto s = surge_scenario();
    auto out = generate(s);

    Diagnostics diag;
    auto table = scenario_table(s, diag);
    auto query = fixture_query(emit_lg_fixture(s));
    std::map<Asn, std::vector<IpPrefix>> prefixes{{s.farside_asn, {s.destination_prefix}}};
    auto inference = infer_router(s.nearside_router, query, prefixes, diag);
    REQUIRE(inference.cases.size() == 1);
    CHECK(case_key(inference.cases[0]) == case_key(out.truth.case_tuple));
    CHECK(inference.cases[0].border_links.empty());

    auto plan = scenario_plan(s, case_key(inference.cases[0]));
    auto analysis =
        analyze_case(inference.cases[0], plan, result_docs(out), table, {}, diag);

    CHECK(analysis.case_id == "64500|sim.rtr1|64511|198.19.6.0/24");
    CHECK(analysis.paths_used == 9600);
    CHECK(analysis.paths_skipped == 0);
    CHECK(analysis.first_timestamp >= s.start_timestamp);
    REQUIRE(analysis.links.size() == 2);

    for (const auto& [ip, index] : out.truth.link_by_ip) {
        auto it = analysis.stability.by_ip.find(ip);
        REQUIRE(it != analysis.stability.by_ip.end());
        REQUIRE(it->second.links.size() == 1);
        CHECK(it->second.links[0] == out.truth.links[static_cast<std::size_t>(index)]);
    }
    CHECK(analysis.stability.stable_count == 100);
    CHECK(analysis.stability.unstable_count == 0);

    REQUIRE(analysis.links[0].link == out.truth.links[0]);
    REQUIRE(analysis.links[1].link == out.truth.links[1]);
    REQUIRE(analysis.links[0].events.size() == 1);
    const auto& e = analysis.links[0].events[0];
    CHECK(e.kind == ChangeKind::Spike);
    CHECK(e.time_point == 12);
    CHECK(e.magnitude_ms > 70.0);
    CHECK(e.affected_ip_count == 23);
    CHECK(analysis.links[1].events.empty());

    REQUIRE(analysis.isolation.entries.size() == 1);
    CHECK(analysis.isolation.entries[0].isolated);
    CHECK(correlation_label(analysis.isolation.entries[0].isolated) == "ISOLATED");

    CHECK(analysis.links[0].negative_fraction == 0.0);
    CHECK(analysis.links[1].negative_fraction == 0.0);
    CHECK(analysis.links[0].sample_count == 44 * 96);
    CHECK(analysis.links[1].sample_count == 56 * 96);

    const auto& bands = analysis.links[0].bands;
    REQUIRE(bands.size() == 96);
    REQUIRE(bands[12].p50.has_value());
    CHECK(*bands[12].p50 > 90.0);
    CHECK(*bands[12].p25 < 25.0);
    REQUIRE(bands[11].p50.has_value());
    CHECK(*bands[11].p50 < 25.0);
}

TEST_CASE("correlated shifts on both links are reported as such") {
    auto s = base_scenario();
    s.links = {{20.0, 0.5, 1, false}, {20.0, 0.5, 1, false}};
    s.events = {{0, SimEventKind::Shift, 57, 95, 12.0, 1.0},
                {1, SimEventKind::Shift, 57, 95, 12.0, 1.0}};
    auto out = generate(s);

    Diagnostics diag;
    auto table = scenario_table(s, diag);
    auto plan = scenario_plan(s, case_key(out.truth.case_tuple));
    auto analysis =
        analyze_case(out.truth.case_tuple, plan, result_docs(out), table, {}, diag);

    REQUIRE(analysis.links.size() == 2);
    for (const auto& link : analysis.links) {
        REQUIRE(link.events.size() == 1);
        CHECK(link.events[0].kind == ChangeKind::LevelShift);
        CHECK(std::abs(link.events[0].time_point - 57) <= 1);
        CHECK(link.events[0].persistent);
    }
    REQUIRE(analysis.isolation.entries.size() == 2);
    for (const auto& entry : analysis.isolation.entries) {
        CHECK_FALSE(entry.isolated);
        CHECK(correlation_label(entry.isolated) == "CORRELATED");
    }
}

TEST_CASE("damaged records are skipped and counted") {
    auto s = base_scenario();
    s.ip_count = 10;
    s.rounds = 16;
    auto out = generate(s);

    Diagnostics diag;
    auto table = scenario_table(s, diag);
    auto docs = result_docs(out);
    docs.push_back(json{{"garbage", 1}});
    auto late = docs[0];
    late["timestamp"] = s.start_timestamp + 1000 * static_cast<std::int64_t>(s.interval_s);
    docs.push_back(late);

    auto plan = scenario_plan(s, case_key(out.truth.case_tuple));
    auto analysis = analyze_case(out.truth.case_tuple, plan, docs, table, {}, diag);

    CHECK(analysis.paths_used == 160);
    CHECK(analysis.paths_skipped == 2);
    CHECK(diag.count("bad_record") == 1);
    CHECK(diag.count("round_out_of_range") == 1);
}

TEST_CASE("analysis rejects unusable input") {
    auto s = base_scenario();
    s.ip_count = 4;
    s.rounds = 16;
    auto out = generate(s);
    Diagnostics diag;
    auto table = scenario_table(s, diag);
    auto plan = scenario_plan(s, case_key(out.truth.case_tuple));

    CHECK_THROWS_AS(
        analyze_case(out.truth.case_tuple, plan, {json{{"bad", 1}}}, table, {}, diag),
        EmptyInput);

    AnalyzeParams params;
    params.bin_width_ms = 0.0;
    CHECK_THROWS_AS(
        analyze_case(out.truth.case_tuple, plan, result_docs(out), table, params, diag),
        ValidationError);
}

TEST_CASE("duplicate documents keep the first sample") {
    auto s = base_scenario();
    s.ip_count = 4;
    s.rounds = 16;
    auto out = generate(s);

    Diagnostics diag;
    auto table = scenario_table(s, diag);
    auto docs = result_docs(out);
    docs.push_back(docs[0]);

    auto plan = scenario_plan(s, case_key(out.truth.case_tuple));
    auto analysis = analyze_case(out.truth.case_tuple, plan, docs, table, {}, diag);

    CHECK(diag.count("duplicate_sample") == 1);
    std::size_t samples = 0;
    for (const auto& link : analysis.links) samples += link.sample_count;
    CHECK(samples == 64);
}

TEST_CASE("histograms pool every round at the requested width") {
    auto s = surge_scenario();
    auto out = generate(s);

    Diagnostics diag;
    auto table = scenario_table(s, diag);
    auto plan = scenario_plan(s, case_key(out.truth.case_tuple));
    AnalyzeParams params;
    params.bin_width_ms = 60.0;
    auto analysis =
        analyze_case(out.truth.case_tuple, plan, result_docs(out), table, params, diag);

    REQUIRE(analysis.links.size() == 2);
    const auto& hist = analysis.links[0].histogram;
    REQUIRE(hist.size() == 2);
    CHECK(hist[0].first == 0.0);
    CHECK(hist[0].second == 44 * 96 - 23);
    CHECK(hist[1].first == 60.0);
    CHECK(hist[1].second == 23);

    std::size_t mass = 0;
    for (const auto& [edge, n] : analysis.links[1].histogram) mass += n;
    CHECK(mass == analysis.links[1].sample_count);
}

TEST_CASE("stored campaigns analyze identically to in-memory input") {
    auto s = surge_scenario();
    testutil::TempDir tmp;
    CampaignStore store(tmp.path / "store");
    auto run = run_scenario(s, store);

    CHECK(run.case_id == "64500|sim.rtr1|64511|198.19.6.0/24");
    CHECK(run.results == 9600);
    CHECK(run.links == 2);
    for (const char* name : {"plan.json", "case.json", "results.log", "truth.json",
                             "origins.txt", "ixp.txt"})
        CHECK(std::filesystem::exists(run.case_dir / name));
    CHECK(std::filesystem::exists(run.case_dir / kFixtureSubdir / kManifestFile));

    Diagnostics diag;
    auto stored = analyze_stored_case(store, run.case_id, {}, diag);

    auto out = generate(s);
    auto table = scenario_table(s, diag);
    auto plan = scenario_plan(s, run.case_id);
    auto direct = analyze_case(out.truth.case_tuple, plan, result_docs(out), table, {}, diag);

    CHECK(stored.links[0].events == direct.links[0].events);
    CHECK(stored.links[1].events == direct.links[1].events);
    CHECK(stored.links[0].bands == direct.links[0].bands);
    CHECK(stored.stability.stable_count == direct.stability.stable_count);
    CHECK(stored.paths_used == direct.paths_used);

    auto truth = load_truth(store, run.case_id);
    CHECK(json(truth) == json(out.truth));
}

TEST_CASE("rerunning a scenario replaces the stored results") {
    auto s = base_scenario();
    s.ip_count = 5;
    s.rounds = 16;
    testutil::TempDir tmp;
    CampaignStore store(tmp.path / "store");
    auto first = run_scenario(s, store);
    auto second = run_scenario(s, store);
    CHECK(first.case_id == second.case_id);
    CHECK(lines_of(second.case_dir / "results.log").size() == 80);
}

TEST_CASE("missing campaigns are reported") {
    testutil::TempDir tmp;
    CampaignStore store(tmp.path / "store");
    Diagnostics diag;
    CHECK_THROWS_AS(analyze_stored_case(store, "no|such|case|0.0.0.0/0", {}, diag),
                    MissingCampaign);
    CHECK_THROWS_AS(load_truth(store, "no|such|case|0.0.0.0/0"), MissingCampaign);

    auto s = base_scenario();
    s.ip_count = 5;
    s.rounds = 16;
    auto run = run_scenario(s, store);
    std::filesystem::remove(run.case_dir / kOriginsFile);
    CHECK_THROWS_AS(analyze_stored_case(store, run.case_id, {}, diag), MissingCampaign);
}

TEST_CASE("written reports are deterministic and timestamps stay in the header") {
    auto s = surge_scenario();
    s.ip_count = 20;
    s.rounds = 24;
    s.events = {{0, SimEventKind::Surge, 12, 12, 80.0, 0.23}};

    testutil::TempDir tmp;
    CampaignStore store_a(tmp.path / "a");
    CampaignStore store_b(tmp.path / "b");
    auto run_a = run_scenario(s, store_a);
    auto run_b = run_scenario(s, store_b);

    Diagnostics diag;
    auto analysis_a = analyze_stored_case(store_a, run_a.case_id, {}, diag);
    auto analysis_b = analyze_stored_case(store_b, run_b.case_id, {}, diag);

    auto files_a = write_analysis(store_a, analysis_a, true, 1700000000);
    auto files_b = write_analysis(store_b, analysis_b, true, 1800000000);
    REQUIRE(files_a.size() == files_b.size());
    REQUIRE(files_a.size() == 5);

    CHECK(testutil::read_file(files_a[0].string()) ==
          testutil::read_file(files_b[0].string()));

    for (std::size_t i = 1; i < files_a.size(); ++i) {
        auto a = lines_of(files_a[i]);
        auto b = lines_of(files_b[i]);
        REQUIRE(a.size() == b.size());
        CHECK(a[0].starts_with("# generated "));
        CHECK(b[0].starts_with("# generated "));
        CHECK(a[0] != b[0]);
        for (std::size_t line = 1; line < a.size(); ++line) CHECK(a[line] == b[line]);
    }

    auto again = write_analysis(store_a, analysis_a, true, 1700000000);
    for (std::size_t i = 0; i < files_a.size(); ++i)
        CHECK(testutil::read_file(files_a[i].string()) ==
              testutil::read_file(again[i].string()));
}

TEST_CASE("report records carry the analysis sections") {
    auto s = surge_scenario();
    s.ip_count = 20;
    s.rounds = 24;

    testutil::TempDir tmp;
    CampaignStore store(tmp.path / "store");
    auto run = run_scenario(s, store);
    Diagnostics diag;
    auto analysis = analyze_stored_case(store, run.case_id, {}, diag);
    write_analysis(store, analysis, false, 0);

    auto records = read_record_log(store.analysis_dir(run.case_id) / "report.jsonl", diag);
    REQUIRE(records.size() == 3 + 2 * analysis.links.size());

    CHECK(records[0].at("record") == "case");
    CHECK(records[0].at("case_id") == run.case_id);
    CHECK(records[0].at("rounds") == 24);
    CHECK(records[0].at("link_count") == 2);

    CHECK(records[1].at("record") == "link");
    CHECK(records[1].at("index") == 0);
    auto events = records[1].at("events").get<std::vector<ChangeEvent>>();
    CHECK(events == analysis.links[0].events);
    CHECK(records[2].at("record") == "bands");
    CHECK(records[2].at("bands").get<std::vector<PercentileBand>>() ==
          analysis.links[0].bands);

    const auto& stability = records[records.size() - 2];
    CHECK(stability.at("record") == "stability");
    CHECK(stability.at("stable_count") == 20);
    CHECK(stability.at("unstable_count") == 0);

    const auto& isolation = records.back();
    CHECK(isolation.at("record") == "isolation");
    REQUIRE(isolation.at("entries").size() == 1);
    CHECK(isolation.at("entries")[0].at("label") == "ISOLATED");
}

TEST_CASE("band and histogram rows serialize cleanly") {
    std::ostringstream bands;
    PercentileBand full{0, 1.0, 2.5, 3.0, 4};
    PercentileBand empty{1, std::nullopt, std::nullopt, std::nullopt, 0};
    write_band_csv(bands, "2020-01-01T00:00:00Z", {full, empty});
    CHECK(bands.str() ==
          "# generated 2020-01-01T00:00:00Z\n"
          "time_point,p25,p50,p75,sample_count\n"
          "0,1.0,2.5,3.0,4\n"
          "1,,,,0\n");

    std::ostringstream hist;
    write_histogram_csv(hist, "2020-01-01T00:00:00Z", {{-10.0, 2}, {0.0, 5}});
    CHECK(hist.str() ==
          "# generated 2020-01-01T00:00:00Z\n"
          "lower_edge_ms,count\n"
          "-10.0,2\n"
          "0.0,5\n");

    CHECK(iso8601_utc(1600000000) == "2020-09-13T12:26:40Z");
    CHECK(csv_number(20.0) == "20.0");
    CHECK(csv_number(19.975) == "19.975");
}

TEST_CASE("change events round trip through JSON") {
    ChangeEvent e{ChangeKind::LevelShift, 57, 12.5, 88, true};
    json j = e;
    CHECK(j.at("kind") == "LEVEL_SHIFT");
    CHECK(j.get<ChangeEvent>() == e);

    json bad = j;
    bad["kind"] = "WOBBLE";
    CHECK_THROWS_AS(bad.get<ChangeEvent>(), ParseError);
}
