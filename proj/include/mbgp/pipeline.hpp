#ifndef MBGP_PIPELINE_HPP
#define MBGP_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mbgp/delaylab.hpp"
#include "mbgp/fixture.hpp"
#include "mbgp/lgparse.hpp"
#include "mbgp/orchestrate.hpp"
#include "mbgp/simnet.hpp"
#include "mbgp/tracemap.hpp"

namespace mbgp {

inline void to_json(json& j, const ChangeKind& k) { j = to_string(k); }

inline void from_json(const json& j, ChangeKind& k) {
    auto s = j.get<std::string>();
    if (s == "LEVEL_SHIFT")
        k = ChangeKind::LevelShift;
    else if (s == "SPIKE")
        k = ChangeKind::Spike;
    else
        throw ParseError("unknown change kind '" + s + "'");
}

inline void to_json(json& j, const ChangeEvent& e) {
    j = json{{"kind", e.kind},
             {"time_point", e.time_point},
             {"magnitude_ms", e.magnitude_ms},
             {"affected_ip_count", e.affected_ip_count},
             {"persistent", e.persistent}};
}

inline void from_json(const json& j, ChangeEvent& e) {
    j.at("kind").get_to(e.kind);
    j.at("time_point").get_to(e.time_point);
    j.at("magnitude_ms").get_to(e.magnitude_ms);
    j.at("affected_ip_count").get_to(e.affected_ip_count);
    j.at("persistent").get_to(e.persistent);
}

inline QueryFn fixture_query(std::map<std::string, std::string> responses) {
    return [responses = std::move(responses)](const std::string& command) -> std::string {
        auto it = responses.find(command);
        if (it == responses.end())
            throw TransportError("no fixture response for '" + command + "'");
        return it->second;
    };
}

struct RouterInference {
    std::string router;
    Asn local_asn = 0;  // 0 when the summary does not state it
    std::set<Asn> peer_ases;
    std::vector<MBGPCase> cases;
};

inline RouterInference infer_router(const std::string& router, const QueryFn& query,
                                    const std::map<Asn, std::vector<IpPrefix>>& peer_prefixes,
                                    Diagnostics& diag, const InferOptions& opt = {}) {
    RouterInference out;
    out.router = router;
    std::string summary = query(kSummaryCommand);
    out.local_asn = parse_local_asn(summary).value_or(0);
    for (const auto& e : parse_bgp_summary(summary, diag))
        if (e.remote_asn != out.local_asn) out.peer_ases.insert(e.remote_asn);
    auto cached = [&summary, &query](const std::string& command) -> std::string {
        return command == kSummaryCommand ? summary : query(command);
    };
    out.cases = infer_cases(router, cached, peer_prefixes, diag, opt);
    return out;
}

struct CensusRow {
    Asn nearside_asn = 0;
    std::size_t case_count = 0;
    std::size_t peer_ases_mbgp = 0;
    std::size_t peer_ases_total = 0;
    std::size_t routers_mbgp = 0;
    std::size_t routers_total = 0;

    auto operator<=>(const CensusRow&) const = default;
};

inline std::vector<CensusRow> census(const std::vector<RouterInference>& routers) {
    struct Agg {
        std::set<Asn> peers, mbgp_peers;
        std::size_t cases = 0, routers = 0, mbgp_routers = 0;
    };
    std::map<Asn, Agg> by_asn;
    for (const auto& r : routers) {
        auto& a = by_asn[r.local_asn];
        ++a.routers;
        a.peers.insert(r.peer_ases.begin(), r.peer_ases.end());
        a.cases += r.cases.size();
        if (!r.cases.empty()) ++a.mbgp_routers;
        for (const auto& c : r.cases) a.mbgp_peers.insert(c.farside_asn);
    }
    std::vector<CensusRow> rows;
    for (const auto& [asn, a] : by_asn)
        rows.push_back(
            {asn, a.cases, a.mbgp_peers.size(), a.peers.size(), a.mbgp_routers, a.routers});
    return rows;
}

inline std::string format_thousands(std::uint64_t n) {
    auto digits = std::to_string(n);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
        out.push_back(digits[i]);
    }
    return out;
}

// AS numbers print plain; the count columns carry thousands separators.
inline std::string census_table(const std::vector<CensusRow>& rows) {
    std::string out =
        "AS | cases | peering ASes with M-BGP/total | border routers with M-BGP/total\n";
    for (const auto& r : rows) {
        out += std::to_string(r.nearside_asn);
        out += " | " + format_thousands(r.case_count);
        out += " | " + format_thousands(r.peer_ases_mbgp) + "/" +
               format_thousands(r.peer_ases_total);
        out += " | " + format_thousands(r.routers_mbgp) + "/" +
               format_thousands(r.routers_total);
        out += "\n";
    }
    return out;
}

// Nearest round on the campaign grid. Anchoring at the earliest observed
// timestamp keeps recovery exact while per-probe start jitter stays under
// half the interval.
inline int recover_round(std::int64_t ts, std::int64_t first_ts, int interval_s) {
    return static_cast<int>(
        std::llround(static_cast<double>(ts - first_ts) / static_cast<double>(interval_s)));
}

struct AnalyzeParams {
    ChangeParams change;
    double bin_width_ms = 10.0;
};

struct LinkReport {
    BorderLink link;
    std::vector<PercentileBand> bands;
    std::vector<ChangeEvent> events;
    std::vector<std::pair<double, std::size_t>> histogram;  // pooled over all rounds
    double negative_fraction = 0.0;
    std::size_t sample_count = 0;
};

struct CaseAnalysis {
    MBGPCase case_tuple;
    std::string case_id;
    int rounds = 0;
    int interval_s = 0;
    std::int64_t first_timestamp = 0;
    std::size_t paths_used = 0;
    std::size_t paths_skipped = 0;
    std::vector<LinkReport> links;  // ordered by link
    StabilityReport stability;
    IsolationReport isolation;
};

inline CaseAnalysis analyze_case(const MBGPCase& c, const ProbePlan& plan,
                                 const std::vector<json>& result_docs, const PrefixTable& table,
                                 const AnalyzeParams& params, Diagnostics& diag) {
    if (params.bin_width_ms <= 0) throw ValidationError("bin width must be positive");
    validate(plan);

    CaseAnalysis out;
    out.case_tuple = c;
    out.case_id = case_key(c);
    out.rounds = plan.rounds;
    out.interval_s = plan.interval_s;

    std::vector<TraceroutePath> paths;
    for (const auto& doc : result_docs) {
        try {
            paths.push_back(ingest(doc, diag));
        } catch (const Error& e) {
            diag.warn("bad_record", e.what());
            ++out.paths_skipped;
        }
    }
    if (paths.empty()) throw EmptyInput("no usable result records");

    out.first_timestamp = paths.front().timestamp;
    for (const auto& p : paths) out.first_timestamp = std::min(out.first_timestamp, p.timestamp);

    std::map<BorderLink, DelaySeries> series;
    std::map<int, std::map<IpAddress, BorderLink>> assignment;
    for (const auto& p : paths) {
        int round = recover_round(p.timestamp, out.first_timestamp, out.interval_s);
        if (round < 0 || round >= out.rounds) {
            diag.warn("round_out_of_range", "timestamp " + std::to_string(p.timestamp) +
                                                " towards " + p.destination_ip.str() +
                                                " maps to round " + std::to_string(round));
            ++out.paths_skipped;
            continue;
        }
        auto ap = annotate(p, table, diag);
        const LinkAt* hit = nullptr;
        bool multiple = false;
        for (const auto& la : ap.border_links) {
            if (la.link.nearside_asn != c.nearside_asn || la.link.farside_asn != c.farside_asn)
                continue;
            if (hit) multiple = true;
            hit = &la;
        }
        if (!hit || multiple) {
            diag.warn(multiple ? "MULTI_BORDER" : "NO_BORDER",
                      "path to " + p.destination_ip.str() +
                          (multiple ? " crosses the AS pair more than once"
                                    : " shows no border link for the case"));
            ++out.paths_skipped;
            continue;
        }
        double delay;
        try {
            delay = link_delay(ap, hit->nearside_hop, diag);
        } catch (const MissingRtt& e) {
            diag.warn("missing_rtt", e.what());
            ++out.paths_skipped;
            continue;
        }
        auto [it, fresh] = series.try_emplace(hit->link, out.case_id, hit->link, out.rounds);
        it->second.add({out.case_id, hit->link, p.destination_ip, round, delay}, diag);
        assignment[round].emplace(p.destination_ip, hit->link);
        ++out.paths_used;
    }

    out.stability = stability_report({assignment.begin(), assignment.end()});

    for (auto& [link, s] : series) {
        LinkReport r;
        r.link = link;
        r.bands = percentile_bands(s);
        r.sample_count = s.sample_count();
        r.negative_fraction = negative_fraction(s);
        try {
            r.events = detect_changes(s, params.change);
        } catch (const InsufficientData& e) {
            diag.warn("insufficient_data",
                      link.nearside_ip.str() + " -> " + link.farside_ip.str() + ": " + e.what());
        }
        std::map<std::int64_t, std::size_t> bins;
        for (const auto& [t, samples] : s.by_round())
            for (const auto& sample : samples)
                ++bins[static_cast<std::int64_t>(
                    std::floor(sample.delay_ms / params.bin_width_ms))];
        for (const auto& [k, n] : bins)
            r.histogram.emplace_back(static_cast<double>(k) * params.bin_width_ms, n);
        out.links.push_back(std::move(r));
    }

    for (std::size_t i = 0; i < out.links.size(); ++i) {
        for (const auto& e : out.links[i].events) {
            bool isolated = true;
            for (std::size_t j = 0; j < out.links.size() && isolated; ++j) {
                if (j == i) continue;
                for (const auto& o : out.links[j].events) {
                    if (std::abs(o.time_point - e.time_point) <= 1) {
                        isolated = false;
                        break;
                    }
                }
            }
            out.isolation.entries.push_back({out.links[i].link, e, isolated});
        }
    }
    return out;
}

inline constexpr const char* kOriginsFile = "origins.txt";
inline constexpr const char* kIxpFile = "ixp.txt";
inline constexpr const char* kTruthFile = "truth.json";
inline constexpr const char* kFixtureSubdir = "fixtures";

inline PrefixTable load_prefix_table(const std::filesystem::path& case_dir, Diagnostics& diag) {
    auto origins = case_dir / kOriginsFile;
    if (!std::filesystem::exists(origins))
        throw MissingCampaign("no origin table at " + origins.string());
    std::vector<IpPrefix> ixp;
    if (std::filesystem::exists(case_dir / kIxpFile))
        ixp = parse_prefix_lines(read_text_file(case_dir / kIxpFile));
    return build_prefix_table(parse_origin_lines(read_text_file(origins), diag), ixp, diag);
}

inline CaseAnalysis analyze_stored_case(const CampaignStore& store, const std::string& case_id,
                                        const AnalyzeParams& params, Diagnostics& diag) {
    auto dir = store.root() / CampaignStore::sanitize(case_id);
    if (!std::filesystem::exists(dir / "case.json") ||
        !std::filesystem::exists(dir / "plan.json"))
        throw MissingCampaign("no campaign for '" + case_id + "' under " + store.root().string());
    auto c = store.load_case(case_id);
    auto plan = store.load_plan(case_id);
    auto results = store.read_results(case_id, diag);
    auto table = load_prefix_table(dir, diag);
    return analyze_case(c, plan, results, table, params, diag);
}

inline std::string iso8601_utc(std::int64_t seconds) {
    std::time_t t = static_cast<std::time_t>(seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string csv_number(double v) { return json(v).dump(); }

inline void write_report(std::ostream& out, const CaseAnalysis& a) {
    append_record(out, json{{"record", "case"},
                            {"case", a.case_tuple},
                            {"case_id", a.case_id},
                            {"rounds", a.rounds},
                            {"interval_s", a.interval_s},
                            {"paths_used", a.paths_used},
                            {"paths_skipped", a.paths_skipped},
                            {"link_count", a.links.size()}});
    for (std::size_t i = 0; i < a.links.size(); ++i) {
        const auto& l = a.links[i];
        json bins = json::array();
        for (const auto& [edge, n] : l.histogram) bins.push_back(json::array({edge, n}));
        append_record(out, json{{"record", "link"},
                                {"index", i},
                                {"link", l.link},
                                {"sample_count", l.sample_count},
                                {"negative_fraction", l.negative_fraction},
                                {"events", l.events},
                                {"histogram", bins}});
        append_record(out, json{{"record", "bands"}, {"index", i}, {"bands", l.bands}});
    }
    json unstable = json::array();
    for (const auto& [ip, entry] : a.stability.by_ip)
        if (!entry.stable) unstable.push_back(ip.str());
    append_record(out, json{{"record", "stability"},
                            {"stable_count", a.stability.stable_count},
                            {"unstable_count", a.stability.unstable_count},
                            {"unstable_ips", unstable}});
    json entries = json::array();
    for (const auto& e : a.isolation.entries)
        entries.push_back(json{{"link", e.link},
                               {"event", e.event},
                               {"label", correlation_label(e.isolated)}});
    append_record(out, json{{"record", "isolation"}, {"entries", entries}});
}

inline void write_band_csv(std::ostream& out, const std::string& stamp,
                           const std::vector<PercentileBand>& bands) {
    out << "# generated " << stamp << "\n";
    out << "time_point,p25,p50,p75,sample_count\n";
    for (const auto& b : bands) {
        out << b.time_point << ',';
        if (b.p25) out << csv_number(*b.p25);
        out << ',';
        if (b.p50) out << csv_number(*b.p50);
        out << ',';
        if (b.p75) out << csv_number(*b.p75);
        out << ',' << b.sample_count << '\n';
    }
}

inline void write_histogram_csv(std::ostream& out, const std::string& stamp,
                                const std::vector<std::pair<double, std::size_t>>& bins) {
    out << "# generated " << stamp << "\n";
    out << "lower_edge_ms,count\n";
    for (const auto& [edge, n] : bins) out << csv_number(edge) << ',' << n << '\n';
}

// report.jsonl is timestamp-free; CSVs carry the generation time in their
// first line only, so byte comparison minus "# generated" lines is stable.
inline std::vector<std::filesystem::path> write_analysis(const CampaignStore& store,
                                                         const CaseAnalysis& a, bool csv,
                                                         std::int64_t generated_at) {
    std::vector<std::filesystem::path> files;
    auto dir = store.analysis_dir(a.case_id);
    {
        auto file = dir / "report.jsonl";
        std::ofstream out(file, std::ios::binary);
        if (!out.is_open()) throw Error("cannot write " + file.string());
        write_report(out, a);
        files.push_back(file);
    }
    if (csv) {
        auto stamp = iso8601_utc(generated_at);
        for (std::size_t i = 0; i < a.links.size(); ++i) {
            auto band_file = dir / ("link" + std::to_string(i) + ".csv");
            std::ofstream bo(band_file, std::ios::binary);
            if (!bo.is_open()) throw Error("cannot write " + band_file.string());
            write_band_csv(bo, stamp, a.links[i].bands);
            files.push_back(band_file);
            auto hist_file = dir / ("link" + std::to_string(i) + "_hist.csv");
            std::ofstream ho(hist_file, std::ios::binary);
            if (!ho.is_open()) throw Error("cannot write " + hist_file.string());
            write_histogram_csv(ho, stamp, a.links[i].histogram);
            files.push_back(hist_file);
        }
    }
    return files;
}

inline ProbePlan scenario_plan(const SimScenario& s, const std::string& case_id) {
    ProbePlan p;
    p.case_id = case_id;
    p.targets = scenario_targets(s);
    p.interval_s = s.interval_s;
    p.rounds = s.rounds;
    return p;
}

struct ScenarioRun {
    std::string case_id;
    std::size_t results = 0;
    std::size_t links = 0;
    std::filesystem::path case_dir;
};

// Generates a scenario and lays it out as a complete stored campaign: plan,
// case, results, ground truth, the prefix tables analysis needs, and an LG
// fixture set for inference round trips. Stale logs are dropped first so a
// rerun replaces rather than appends.
inline ScenarioRun run_scenario(const SimScenario& s, CampaignStore& store) {
    auto out = generate(s);
    auto case_id = case_key(out.truth.case_tuple);
    auto dir = store.case_dir(case_id);
    std::filesystem::remove(dir / "results.log");
    std::filesystem::remove(dir / "gaps.log");

    store.save_case(out.truth.case_tuple);
    store.save_plan(scenario_plan(s, case_id));
    {
        auto results = store.results_writer(case_id);
        for (const auto& p : out.paths) results.append(json(p));
    }
    {
        std::ofstream truth(dir / kTruthFile, std::ios::binary);
        if (!truth.is_open()) throw Error("cannot write " + (dir / kTruthFile).string());
        truth << json(out.truth).dump(2) << '\n';
    }
    {
        std::ofstream origins(dir / kOriginsFile, std::ios::binary);
        origins << emit_origin_lines(s);
        std::ofstream ixp(dir / kIxpFile, std::ios::binary);
        ixp << emit_ixp_lines(s);
    }
    write_fixture_dir(dir / kFixtureSubdir, emit_lg_fixture(s));
    return {case_id, out.paths.size(), s.links.size(), dir};
}

inline GroundTruth load_truth(const CampaignStore& store, const std::string& case_id) {
    auto file = store.root() / CampaignStore::sanitize(case_id) / kTruthFile;
    if (!std::filesystem::exists(file))
        throw MissingCampaign("no ground truth at " + file.string());
    return json::parse(read_text_file(file)).get<GroundTruth>();
}

}  // namespace mbgp

#endif
