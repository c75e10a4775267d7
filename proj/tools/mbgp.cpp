#include <CLI11.hpp>

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mbgp/pipeline.hpp"

using namespace mbgp;

namespace {

void print_diagnostics(const Diagnostics& diag, bool verbose) {
    for (const auto& d : diag.items()) {
        if (d.severity == Severity::Info && !verbose) continue;
        std::cerr << (d.severity == Severity::Warning ? "warning: " : "note: ") << d.code
                  << ": " << d.message << "\n";
    }
}

std::map<Asn, std::vector<IpPrefix>> load_peer_prefixes(const std::string& file,
                                                        Diagnostics& diag) {
    std::map<Asn, std::vector<IpPrefix>> out;
    for (const auto& [prefix, asn] : parse_origin_lines(read_text_file(file), diag)) {
        if (!asn) {
            diag.warn("no_origin_asn", prefix.str() + " has no origin AS, skipped");
            continue;
        }
        out[*asn].push_back(prefix);
    }
    return out;
}

QueryFn live_lg_query(std::string base_url, std::string router) {
    return [base_url = std::move(base_url),
            router = std::move(router)](const std::string& command) -> std::string {
        httplib::Client http(base_url);
        auto res = http.Get("/query", httplib::Params{{"router", router}, {"command", command}},
                            httplib::Headers{});
        if (!res) throw TransportError("looking glass: no response from " + base_url);
        if (res->status == 401 || res->status == 403)
            throw AuthError("looking glass rejected the request (" +
                            std::to_string(res->status) + ")");
        if (res->status == 429) throw QuotaExceeded("looking glass rate limit hit");
        if (res->status < 200 || res->status >= 300)
            throw TransportError("looking glass: status " + std::to_string(res->status));
        return res->body;
    };
}

ChangeParams parse_change_params(const std::string& text) {
    ChangeParams p;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ValidationError("change parameter without '=': '" + item + "'");
        auto key = item.substr(0, eq);
        auto value = item.substr(eq + 1);
        try {
            if (key == "abs")
                p.abs_threshold_ms = std::stod(value);
            else if (key == "iqr")
                p.iqr_k = std::stod(value);
            else if (key == "window")
                p.window = std::stoi(value);
            else if (key == "persist")
                p.persist = std::stoi(value);
            else
                throw ValidationError("unknown change parameter '" + key +
                                      "' (abs, iqr, window, persist)");
        } catch (const std::invalid_argument&) {
            throw ValidationError("bad value for change parameter '" + key + "': '" + value +
                                  "'");
        } catch (const std::out_of_range&) {
            throw ValidationError("bad value for change parameter '" + key + "': '" + value +
                                  "'");
        }
    }
    if (p.window < 1) throw ValidationError("change detection window must be at least 1");
    if (p.persist < 1) throw ValidationError("change persistence must be at least 1");
    return p;
}

int cmd_infer(const std::vector<std::string>& routers,
              const std::vector<std::string>& fixture_dirs, const std::string& live_url,
              const std::string& prefixes_file, const std::string& out_dir, bool strict_six,
              bool verbose) {
    if (!fixture_dirs.empty() && !live_url.empty())
        throw ValidationError("choose either fixture directories or a live endpoint");
    if (live_url.empty() && fixture_dirs.size() != routers.size())
        throw ValidationError("need one fixture directory per router");

    Diagnostics diag;
    std::map<Asn, std::vector<IpPrefix>> prefixes;
    if (!prefixes_file.empty()) prefixes = load_peer_prefixes(prefixes_file, diag);

    std::vector<RouterInference> inferences;
    for (std::size_t i = 0; i < routers.size(); ++i) {
        QueryFn query =
            live_url.empty()
                ? QueryFn([store = FixtureStore(fixture_dirs[i])](const std::string& command) {
                      return store.fetch(command);
                  })
                : live_lg_query(live_url, routers[i]);
        InferOptions opt;
        opt.strict_six = strict_six;
        inferences.push_back(infer_router(routers[i], query, prefixes, diag, opt));
    }

    auto table = census_table(census(inferences));
    std::cout << table;

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream cases(std::filesystem::path(out_dir) / "cases.jsonl", std::ios::binary);
        if (!cases.is_open()) throw Error("cannot write cases.jsonl under " + out_dir);
        for (const auto& r : inferences)
            for (const auto& c : r.cases) append_record(cases, json(c));
        std::ofstream census_out(std::filesystem::path(out_dir) / "census.txt",
                                 std::ios::binary);
        census_out << table;
    }
    print_diagnostics(diag, verbose);
    return 0;
}

int cmd_analyze(const std::string& store_dir, const std::string& case_id, double bin_width,
                const std::string& change_params, bool csv, bool verbose) {
    Diagnostics diag;
    AnalyzeParams params;
    params.bin_width_ms = bin_width;
    if (!change_params.empty()) params.change = parse_change_params(change_params);

    CampaignStore store(store_dir);
    auto analysis = analyze_stored_case(store, case_id, params, diag);
    auto files = write_analysis(store, analysis, csv, std::time(nullptr));

    std::cout << "analyzed " << analysis.case_id << ": " << analysis.links.size() << " links, "
              << analysis.paths_used << " paths\n";
    for (std::size_t i = 0; i < analysis.links.size(); ++i) {
        const auto& l = analysis.links[i];
        std::cout << "link " << i << " " << l.link.nearside_ip.str() << " -> "
                  << l.link.farside_ip.str() << ": " << l.sample_count << " samples";
        for (const auto& e : l.events)
            std::cout << ", " << to_string(e.kind) << " at round " << e.time_point;
        std::cout << "\n";
    }
    for (const auto& entry : analysis.isolation.entries)
        std::cout << to_string(entry.event.kind) << " at round " << entry.event.time_point
                  << " on " << entry.link.nearside_ip.str() << " -> "
                  << entry.link.farside_ip.str() << ": " << correlation_label(entry.isolated)
                  << "\n";
    std::cout << "stability: " << analysis.stability.stable_count << "/"
              << (analysis.stability.stable_count + analysis.stability.unstable_count)
              << " destinations stable\n";
    std::cout << "wrote " << files.size() << " files under "
              << store.analysis_dir(analysis.case_id).string() << "\n";
    print_diagnostics(diag, verbose);
    return 0;
}

int cmd_simulate(const std::string& scenario_file, const std::string& store_dir, bool verbose) {
    auto scenario = json::parse(read_text_file(scenario_file)).get<SimScenario>();
    CampaignStore store(store_dir);
    auto run = run_scenario(scenario, store);
    std::cout << "simulated " << run.case_id << ": " << run.results << " results, "
              << run.links << " links, ground truth at "
              << (run.case_dir / kTruthFile).string() << "\n";
    return 0;
}

int cmd_plan(const std::string& case_file, const std::string& store_dir,
             const std::string& case_id, const std::string& out_file,
             const PlanConfig& config) {
    MBGPCase c;
    if (!case_file.empty())
        c = json::parse(read_text_file(case_file)).get<MBGPCase>();
    else if (!store_dir.empty() && !case_id.empty())
        c = CampaignStore(store_dir).load_case(case_id);
    else
        throw ValidationError("need --case-file, or --store together with --case");

    auto p = plan(c, config);

    if (!store_dir.empty()) {
        CampaignStore store(store_dir);
        store.save_case(c);
        store.save_plan(p);
    }
    auto file = out_file;
    if (file.empty() && store_dir.empty()) file = "plan.json";
    if (!file.empty()) {
        std::ofstream out(file, std::ios::binary);
        if (!out.is_open()) throw Error("cannot write " + file);
        out << json(p).dump(2) << '\n';
    }
    std::cout << "planned " << p.case_id << ": " << p.targets.size() << " targets x "
              << p.rounds << " rounds, interval " << p.interval_s << "s\n";
    return 0;
}

int cmd_run(const std::string& store_dir, const std::string& case_id,
            const std::string& offline_file, const std::string& live_url,
            const std::string& plan_file, int max_in_flight, double request_gap,
            const std::string& api_key, bool verbose) {
    if (offline_file.empty() == live_url.empty())
        throw ValidationError("choose exactly one of --offline and --live");

    CampaignStore store(store_dir);
    ProbePlan p;
    if (!plan_file.empty()) {
        p = json::parse(read_text_file(plan_file)).get<ProbePlan>();
    } else {
        auto file = store.root() / CampaignStore::sanitize(case_id) / "plan.json";
        if (!std::filesystem::exists(file))
            throw MissingCampaign("no plan for '" + case_id + "' under " +
                                  store.root().string());
        p = store.load_plan(case_id);
    }
    if (p.case_id != case_id)
        throw ValidationError("plan is for '" + p.case_id + "', not '" + case_id + "'");

    Diagnostics diag;
    std::unique_ptr<MeasurementClient> client;
    if (!offline_file.empty()) {
        auto docs = read_record_log(offline_file, diag);
        std::int64_t anchor = 0;
        if (!docs.empty()) {
            auto min_ts = std::numeric_limits<std::int64_t>::max();
            for (const auto& d : docs)
                if (d.contains("timestamp"))
                    min_ts = std::min(min_ts, d.at("timestamp").get<std::int64_t>());
            if (min_ts != std::numeric_limits<std::int64_t>::max())
                anchor = min_ts - p.interval_s / 2;
        }
        client = std::make_unique<FixtureClient>(docs, anchor, p.interval_s);
        if (request_gap < 0) request_gap = 0.0;
    } else {
        LiveConfig config;
        config.base_url = live_url;
        config.api_key = api_key;
        client = std::make_unique<LiveClient>(config);
        if (request_gap < 0) request_gap = 2.0;
    }

    ExecuteConfig config;
    config.max_in_flight = max_in_flight;
    config.min_request_gap_s = request_gap;
    auto summary = execute(p, *client, store, config);

    auto total = summary.persisted + summary.gaps.size();
    std::cout << "ran " << p.case_id << ": persisted " << summary.persisted << ", gaps "
              << summary.gaps.size() << ", coverage " << summary.persisted << "/" << total
              << "\n";
    print_diagnostics(diag, verbose);
    return summary.gaps.empty() ? 0 : 2;
}

int cmd_ingest(const std::string& store_dir, const std::string& case_id,
               const std::string& input, bool verbose) {
    Diagnostics diag;
    auto docs = read_record_log(input, diag);
    CampaignStore store(store_dir);
    auto writer = store.results_writer(case_id);
    std::size_t kept = 0, skipped = 0;
    for (const auto& doc : docs) {
        try {
            auto path = ingest(doc, diag);
            writer.append(json(path));
            ++kept;
        } catch (const Error& e) {
            diag.warn("bad_record", e.what());
            ++skipped;
        }
    }
    std::cout << "ingested " << kept << " records into " << store.case_dir(case_id).string()
              << ", skipped " << skipped << "\n";
    print_diagnostics(diag, verbose);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"M-BGP deployment inference and border-link delay toolkit"};
    app.require_subcommand(0, 1);
    app.set_config("--config", "", "Config file; explicit flags win over its values");
    bool verbose = false;
    app.add_flag("--verbose", verbose, "Also print informational diagnostics");

    int rc = 0;

    auto* infer_cmd = app.add_subcommand("infer", "Infer M-BGP deployments from LG responses");
    std::vector<std::string> routers, fixture_dirs;
    std::string infer_live, prefixes_file, infer_out;
    bool strict_six = false;
    infer_cmd->add_option("--router", routers, "Router name (repeatable)");
    infer_cmd->add_option("--fixtures", fixture_dirs,
                          "Fixture directory for the matching --router (repeatable)");
    infer_cmd->add_option("--live", infer_live, "Looking-glass HTTP endpoint base URL");
    infer_cmd->add_option("--prefixes", prefixes_file,
                          "Origin table: one 'prefix asn' per line");
    infer_cmd->add_option("--out", infer_out, "Directory for cases.jsonl and census.txt");
    infer_cmd->add_flag("--strict-six", strict_six,
                        "Compare only the six decision attributes, ignoring Weight");
    infer_cmd->callback([&] {
        rc = cmd_infer(routers, fixture_dirs, infer_live, prefixes_file, infer_out, strict_six,
                       verbose);
    });

    auto* analyze_cmd =
        app.add_subcommand("analyze", "Report per-link delay series, changes, and stability");
    std::string analyze_store, analyze_case_id, change_params;
    double bin_width = 10.0;
    bool csv = false;
    analyze_cmd->add_option("--store", analyze_store, "Campaign store root")->required();
    analyze_cmd->add_option("--case", analyze_case_id, "Case key")->required();
    analyze_cmd->add_option("--bin-width", bin_width, "Histogram bin width in ms");
    analyze_cmd->add_option("--change-params", change_params,
                            "Detector tuning, e.g. abs=5,iqr=3,window=8,persist=4");
    analyze_cmd->add_flag("--csv", csv, "Also write plot-ready CSV tables");
    analyze_cmd->callback([&] {
        rc = cmd_analyze(analyze_store, analyze_case_id, bin_width, change_params, csv,
                         verbose);
    });

    auto* simulate_cmd =
        app.add_subcommand("simulate", "Generate a synthetic campaign with ground truth");
    std::string scenario_file, simulate_store;
    simulate_cmd->add_option("--scenario", scenario_file, "Scenario JSON file")->required();
    simulate_cmd->add_option("--store", simulate_store, "Campaign store root")->required();
    simulate_cmd->callback([&] { rc = cmd_simulate(scenario_file, simulate_store, verbose); });

    auto* plan_cmd = app.add_subcommand("plan", "Derive a probe plan from a case");
    std::string plan_case_file, plan_store, plan_case_id, plan_out, control_prefix;
    PlanConfig plan_config;
    plan_cmd->add_option("--case-file", plan_case_file, "Case JSON file");
    plan_cmd->add_option("--store", plan_store, "Campaign store to read the case from and save into");
    plan_cmd->add_option("--case", plan_case_id, "Case key within --store");
    plan_cmd->add_option("--out", plan_out, "Plan output file");
    plan_cmd->add_option("--max-targets", plan_config.max_targets, "Target cap per case");
    plan_cmd->add_option("--interval", plan_config.interval_s, "Probe interval in seconds");
    plan_cmd->add_option("--rounds", plan_config.rounds, "Campaign length in rounds");
    plan_cmd->add_option("--control-prefix", control_prefix,
                         "Control prefix recorded with the plan");
    plan_cmd->callback([&] {
        if (!control_prefix.empty()) plan_config.control_prefix = IpPrefix::parse(control_prefix);
        rc = cmd_plan(plan_case_file, plan_store, plan_case_id, plan_out, plan_config);
    });

    auto* run_cmd = app.add_subcommand("run", "Execute a planned campaign");
    std::string run_store, run_case_id, offline_file, run_live, run_plan_file, api_key;
    int max_in_flight = 4;
    double request_gap = -1.0;
    run_cmd->add_option("--store", run_store, "Campaign store root")->required();
    run_cmd->add_option("--case", run_case_id, "Case key")->required();
    run_cmd->add_option("--offline", offline_file, "Result-log file to play back");
    run_cmd->add_option("--live", run_live, "Measurement platform base URL");
    run_cmd->add_option("--plan", run_plan_file, "Plan file overriding the stored plan");
    run_cmd->add_option("--max-in-flight", max_in_flight, "Concurrent measurement cap");
    run_cmd->add_option("--request-gap", request_gap,
                        "Seconds between requests (default: 0 offline, 2 live)");
    run_cmd->add_option("--api-key", api_key,
                        "Platform API key (default: $" + std::string(kApiKeyEnvVar) + ")");
    run_cmd->callback([&] {
        rc = cmd_run(run_store, run_case_id, offline_file, run_live, run_plan_file,
                     max_in_flight, request_gap, api_key, verbose);
    });

    auto* ingest_cmd =
        app.add_subcommand("ingest", "Normalize raw result documents into a store");
    std::string ingest_store, ingest_case_id, ingest_input;
    ingest_cmd->add_option("--store", ingest_store, "Campaign store root")->required();
    ingest_cmd->add_option("--case", ingest_case_id, "Case key")->required();
    ingest_cmd->add_option("--input", ingest_input, "Raw result JSONL file")->required();
    ingest_cmd->callback(
        [&] { rc = cmd_ingest(ingest_store, ingest_case_id, ingest_input, verbose); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        auto code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    if (app.get_subcommands().empty()) std::cout << app.help();
    return rc;
}
