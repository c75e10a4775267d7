#ifndef MBGP_ORCHESTRATE_HPP
#define MBGP_ORCHESTRATE_HPP

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>

#include "mbgp/diagnostics.hpp"
#include "mbgp/errors.hpp"
#include "mbgp/json_io.hpp"
#include "mbgp/model.hpp"

namespace mbgp {

struct PlanConfig {
    int max_targets = 100;
    int interval_s = 900;
    int rounds = 96;
    std::optional<IpPrefix> control_prefix;
};

struct ProbePlan {
    std::string case_id;
    std::vector<IpAddress> targets;
    int interval_s = 900;
    int rounds = 96;
    std::optional<IpPrefix> control_prefix;

    auto operator<=>(const ProbePlan&) const = default;
};

inline void validate(const ProbePlan& p) {
    if (p.case_id.empty()) throw ValidationError("plan needs a case id");
    if (p.targets.empty()) throw ValidationError("plan needs at least one target");
    if (p.interval_s < 60) throw ValidationError("probe interval must be at least 60 s");
    if (p.rounds < 1) throw ValidationError("plan needs at least one round");
}

inline void to_json(json& j, const ProbePlan& p) {
    j = json{{"case_id", p.case_id},
             {"targets", p.targets},
             {"interval_s", p.interval_s},
             {"rounds", p.rounds}};
    if (p.control_prefix) j["control_prefix"] = *p.control_prefix;
}

inline void from_json(const json& j, ProbePlan& p) {
    j.at("case_id").get_to(p.case_id);
    j.at("targets").get_to(p.targets);
    j.at("interval_s").get_to(p.interval_s);
    j.at("rounds").get_to(p.rounds);
    if (j.contains("control_prefix")) p.control_prefix = j.at("control_prefix").get<IpPrefix>();
}

// Probe targets are the first host addresses of the case's destination
// prefix, capped by the platform limit. The control prefix is carried as
// campaign metadata; probing it is a separate campaign.
inline ProbePlan plan(const MBGPCase& c, const PlanConfig& config = {}) {
    auto usable = c.destination_prefix.usable_hosts(
        static_cast<std::uint64_t>(std::max(config.max_targets, 0)));
    if (usable == 0)
        throw PrefixTooSmall(c.destination_prefix.str() + " has no usable host addresses");

    ProbePlan p;
    p.case_id = case_key(c);
    IpAddress host = c.destination_prefix.first_host();
    for (std::uint64_t i = 0; i < usable; ++i) {
        p.targets.push_back(host);
        host = host.plus(1);
    }
    p.interval_s = config.interval_s;
    p.rounds = config.rounds;
    p.control_prefix = config.control_prefix;
    validate(p);
    return p;
}

// Line-delimited record log. Damage in the final record is expected (a write
// can be cut short) and drops that record with a warning; damage anywhere
// earlier means the log is not trustworthy.
inline void append_record(std::ostream& out, const json& record) {
    out << record.dump() << '\n';
    out.flush();
}

inline std::vector<json> read_record_log(const std::filesystem::path& file, Diagnostics& diag) {
    std::vector<json> records;
    std::ifstream in(file, std::ios::binary);
    if (!in.is_open()) return records;

    std::string line;
    std::size_t offset = 0;
    std::optional<std::size_t> bad_offset;
    while (std::getline(in, line)) {
        std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        if (bad_offset) throw CorruptStore(*bad_offset, "record is not valid JSON");
        try {
            records.push_back(json::parse(line));
        } catch (const json::parse_error&) {
            bad_offset = line_start;
        }
    }
    if (bad_offset)
        diag.warn("damaged_tail", "dropped a partially written final record at byte offset " +
                                      std::to_string(*bad_offset));
    return records;
}

// Per-case directory tree under one root:
//   <root>/<sanitized case key>/{plan.json, case.json, results.log, gaps.log, analysis/}
class CampaignStore {
public:
    explicit CampaignStore(std::filesystem::path root) : root_(std::move(root)) {
        std::filesystem::create_directories(root_);
    }

    static std::string sanitize(const std::string& case_key) {
        std::string s = case_key;
        for (auto& c : s)
            if (c == '/') c = '_';
        return s;
    }

    const std::filesystem::path& root() const { return root_; }

    std::filesystem::path case_dir(const std::string& case_key) const {
        auto dir = root_ / sanitize(case_key);
        std::filesystem::create_directories(dir);
        return dir;
    }

    std::filesystem::path analysis_dir(const std::string& case_key) const {
        auto dir = case_dir(case_key) / "analysis";
        std::filesystem::create_directories(dir);
        return dir;
    }

    void save_plan(const ProbePlan& p) {
        std::ofstream out(case_dir(p.case_id) / "plan.json", std::ios::binary);
        out << json(p).dump(2) << '\n';
    }

    ProbePlan load_plan(const std::string& case_key) const {
        return slurp(case_dir(case_key) / "plan.json").get<ProbePlan>();
    }

    void save_case(const MBGPCase& c) {
        std::ofstream out(case_dir(mbgp::case_key(c)) / "case.json", std::ios::binary);
        out << json(c).dump(2) << '\n';
    }

    MBGPCase load_case(const std::string& case_key) const {
        return slurp(case_dir(case_key) / "case.json").get<MBGPCase>();
    }

    class Writer {
    public:
        explicit Writer(const std::filesystem::path& file)
            : out_(file, std::ios::binary | std::ios::app) {
            if (!out_.is_open()) throw Error("cannot open " + file.string() + " for append");
        }
        void append(const json& record) { append_record(out_, record); }

    private:
        std::ofstream out_;
    };

    Writer results_writer(const std::string& case_key) {
        return Writer(case_dir(case_key) / "results.log");
    }
    Writer gaps_writer(const std::string& case_key) {
        return Writer(case_dir(case_key) / "gaps.log");
    }

    std::vector<json> read_results(const std::string& case_key, Diagnostics& diag) const {
        return read_record_log(case_dir(case_key) / "results.log", diag);
    }
    std::vector<json> read_gaps(const std::string& case_key, Diagnostics& diag) const {
        return read_record_log(case_dir(case_key) / "gaps.log", diag);
    }

private:
    static json slurp(const std::filesystem::path& file) {
        std::ifstream in(file, std::ios::binary);
        if (!in.is_open()) throw Error("cannot open " + file.string());
        return json::parse(in);
    }

    std::filesystem::path root_;
};

// One traceroute measurement towards one target for one campaign round,
// returning the platform's result document.
class MeasurementClient {
public:
    virtual ~MeasurementClient() = default;
    virtual json run_traceroute(const IpAddress& target, int round) = 0;
};

// Offline playback: results indexed by destination and round, the round
// recovered from each document's timestamp.
class FixtureClient : public MeasurementClient {
public:
    FixtureClient(const std::vector<json>& docs, std::int64_t start_timestamp, int interval_s) {
        if (interval_s < 1) throw ValidationError("interval must be positive");
        for (const auto& doc : docs) {
            if (!doc.contains("dst") || !doc.contains("timestamp"))
                throw SchemaError("dst", "fixture result lacks dst or timestamp");
            auto round = static_cast<int>(
                (doc.at("timestamp").get<std::int64_t>() - start_timestamp) / interval_s);
            docs_[{doc.at("dst").get<std::string>(), round}] = doc;
        }
    }

    json run_traceroute(const IpAddress& target, int round) override {
        auto it = docs_.find({target.str(), round});
        if (it == docs_.end())
            throw TransportError("no fixture result for " + target.str() + " round " +
                                 std::to_string(round));
        return it->second;
    }

    bool erase(const IpAddress& target, int round) {
        return docs_.erase({target.str(), round}) > 0;
    }

    std::size_t size() const { return docs_.size(); }

private:
    std::map<std::pair<std::string, int>, json> docs_;
};

inline const char* kApiKeyEnvVar = "MBGP_ATLAS_KEY";

struct LiveConfig {
    std::string base_url;
    std::string api_key;  // empty: read from MBGP_ATLAS_KEY
    int poll_attempts = 10;
    double poll_gap_s = 1.0;
};

// Minimal Atlas-style REST client: create a measurement, poll its results.
class LiveClient : public MeasurementClient {
public:
    explicit LiveClient(LiveConfig config) : config_(std::move(config)) {
        if (config_.api_key.empty())
            if (const char* env = std::getenv(kApiKeyEnvVar)) config_.api_key = env;
    }

    json run_traceroute(const IpAddress& target, int round) override {
        httplib::Client http(config_.base_url);
        httplib::Headers headers;
        if (!config_.api_key.empty())
            headers.emplace("Authorization", "Key " + config_.api_key);

        json body{{"type", "traceroute"}, {"target", target.str()}, {"round", round}};
        auto created = http.Post("/measurements", headers, body.dump(), "application/json");
        check(created, "create measurement");
        auto id = json::parse(created->body).at("id").get<std::int64_t>();

        for (int attempt = 0; attempt < config_.poll_attempts; ++attempt) {
            auto results =
                http.Get("/measurements/" + std::to_string(id) + "/results", headers);
            check(results, "fetch results");
            auto docs = json::parse(results->body);
            if (docs.is_array() && !docs.empty()) return docs.front();
            std::this_thread::sleep_for(std::chrono::duration<double>(config_.poll_gap_s));
        }
        throw TransportError("measurement " + std::to_string(id) + " returned no results");
    }

private:
    static void check(const httplib::Result& r, const std::string& what) {
        if (!r) throw TransportError(what + ": no response from platform");
        if (r->status == 401 || r->status == 403)
            throw AuthError(what + ": platform rejected the API key (" +
                            std::to_string(r->status) + ")");
        if (r->status == 429) throw QuotaExceeded(what + ": platform rate limit hit");
        if (r->status < 200 || r->status >= 300)
            throw TransportError(what + ": status " + std::to_string(r->status));
    }

    LiveConfig config_;
};

struct Gap {
    IpAddress target;
    int round = 0;
    std::string reason;

    auto operator<=>(const Gap&) const = default;
};

inline void to_json(json& j, const Gap& g) {
    j = json{{"target", g.target}, {"round", g.round}, {"reason", g.reason}};
}

inline void from_json(const json& j, Gap& g) {
    j.at("target").get_to(g.target);
    j.at("round").get_to(g.round);
    j.at("reason").get_to(g.reason);
}

struct CampaignSummary {
    std::size_t persisted = 0;
    std::vector<Gap> gaps;
};

struct ExecuteConfig {
    int max_in_flight = 4;
    double min_request_gap_s = 2.0;
};

// Runs the whole campaign: every (round, target) probe exactly once, at most
// max_in_flight requests in the air, issuance spaced by min_request_gap_s.
// Transport failures become gap records and never abort the campaign; auth
// and quota failures abort after in-flight work drains. A single writer
// persists results and gaps in arrival order.
inline CampaignSummary execute(const ProbePlan& plan, MeasurementClient& client,
                               CampaignStore& store, const ExecuteConfig& config = {}) {
    validate(plan);
    if (config.max_in_flight < 1) throw ValidationError("max_in_flight must be at least 1");
    store.save_plan(plan);

    struct Task {
        IpAddress target;
        int round;
    };
    std::vector<Task> tasks;
    tasks.reserve(static_cast<std::size_t>(plan.rounds) * plan.targets.size());
    for (int round = 0; round < plan.rounds; ++round)
        for (const auto& target : plan.targets) tasks.push_back({target, round});

    struct Completion {
        Task task;
        json doc;
        bool ok = false;
        std::string reason;
    };

    std::mutex mu;
    std::condition_variable cv;
    std::size_t next_task = 0;
    std::deque<Completion> completions;
    std::atomic<bool> fatal{false};
    std::exception_ptr fatal_error;

    std::mutex rate_mu;
    auto next_slot = std::chrono::steady_clock::now();

    auto worker = [&] {
        while (true) {
            std::size_t index;
            {
                std::lock_guard lock(mu);
                if (fatal || next_task >= tasks.size()) return;
                index = next_task++;
            }
            if (config.min_request_gap_s > 0) {
                std::unique_lock lock(rate_mu);
                auto now = std::chrono::steady_clock::now();
                if (next_slot < now) next_slot = now;
                auto my_slot = next_slot;
                next_slot += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                    std::chrono::duration<double>(config.min_request_gap_s));
                lock.unlock();
                std::this_thread::sleep_until(my_slot);
            }

            Completion done;
            done.task = tasks[index];
            try {
                done.doc = client.run_traceroute(tasks[index].target, tasks[index].round);
                done.ok = true;
            } catch (const AuthError&) {
                std::lock_guard lock(mu);
                if (!fatal_error) fatal_error = std::current_exception();
                fatal = true;
                cv.notify_all();
                continue;
            } catch (const QuotaExceeded&) {
                std::lock_guard lock(mu);
                if (!fatal_error) fatal_error = std::current_exception();
                fatal = true;
                cv.notify_all();
                continue;
            } catch (const std::exception& e) {
                done.reason = e.what();
            }
            {
                std::lock_guard lock(mu);
                completions.push_back(std::move(done));
            }
            cv.notify_all();
        }
    };

    auto thread_count = std::min<std::size_t>(static_cast<std::size_t>(config.max_in_flight),
                                              tasks.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < thread_count; ++i) pool.emplace_back(worker);

    auto results = store.results_writer(plan.case_id);
    auto gaps = store.gaps_writer(plan.case_id);
    CampaignSummary summary;
    std::size_t handled = 0;
    {
        std::unique_lock lock(mu);
        while (true) {
            cv.wait(lock, [&] {
                return !completions.empty() || fatal ||
                       (next_task >= tasks.size() && handled + completions.size() >= tasks.size());
            });
            while (!completions.empty()) {
                auto done = std::move(completions.front());
                completions.pop_front();
                ++handled;
                lock.unlock();
                if (done.ok) {
                    results.append(done.doc);
                    ++summary.persisted;
                } else {
                    Gap gap{done.task.target, done.task.round, done.reason};
                    gaps.append(json(gap));
                    summary.gaps.push_back(std::move(gap));
                }
                lock.lock();
            }
            if (fatal) break;
            if (next_task >= tasks.size() && handled >= tasks.size()) break;
        }
    }
    for (auto& t : pool) t.join();
    {
        std::lock_guard lock(mu);
        for (auto& done : completions) {
            if (done.ok) {
                results.append(done.doc);
                ++summary.persisted;
            } else {
                Gap gap{done.task.target, done.task.round, done.reason};
                gaps.append(json(gap));
                summary.gaps.push_back(std::move(gap));
            }
        }
        completions.clear();
    }
    if (fatal_error) std::rethrow_exception(fatal_error);
    return summary;
}

}  // namespace mbgp

#endif
