#ifndef MBGP_FIXTURE_HPP
#define MBGP_FIXTURE_HPP

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>

#include "mbgp/errors.hpp"

namespace mbgp {

inline std::string sha1_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1)
        throw Error("sha1 digest failed");
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw TransportError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline constexpr const char* kManifestFile = "manifest.tsv";

// Playback store for recorded LG responses: manifest.tsv maps each command to
// a response file named <sha1-of-command>.txt in the same directory.
class FixtureStore {
public:
    explicit FixtureStore(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::ifstream in(dir_ / kManifestFile);
        if (!in) throw TransportError("no manifest.tsv in " + dir_.string());
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw ParseError("manifest line without tab: '" + line + "'");
            manifest_[line.substr(0, tab)] = line.substr(tab + 1);
        }
    }

    std::string fetch(const std::string& command) const {
        auto it = manifest_.find(command);
        if (it == manifest_.end())
            throw TransportError("no fixture for command '" + command + "'");
        return read_text_file(dir_ / it->second);
    }

    auto query_fn() const {
        return [this](const std::string& command) { return fetch(command); };
    }

    const std::map<std::string, std::string>& manifest() const { return manifest_; }

private:
    std::filesystem::path dir_;
    std::map<std::string, std::string> manifest_;
};

inline void write_fixture_dir(const std::filesystem::path& dir,
                              const std::map<std::string, std::string>& responses) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / kManifestFile, std::ios::binary | std::ios::trunc);
    if (!manifest) throw TransportError("cannot write manifest in " + dir.string());
    for (const auto& [command, text] : responses) {
        auto name = sha1_hex(command) + ".txt";
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw TransportError("cannot write fixture file " + name);
        out << text;
        manifest << command << '\t' << name << '\n';
    }
}

}  // namespace mbgp

#endif
