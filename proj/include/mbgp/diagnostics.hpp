#ifndef MBGP_DIAGNOSTICS_HPP
#define MBGP_DIAGNOSTICS_HPP

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

namespace mbgp {

enum class Severity { Info, Warning };

// One structured record on the diagnostics stream. Codes are short
// machine-matchable tags (e.g. "row_parse_failed", "SKIPPED_GAP").
struct Diagnostic {
    Severity severity = Severity::Warning;
    std::string code;
    std::string message;
};

class Diagnostics {
public:
    void warn(std::string code, std::string message) {
        items_.push_back({Severity::Warning, std::move(code), std::move(message)});
    }
    void info(std::string code, std::string message) {
        items_.push_back({Severity::Info, std::move(code), std::move(message)});
    }

    const std::vector<Diagnostic>& items() const { return items_; }
    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }

    std::size_t count(const std::string& code) const {
        std::size_t n = 0;
        for (const auto& d : items_)
            if (d.code == code) ++n;
        return n;
    }

    bool has(const std::string& code) const { return count(code) > 0; }

    void append(const Diagnostics& other) {
        items_.insert(items_.end(), other.items_.begin(), other.items_.end());
    }

    void dump(std::ostream& os) const {
        for (const auto& d : items_)
            os << (d.severity == Severity::Warning ? "warning" : "info")
               << " [" << d.code << "] " << d.message << '\n';
    }

private:
    std::vector<Diagnostic> items_;
};

}  // namespace mbgp

#endif
