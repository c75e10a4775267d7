#ifndef MBGP_IP_HPP
#define MBGP_IP_HPP

#include <arpa/inet.h>

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>

#include "mbgp/errors.hpp"

namespace mbgp {

using Asn = std::uint32_t;

enum class AddressFamily { V4, V6 };

inline int family_bits(AddressFamily f) { return f == AddressFamily::V4 ? 32 : 128; }

// Address-family-agnostic IP address. IPv4 occupies the first 4 bytes,
// the rest stay zero so byte-wise comparison is total within a family.
struct IpAddress {
    AddressFamily family = AddressFamily::V4;
    std::array<std::uint8_t, 16> bytes{};

    auto operator<=>(const IpAddress&) const = default;

    int byte_count() const { return family == AddressFamily::V4 ? 4 : 16; }

    static std::optional<IpAddress> try_parse(std::string_view text) {
        std::string s(text);
        IpAddress a;
        if (s.find(':') != std::string::npos) {
            a.family = AddressFamily::V6;
            if (inet_pton(AF_INET6, s.c_str(), a.bytes.data()) != 1) return std::nullopt;
        } else {
            a.family = AddressFamily::V4;
            if (inet_pton(AF_INET, s.c_str(), a.bytes.data()) != 1) return std::nullopt;
        }
        return a;
    }

    static IpAddress parse(std::string_view text) {
        auto a = try_parse(text);
        if (!a) throw ParseError("invalid IP address: '" + std::string(text) + "'");
        return *a;
    }

    std::string str() const {
        char buf[INET6_ADDRSTRLEN] = {};
        if (family == AddressFamily::V4)
            inet_ntop(AF_INET, bytes.data(), buf, sizeof buf);
        else
            inet_ntop(AF_INET6, bytes.data(), buf, sizeof buf);
        return buf;
    }

    // bit 0 is the most significant bit of the address.
    int bit(int i) const { return (bytes[i / 8] >> (7 - i % 8)) & 1; }

    // Address plus an unsigned offset, wrapping within the family width.
    IpAddress plus(std::uint64_t offset) const {
        IpAddress r = *this;
        int lo = byte_count() - 1;
        for (int i = lo; i >= 0 && offset > 0; --i) {
            std::uint64_t sum = r.bytes[i] + (offset & 0xff);
            r.bytes[i] = static_cast<std::uint8_t>(sum);
            offset = (offset >> 8) + (sum >> 8);
        }
        return r;
    }
};

struct IpPrefix {
    IpAddress address;
    int length = 0;

    auto operator<=>(const IpPrefix&) const = default;

    int bits() const { return family_bits(address.family); }

    static std::optional<IpPrefix> try_parse(std::string_view text) {
        auto slash = text.rfind('/');
        if (slash == std::string_view::npos) return std::nullopt;
        auto addr = IpAddress::try_parse(text.substr(0, slash));
        if (!addr) return std::nullopt;
        int len = -1;
        try {
            std::size_t pos = 0;
            std::string lenstr(text.substr(slash + 1));
            len = std::stoi(lenstr, &pos);
            if (pos != lenstr.size()) return std::nullopt;
        } catch (const std::exception&) {
            return std::nullopt;
        }
        IpPrefix p{*addr, len};
        if (len < 0 || len > p.bits()) return std::nullopt;
        return p;
    }

    static IpPrefix parse(std::string_view text) {
        auto p = try_parse(text);
        if (!p) throw ParseError("invalid prefix: '" + std::string(text) + "'");
        return *p;
    }

    std::string str() const { return address.str() + "/" + std::to_string(length); }

    IpAddress network() const {
        IpAddress n = address;
        for (int i = length; i < bits(); ++i)
            n.bytes[i / 8] &= static_cast<std::uint8_t>(~(1u << (7 - i % 8)));
        return n;
    }

    bool contains(const IpAddress& a) const {
        if (a.family != address.family) return false;
        IpAddress n = network();
        for (int i = 0; i < length; ++i)
            if (a.bit(i) != n.bit(i)) return false;
        return true;
    }

    // Number of host addresses usable as probe targets, capped. A full-length
    // prefix names a single host; otherwise network and broadcast are excluded.
    std::uint64_t usable_hosts(std::uint64_t cap) const {
        int free_bits = bits() - length;
        if (free_bits == 0) return 1;
        if (free_bits >= 63) return cap;
        std::uint64_t size = std::uint64_t{1} << free_bits;
        std::uint64_t usable = size >= 2 ? size - 2 : 0;
        return usable < cap ? usable : cap;
    }

    // First usable host address: network + 1, or the address itself for a
    // full-length prefix.
    IpAddress first_host() const {
        if (length == bits()) return network();
        return network().plus(1);
    }
};

// The address used to query a routing table about a prefix: any in-prefix
// address selects the same entry, so the first host is used.
inline IpAddress representative_address(const IpPrefix& p) { return p.first_host(); }

}  // namespace mbgp

#endif
