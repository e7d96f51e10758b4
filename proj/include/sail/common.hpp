#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

namespace sail {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated an operation's stated precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A value failed a domain invariant (empty field, answer not among options, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Input text/file could not be parsed; the message names the offending piece.
class ParseError : public Error {
public:
    using Error::Error;
};

/// An identifier was not found in the store it was looked up in.
class LookupError : public Error {
public:
    using Error::Error;
};

/// Network-level failure after retries were exhausted.
class TransportError : public Error {
public:
    using Error::Error;
};

/// The backend answered, but the payload violated the wire contract.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// A strict structured-output request came back non-conforming. Never retried.
class SchemaViolationError : public Error {
public:
    using Error::Error;
};

/// Bad run configuration (missing example, unknown mode combination, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The activation completion could not be interpreted as a schema.
class ActivationError : public Error {
public:
    using Error::Error;
};

/// Synthetic-variant generation produced an unusable reply.
class GenerationError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

inline std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr ||
        EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("sha256 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hexdigits = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hexdigits[digest[i] >> 4]);
        out.push_back(hexdigits[digest[i] & 0xF]);
    }
    return out;
}

/// First 8 bytes of sha256 as a big-endian integer. Stable across platforms,
/// unlike std::hash.
inline std::uint64_t hash64(std::string_view bytes) {
    const std::string hex = sha256_hex(bytes);
    std::uint64_t v = 0;
    for (int i = 0; i < 16; ++i) {
        const char c = hex[static_cast<std::size_t>(i)];
        v = (v << 4) | static_cast<std::uint64_t>(c <= '9' ? c - '0' : c - 'a' + 10);
    }
    return v;
}

/// Deterministic value in [0, 1) derived from a string key.
inline double uniform01(std::string_view key) {
    return static_cast<double>(hash64(key) >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Small file / string helpers
// ---------------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write file: " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw Error("short write: " + path.string());
    }
}

/// Write via a sibling temp file, then atomically rename into place.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp." + sha256_hex(std::string(content)).substr(0, 8);
    write_file(tmp, content);
    std::filesystem::rename(tmp, path);
}

inline bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) {
        return 0;
    }
    std::size_t n = 0;
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\n' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\n' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

/// Shortest decimal form that round-trips the double (full precision).
inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    std::string s = os.str();
    // prefer the shorter representation when it still round-trips
    std::ostringstream os2;
    os2.precision(15);
    os2 << v;
    if (std::stod(os2.str()) == v) {
        s = os2.str();
    }
    return s;
}

}  // namespace sail
