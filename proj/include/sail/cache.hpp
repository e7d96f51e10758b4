#pragma once

#include <array>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "sail/common.hpp"

namespace sail {

/// Content-addressed response cache: one JSON file per request digest,
/// written via temp-file-then-atomic-rename. Readers never lock; writers are
/// serialized per digest shard.
class ResponseCache {
public:
    ResponseCache() = default;

    explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        if (!dir_.empty()) {
            std::filesystem::create_directories(dir_);
            // fail fast when the directory is not actually writable
            const auto probe = dir_ / ".probe";
            write_file(probe, "ok");
            std::filesystem::remove(probe);
        }
    }

    bool enabled() const { return !dir_.empty(); }

    std::optional<nlohmann::json> lookup(const std::string& digest) const {
        if (!enabled()) {
            return std::nullopt;
        }
        const auto path = entry_path(digest);
        if (!std::filesystem::exists(path)) {
            return std::nullopt;
        }
        nlohmann::json entry = nlohmann::json::parse(read_file(path));
        return entry.at("response");
    }

    void store(const std::string& digest, const std::string& path,
               const nlohmann::json& request_body, const nlohmann::json& response) {
        if (!enabled()) {
            return;
        }
        nlohmann::json entry{
            {"digest", digest},
            {"path", path},
            {"request", request_body},
            {"response", response},
        };
        std::lock_guard lock(shard_mutex(digest));
        write_file_atomic(entry_path(digest), entry.dump(2) + "\n");
    }

private:
    std::filesystem::path entry_path(const std::string& digest) const {
        return dir_ / (digest + ".json");
    }

    std::mutex& shard_mutex(const std::string& digest) const {
        const std::size_t shard = digest.empty() ? 0 : static_cast<std::size_t>(digest[0]) % kShards;
        return mutexes_[shard];
    }

    static constexpr std::size_t kShards = 16;
    std::filesystem::path dir_;
    mutable std::array<std::mutex, kShards> mutexes_;
};

}  // namespace sail
