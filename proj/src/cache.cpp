#include "kfvqa/cache.hpp"

#include <fstream>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"
#include "kfvqa/sha256.hpp"

namespace kfvqa {

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

std::filesystem::path ResponseCache::entry_path(const std::string& digest) const {
    if (digest.size() < 4) {
        throw Error::internal("BadDigest", "digest too short: " + digest);
    }
    return root_ / digest.substr(0, 2) / digest.substr(2, 2) / (digest + ".json");
}

std::optional<nlohmann::json> ResponseCache::get(const std::string& digest) const {
    const auto path = entry_path(digest);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;

    nlohmann::json entry = nlohmann::json::parse(in, nullptr, false);
    if (entry.is_discarded() || !entry.contains("digest") || !entry.contains("body") ||
        !entry.contains("body_digest")) {
        throw Error::integrity("CacheCorrupt", "unreadable cache entry " + path.string());
    }
    if (entry["digest"].get<std::string>() != digest) {
        throw Error::integrity("CacheCorrupt", "digest mismatch in " + path.string());
    }
    const std::string body_dump = entry["body"].dump();
    if (sha256_hex(body_dump) != entry["body_digest"].get<std::string>()) {
        throw Error::integrity("CacheCorrupt", "body hash mismatch in " + path.string());
    }
    return entry["body"];
}

void ResponseCache::put(const std::string& digest, const nlohmann::json& body) const {
    const auto path = entry_path(digest);
    nlohmann::json entry{{"digest", digest}, {"body", body}, {"body_digest", sha256_hex(body.dump())}};
    atomic_write_file(path, entry.dump());
}

}  // namespace kfvqa
