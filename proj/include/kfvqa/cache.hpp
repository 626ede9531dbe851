#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

namespace kfvqa {

// Content-addressed response store: one file per request digest under a
// two-level fan-out directory. Entries are individually atomic and carry a
// body digest so corruption is detected on read.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path root);

    std::optional<nlohmann::json> get(const std::string& digest) const;
    void put(const std::string& digest, const nlohmann::json& body) const;

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path entry_path(const std::string& digest) const;

    std::filesystem::path root_;
};

}  // namespace kfvqa
