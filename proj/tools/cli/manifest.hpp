#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace hyperscore::cli {

/// FNV-1a 64 over a file's bytes, or for a directory over every regular file
/// (relative path then contents, in path order). Hex encoded.
std::string digest_path(const std::filesystem::path& path);

std::string utc_timestamp();

/// Provenance record written next to every artifact a command produces.
class RunManifest {
public:
    RunManifest(std::string command, std::vector<std::string> argv);

    void option(const std::string& name, nlohmann::json value) { options_[name] = std::move(value); }
    void seed(const std::string& label, std::uint64_t value) { seeds_[label] = value; }
    void input(const std::filesystem::path& path);
    void output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }
    void note(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }

    nlohmann::json to_json() const;
    /// Stamps the finish time, digests the outputs and writes pretty JSON.
    void write(const std::filesystem::path& path);

private:
    std::string command_;
    std::vector<std::string> argv_;
    std::string started_at_;
    std::string finished_at_;
    nlohmann::json options_ = nlohmann::json::object();
    nlohmann::json seeds_ = nlohmann::json::object();
    nlohmann::json inputs_ = nlohmann::json::array();
    std::vector<std::string> outputs_;
    nlohmann::json notes_ = nlohmann::json::object();
};

} // namespace hyperscore::cli
