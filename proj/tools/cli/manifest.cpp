#include "cli/manifest.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <fstream>

#include "hyperscore/error.hpp"

namespace hyperscore::cli {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_update(std::uint64_t& h, const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= kFnvPrime;
    }
}

void fnv_file(std::uint64_t& h, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot read " + path.string());
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        fnv_update(h, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
}

std::string hex(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

} // namespace

std::string digest_path(const std::filesystem::path& path) {
    std::uint64_t h = kFnvOffset;
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::recursive_directory_iterator(path)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const auto rel = std::filesystem::relative(f, path).generic_string();
            fnv_update(h, rel.data(), rel.size() + 1);
            fnv_file(h, f);
        }
    } else {
        fnv_file(h, path);
    }
    return hex(h);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), started_at_(utc_timestamp()) {}

void RunManifest::input(const std::filesystem::path& path) {
    inputs_.push_back({{"path", path.string()}, {"fnv1a64", digest_path(path)}});
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& p : outputs_) {
        nlohmann::json o{{"path", p}};
        if (std::filesystem::exists(p)) o["fnv1a64"] = digest_path(p);
        outputs.push_back(std::move(o));
    }
    return {
        {"tool", "hyperscore"},
        {"version", HYPERSCORE_VERSION},
        {"command", command_},
        {"argv", argv_},
        {"options", options_},
        {"seeds", seeds_},
        {"inputs", inputs_},
        {"outputs", outputs},
        {"notes", notes_},
        {"started_at", started_at_},
        {"finished_at", finished_at_},
    };
}

void RunManifest::write(const std::filesystem::path& path) {
    finished_at_ = utc_timestamp();
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise(ErrorKind::Io, "cannot write manifest " + path.string());
    out << to_json().dump(2) << '\n';
    if (!out) raise(ErrorKind::Io, "manifest write failed: " + path.string());
}

} // namespace hyperscore::cli
