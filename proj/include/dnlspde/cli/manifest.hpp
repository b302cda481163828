#pragma once

// Artifact sink and reproducibility manifest. Every artifact is written
// through ArtifactWriter so its SHA-256 digest lands in manifest.json.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

namespace dnlspde::cli {

inline constexpr std::string_view kVersion = "0.1.0";

inline std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct ArtifactRecord {
    std::string name;
    std::string sha256;
    std::size_t bytes = 0;
};

class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& directory() const noexcept { return dir_; }
    const std::vector<ArtifactRecord>& records() const noexcept { return records_; }

    void write(const std::string& name, std::string_view content) {
        write_raw(name, content);
        records_.push_back({name, sha256_hex(content), content.size()});
    }

    /// Writes without recording a digest (the manifest itself).
    void write_raw(const std::string& name, std::string_view content) const {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed: " + (dir_ / name).string());
    }

private:
    std::filesystem::path dir_;
    std::vector<ArtifactRecord> records_;
};

struct RunManifest {
    std::string experiment;
    std::string config_path;
    std::string config_hash;
    std::string started_at;
    std::string finished_at;
    unsigned workers = 1;
    std::uint64_t base_seed = 0;
    std::vector<ArtifactRecord> files;
    std::vector<std::string> errors;
    int exit_code = 0;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json f = nlohmann::ordered_json::array();
        for (const auto& r : files) f.push_back({{"name", r.name}, {"sha256", r.sha256}, {"bytes", r.bytes}});
        return {{"tool", "dnlspde"},
                {"version", kVersion},
                {"experiment", experiment},
                {"config_path", config_path},
                {"config_hash", config_hash},
                {"started_at", started_at},
                {"finished_at", finished_at},
                {"workers", workers},
                {"seeds", {{"base_seed", base_seed}}},
                {"files", std::move(f)},
                {"errors", errors},
                {"exit_code", exit_code}};
    }
};

} // namespace dnlspde::cli
