#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace halueval::cli {

/// Per-run provenance record; written for every command, including failed
/// runs (with the failure cause).
struct RunManifest {
    std::string command;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    uint64_t seed = 0;
    std::string template_version;
    std::string endpoint_hash;  // hashed identity, never the raw credential
    long long start_ms = 0;
    long long end_ms = 0;
    std::map<std::string, std::string> output_digests;  // path -> content digest
    std::string status = "success";
    std::string failure_cause;

    void add_output(const std::string& path);  // digests the file's bytes
    void write(const std::string& path) const;
};

long long now_ms();

}  // namespace halueval::cli
