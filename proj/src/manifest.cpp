#include "halueval/manifest.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "halueval/hash.hpp"
#include "halueval/prompts.hpp"

namespace halueval::cli {

long long now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void RunManifest::add_output(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot digest output file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    output_digests[path] = digest_hex(buf.str());
}

void RunManifest::write(const std::string& path) const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["template_version"] =
        template_version.empty() ? prompts::kTemplateVersion : template_version;
    j["endpoint_hash"] = endpoint_hash;
    j["start_ms"] = start_ms;
    j["end_ms"] = end_ms;
    j["output_digests"] = output_digests;
    j["status"] = status;
    if (!failure_cause.empty()) j["failure_cause"] = failure_cause;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace halueval::cli
