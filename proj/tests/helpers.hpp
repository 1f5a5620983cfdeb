#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "halueval/corpus.hpp"

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    auto dir = std::filesystem::temp_directory_path() /
               ("halueval_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline halueval::corpus::QASample make_sample(
    const std::string& id, const std::string& question, const std::string& answer,
    const std::vector<std::pair<std::string, std::string>>& paragraphs,
    bool answerable = true) {
    halueval::corpus::QASample s;
    s.id = id;
    s.question = question;
    s.answer = answer;
    s.answerable = answerable;
    int idx = 0;
    for (const auto& [title, text] : paragraphs)
        s.paragraphs.push_back({idx++, title, text, false});
    return s;
}

// The two-hop shooter/mayor sample used throughout the multi-hop examples.
inline halueval::corpus::QASample keles_sample() {
    auto s = make_sample(
        "keles-1", "Who was in charge in the city where İsmail Keleş was born?", "Melih Gökçek",
        {{"Melih Gökçek",
          "Melih Gökçek has been the Metropolitan Mayor of Ankara since 1994 as a politician "
          "from the Welfare Party."},
         {"İsmail Keleş",
          "İsmail Keleş (born March 5, 1988 in Ankara, Turkey) is a Turkish sport shooter "
          "competing in the pistol events."}});
    s.decomposition = {{"What is the place of birth of İsmail Keleş?", "Ankara"},
                       {"Who was in charge of Ankara?", "Melih Gökçek"}};
    return s;
}

inline halueval::corpus::QASample tepuka_sample() {
    return make_sample(
        "tepuka-1", "Who discovered the country Tepuka is located in?", "Álvaro de Mendaña",
        {{"Tuvalu",
          "In 1568, Spanish navigator Álvaro de Mendaña was the first European to sail through "
          "the archipelago, sighting the island of Nui."},
         {"Tepuka",
          "Tepuka is an island eighteen kilometers west of Fongafale, in the northwest of "
          "Funafuti, the main atoll of the Oceanian nation of Tuvalu."}});
}

inline halueval::corpus::QASample creeping_death_sample() {
    return make_sample(
        "creeping-death-1", "Who did the band of the song Creeping Death collaborate with?",
        "San Francisco Symphony",
        {{"Creeping Death",
          "\"Creeping Death\" is a song by the American heavy metal band Metallica. The "
          "Scorpions had an artistic collaboration with the Berlin Philharmonic. Metallica's "
          "similar collaboration (S&M) was with the San Francisco Symphony."}});
}

inline std::string musique_line(const halueval::corpus::QASample& s) {
    return halueval::corpus::to_json(s).dump();
}

}  // namespace testutil
