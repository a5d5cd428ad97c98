#pragma once
// Provenance records written next to every CLI artifact.
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace snapcluster::cli {

class Provenance {
public:
    Provenance(std::string subcommand, std::vector<std::string> argv);

    void option(const std::string& name, nlohmann::json value) { doc_["options"][name] = std::move(value); }
    void input(const std::filesystem::path& path);
    void seed(const std::string& name, std::uint64_t value) { doc_["seeds"][name] = value; }
    void output(const std::filesystem::path& path) { doc_["outputs"].push_back(path.string()); }

    // <file>.prov.json for file artifacts, <dir>/provenance.json for directories.
    std::filesystem::path write_for(const std::filesystem::path& artifact) const;

    const nlohmann::json& json() const { return doc_; }

private:
    nlohmann::json doc_;
};

}  // namespace snapcluster::cli
