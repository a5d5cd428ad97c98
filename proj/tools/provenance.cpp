#include "provenance.hpp"

#include <fstream>

#include "snapcluster/error.hpp"
#include "snapcluster/version.hpp"

namespace fs = std::filesystem;

namespace snapcluster::cli {

Provenance::Provenance(std::string subcommand, std::vector<std::string> argv) {
    doc_["tool"] = "snapcluster";
    doc_["version"] = kVersion;
    doc_["subcommand"] = std::move(subcommand);
    doc_["argv"] = std::move(argv);
    doc_["options"] = nlohmann::json::object();
    doc_["inputs"] = nlohmann::json::array();
    doc_["seeds"] = nlohmann::json::object();
    doc_["outputs"] = nlohmann::json::array();
}

void Provenance::input(const fs::path& path) {
    nlohmann::json rec;
    rec["path"] = path.string();
    std::error_code ec;
    if (fs::is_regular_file(path, ec)) {
        rec["bytes"] = fs::file_size(path, ec);
    } else if (fs::is_directory(path, ec)) {
        rec["directory"] = true;
    }
    doc_["inputs"].push_back(std::move(rec));
}

fs::path Provenance::write_for(const fs::path& artifact) const {
    fs::path target = fs::is_directory(artifact) ? artifact / "provenance.json" : fs::path(artifact.string() + ".prov.json");
    std::ofstream out(target);
    if (!out) throw IoError("cannot write " + target.string());
    out << doc_.dump(2) << '\n';
    if (!out) throw IoError("write failed on " + target.string());
    return target;
}

}  // namespace snapcluster::cli
