#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dscnn/tensor.hpp"

namespace dscnn {

enum class Modality { rgb, depth };
enum class Role { train, test };

inline std::string modality_name(Modality m) { return m == Modality::rgb ? "rgb" : "depth"; }
inline std::string role_name(Role r) { return r == Role::train ? "train" : "test"; }

inline Modality modality_from_name(const std::string& s) {
    if (s == "rgb") return Modality::rgb;
    if (s == "depth") return Modality::depth;
    throw std::invalid_argument("unknown modality '" + s + "' (want rgb or depth)");
}

inline Role role_from_name(const std::string& s) {
    if (s == "train") return Role::train;
    if (s == "test") return Role::test;
    throw std::invalid_argument("unknown role '" + s + "' (want train or test)");
}

struct ManifestRecord {
    std::string path;
    std::string label;
    Modality modality = Modality::rgb;
    Role role = Role::train;
    std::string sequence_id;  // empty = still image
    int frame_index = -1;     // -1 = none
};

/// A parsed dataset manifest plus the taxonomy derived from it (sorted
/// unique labels, shared by every consumer so class indices are stable).
struct Manifest {
    std::string base_dir;
    std::vector<ManifestRecord> records;
    std::vector<std::string> taxonomy;

    int label_index(const std::string& label) const {
        const auto it = std::lower_bound(taxonomy.begin(), taxonomy.end(), label);
        if (it == taxonomy.end() || *it != label)
            throw std::invalid_argument("label '" + label + "' not in taxonomy");
        return static_cast<int>(it - taxonomy.begin());
    }

    std::string resolve(const ManifestRecord& rec) const {
        const std::filesystem::path p(rec.path);
        if (p.is_absolute() || base_dir.empty()) return rec.path;
        return (std::filesystem::path(base_dir) / p).string();
    }
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

}  // namespace detail

/// Parses the tab-separated manifest format
/// (path/label/modality/role/sequence_id/frame_index, "-" marking absent
/// optional fields) and validates the dataset invariants: referenced files
/// exist, every class appears in the train split, and records of one
/// sequence agree on label and role.
inline Manifest load_manifest(const std::string& path, bool check_files = true) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open manifest '" + path + "'");
    Manifest m;
    m.base_dir = std::filesystem::path(path).parent_path().string();

    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty() || trimmed[0] == '#') continue;

        const std::vector<std::string> fields = detail::split_tabs(line);
        if (fields.size() != 6)
            throw std::runtime_error("manifest '" + path + "' line " + std::to_string(lineno) + ": want 6 tab-separated fields, got " +
                                     std::to_string(fields.size()));
        ManifestRecord rec;
        rec.path = fields[0];
        rec.label = fields[1];
        try {
            rec.modality = modality_from_name(fields[2]);
            rec.role = role_from_name(fields[3]);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("manifest '" + path + "' line " + std::to_string(lineno) + ": " + e.what());
        }
        rec.sequence_id = fields[4] == "-" ? "" : fields[4];
        if (fields[5] != "-") {
            try {
                rec.frame_index = std::stoi(fields[5]);
            } catch (const std::exception&) {
                throw std::runtime_error("manifest '" + path + "' line " + std::to_string(lineno) +
                                         ": bad frame index '" + fields[5] + "'");
            }
            if (rec.frame_index < 0)
                throw std::runtime_error("manifest '" + path + "' line " + std::to_string(lineno) +
                                         ": negative frame index");
        }
        if (rec.path.empty() || rec.label.empty())
            throw std::runtime_error("manifest '" + path + "' line " + std::to_string(lineno) +
                                     ": empty path or label");
        m.records.push_back(std::move(rec));
    }
    if (m.records.empty()) throw std::runtime_error("manifest '" + path + "' has no records");

    for (const ManifestRecord& rec : m.records) m.taxonomy.push_back(rec.label);
    std::sort(m.taxonomy.begin(), m.taxonomy.end());
    m.taxonomy.erase(std::unique(m.taxonomy.begin(), m.taxonomy.end()), m.taxonomy.end());

    std::vector<std::string> train_labels;
    for (const ManifestRecord& rec : m.records)
        if (rec.role == Role::train) train_labels.push_back(rec.label);
    std::sort(train_labels.begin(), train_labels.end());
    for (const std::string& label : m.taxonomy)
        if (!std::binary_search(train_labels.begin(), train_labels.end(), label))
            throw std::runtime_error("manifest '" + path + "': class '" + label +
                                     "' has no training records");

    std::map<std::string, std::pair<std::string, Role>> seq_info;
    for (const ManifestRecord& rec : m.records) {
        if (rec.sequence_id.empty()) continue;
        const auto it = seq_info.find(rec.sequence_id);
        if (it == seq_info.end()) {
            seq_info[rec.sequence_id] = {rec.label, rec.role};
        } else if (it->second.first != rec.label || it->second.second != rec.role) {
            throw std::runtime_error("manifest '" + path + "': sequence '" + rec.sequence_id +
                                     "' mixes labels or roles");
        }
    }

    if (check_files) {
        for (const ManifestRecord& rec : m.records) {
            const std::string full = m.resolve(rec);
            if (!std::filesystem::exists(full))
                throw std::runtime_error("manifest '" + path + "': missing file '" + full + "'");
        }
    }
    return m;
}

inline void save_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << "# path\tlabel\tmodality\trole\tsequence_id\tframe_index\n";
    for (const ManifestRecord& rec : records) {
        f << rec.path << '\t' << rec.label << '\t' << modality_name(rec.modality) << '\t'
          << role_name(rec.role) << '\t' << (rec.sequence_id.empty() ? "-" : rec.sequence_id) << '\t';
        if (rec.frame_index < 0)
            f << '-';
        else
            f << rec.frame_index;
        f << '\n';
    }
    if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace dscnn
