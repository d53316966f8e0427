#include "pad/manifest.hpp"

#include "pad/errors.hpp"
#include "pad/image_io.hpp"
#include "pad/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace pad {

using nlohmann::json;

ClassTable ClassTable::defaults() {
    return from_artifact_names({"ghosting", "lens_flare", "moire"});
}

ClassTable ClassTable::from_artifact_names(const std::vector<std::string>& names) {
    ClassTable t;
    t.classes.push_back({0, "clean"});
    int id = 1;
    for (const auto& n : names) {
        t.classes.push_back({id++, n});
    }
    t.validate();
    return t;
}

const ArtifactClass& ClassTable::by_id(int id) const {
    if (id < 0 || id >= static_cast<int>(classes.size())) {
        throw DataError("ClassTable: unknown class id " + std::to_string(id));
    }
    return classes[static_cast<std::size_t>(id)];
}

std::optional<int> ClassTable::id_of(const std::string& name) const {
    for (const auto& c : classes) {
        if (c.name == name) return c.id;
    }
    return std::nullopt;
}

void ClassTable::validate() const {
    if (classes.empty() || classes.front().id != 0 || classes.front().name != "clean") {
        throw DataError("ClassTable: id 0 must be \"clean\"");
    }
    std::set<std::string> names;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i].id != static_cast<int>(i)) {
            throw DataError("ClassTable: ids must be contiguous from 0");
        }
        if (!names.insert(classes[i].name).second) {
            throw DataError("ClassTable: duplicate class name \"" + classes[i].name + "\"");
        }
    }
}

std::string to_string(Origin o) {
    switch (o) {
    case Origin::real: return "real";
    case Origin::synthetic: return "synthetic";
    case Origin::clean: return "clean";
    }
    throw Error("unreachable origin");
}

std::string to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    throw Error("unreachable split");
}

Origin origin_from_string(const std::string& s) {
    if (s == "real") return Origin::real;
    if (s == "synthetic") return Origin::synthetic;
    if (s == "clean") return Origin::clean;
    throw DataError("unknown origin \"" + s + "\"");
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw DataError("unknown split \"" + s + "\"");
}

std::vector<Violation> validate_sample(const Sample& sample) {
    std::vector<Violation> out;
    if (sample.mask.rows() != sample.image.height || sample.mask.cols() != sample.image.width) {
        out.push_back({sample.id, "mask/image shape mismatch"});
        return out; // further mask checks would be misleading
    }
    if (!is_binary_mask(sample.mask)) {
        out.push_back({sample.id, "mask is not binary"});
    }
    const bool mask_empty = (sample.mask.array() != 0.0).count() == 0;
    if (sample.class_id == 0 && !mask_empty) {
        out.push_back({sample.id, "clean sample with nonzero mask"});
    }
    if (sample.class_id != 0 && mask_empty) {
        out.push_back({sample.id, "artifact sample with empty mask"});
    }
    for (int c = 0; c < 3; ++c) {
        const auto& plane = sample.image.ch[c];
        if ((plane.array() < 0.0).any() || (plane.array() > 1.0).any()) {
            out.push_back({sample.id, "image values outside [0,1]"});
            break;
        }
    }
    return out;
}

std::vector<const Sample*> DatasetManifest::split(Split s) const {
    std::vector<const Sample*> out;
    for (const auto& sample : samples) {
        auto it = split_assignments.find(sample.id);
        if (it != split_assignments.end() && it->second == s) {
            out.push_back(&sample);
        }
    }
    return out;
}

const Sample* DatasetManifest::by_id(const std::string& id) const {
    for (const auto& s : samples) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

std::string sample_id_for_path(const std::string& relative_image_path) {
    std::ostringstream out;
    out << std::hex << fnv1a64(relative_image_path);
    return out.str();
}

DatasetManifest load_manifest(const std::filesystem::path& path, const ClassTable& table) {
    table.validate();
    std::ifstream in(path);
    if (!in) {
        throw DataError("load_manifest: cannot open " + path.string());
    }
    DatasetManifest manifest;
    manifest.class_table = table;
    manifest.base_dir = path.parent_path();

    std::vector<std::string> problems;
    std::set<std::string> seen_ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            problems.push_back("line " + std::to_string(line_no) + ": malformed record (" + e.what() + ")");
            continue;
        }
        Sample s;
        try {
            s.image_path = rec.at("image_path").get<std::string>();
            s.id = rec.contains("id") ? rec.at("id").get<std::string>() : sample_id_for_path(s.image_path);
            s.class_id = rec.at("class_id").get<int>();
            s.origin = origin_from_string(rec.at("origin").get<std::string>());
            if (rec.contains("mask_path")) s.mask_path = rec.at("mask_path").get<std::string>();
            if (rec.contains("phi")) s.phi = rec.at("phi").get<double>();
            if (rec.contains("object")) s.object_name = rec.at("object").get<std::string>();
            if (s.class_id < 0 || s.class_id > table.K()) {
                throw DataError("class_id out of range");
            }
        } catch (const std::exception& e) {
            problems.push_back("line " + std::to_string(line_no) + ": malformed record (" + e.what() + ")");
            continue;
        }
        if (!seen_ids.insert(s.id).second) {
            problems.push_back("sample " + s.id + ": duplicate id");
            continue;
        }

        try {
            s.image = load_image(manifest.base_dir / s.image_path);
            if (!s.mask_path.empty()) {
                s.mask = load_mask(manifest.base_dir / s.mask_path);
            } else if (s.class_id == 0) {
                s.mask = Mask::Zero(s.image.height, s.image.width);
            } else {
                problems.push_back("sample " + s.id + ": artifact sample without mask_path");
                continue;
            }
        } catch (const std::exception& e) {
            problems.push_back("sample " + s.id + ": " + e.what());
            continue;
        }

        for (const auto& v : validate_sample(s)) {
            problems.push_back("sample " + v.sample_id + ": " + v.reason);
        }

        Split split = Split::train;
        if (rec.contains("split")) {
            try {
                split = split_from_string(rec.at("split").get<std::string>());
            } catch (const std::exception& e) {
                problems.push_back("sample " + s.id + ": " + e.what());
            }
        }
        manifest.split_assignments[s.id] = split;
        manifest.samples.push_back(std::move(s));
    }

    if (!problems.empty()) {
        std::string msg = "load_manifest: " + std::to_string(problems.size()) + " problem(s) in " + path.string();
        for (const auto& p : problems) {
            msg += "\n  - " + p;
        }
        throw DataError(msg);
    }
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("save_manifest: cannot write " + path.string());
    }
    for (const auto& s : manifest.samples) {
        json rec;
        rec["id"] = s.id;
        rec["image_path"] = s.image_path;
        if (!s.mask_path.empty()) rec["mask_path"] = s.mask_path;
        rec["class_id"] = s.class_id;
        rec["origin"] = to_string(s.origin);
        auto it = manifest.split_assignments.find(s.id);
        rec["split"] = to_string(it != manifest.split_assignments.end() ? it->second : Split::train);
        if (s.phi) rec["phi"] = *s.phi;
        if (s.object_name) rec["object"] = *s.object_name;
        out << rec.dump() << '\n';
    }
}

DatasetManifest split_dataset(DatasetManifest manifest, const std::array<double, 3>& ratios,
                              std::uint64_t seed) {
    for (double r : ratios) {
        if (r < 0.0) throw DataError("split_dataset: ratios must be >= 0");
    }
    const double total = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(total - 1.0) > 1e-9) {
        throw DataError("split_dataset: ratios must sum to 1");
    }
    int nonzero_splits = 0;
    for (double r : ratios) {
        if (r > 0.0) ++nonzero_splits;
    }

    // Group sample indices by (class, origin).
    std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
        const auto& s = manifest.samples[i];
        groups[{s.class_id, static_cast<int>(s.origin)}].push_back(i);
    }

    // Per-class counts must support the requested number of splits.
    std::map<int, int> class_counts;
    for (const auto& s : manifest.samples) {
        class_counts[s.class_id]++;
    }
    for (const auto& [cls, count] : class_counts) {
        if (count < nonzero_splits) {
            throw DataError("split_dataset: class " + manifest.class_table.by_id(cls).name +
                            " has fewer samples (" + std::to_string(count) + ") than nonzero splits (" +
                            std::to_string(nonzero_splits) + ")");
        }
    }

    Rng root(seed);
    manifest.split_assignments.clear();
    for (auto& [key, indices] : groups) {
        Rng rng = root.split("split/" + std::to_string(key.first) + "/" + std::to_string(key.second));
        // Stable order before shuffling so the result is path-set deterministic.
        std::sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
            return manifest.samples[a].id < manifest.samples[b].id;
        });
        for (std::size_t i = indices.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
            std::swap(indices[i - 1], indices[j]);
        }

        // Largest-remainder allocation of the group across splits.
        const int n = static_cast<int>(indices.size());
        std::array<int, 3> alloc{};
        std::array<double, 3> frac{};
        int assigned = 0;
        for (int s = 0; s < 3; ++s) {
            const double want = ratios[static_cast<std::size_t>(s)] * n;
            alloc[static_cast<std::size_t>(s)] = static_cast<int>(std::floor(want));
            frac[static_cast<std::size_t>(s)] = want - alloc[static_cast<std::size_t>(s)];
            assigned += alloc[static_cast<std::size_t>(s)];
        }
        int remainder = n - assigned;
        std::array<int, 3> order{0, 1, 2};
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (frac[static_cast<std::size_t>(a)] != frac[static_cast<std::size_t>(b)]) {
                return frac[static_cast<std::size_t>(a)] > frac[static_cast<std::size_t>(b)];
            }
            return a < b;
        });
        for (int i = 0; i < remainder; ++i) {
            alloc[static_cast<std::size_t>(order[static_cast<std::size_t>(i % 3)])]++;
        }

        std::size_t cursor = 0;
        const std::array<Split, 3> split_order{Split::train, Split::val, Split::test};
        for (int s = 0; s < 3; ++s) {
            for (int i = 0; i < alloc[static_cast<std::size_t>(s)]; ++i) {
                manifest.split_assignments[manifest.samples[indices[cursor++]].id] =
                    split_order[static_cast<std::size_t>(s)];
            }
        }
    }
    return manifest;
}

std::map<std::string, int> class_histogram(const DatasetManifest& manifest) {
    std::map<std::string, int> hist;
    for (const auto& c : manifest.class_table.classes) {
        hist[c.name] = 0;
    }
    for (const auto& s : manifest.samples) {
        hist[manifest.class_table.by_id(s.class_id).name]++;
    }
    return hist;
}

} // namespace pad
