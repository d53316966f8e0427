#pragma once

#include "pad/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pad {

struct ArtifactClass {
    int id = 0;
    std::string name;
};

/// Class id 0 is always "clean"; ids 1..K are artifact types.
struct ClassTable {
    std::vector<ArtifactClass> classes;

    static ClassTable defaults(); // clean, ghosting, lens_flare, moire
    static ClassTable from_artifact_names(const std::vector<std::string>& names);

    int K() const { return static_cast<int>(classes.size()) - 1; }
    const ArtifactClass& by_id(int id) const;
    std::optional<int> id_of(const std::string& name) const;
    void validate() const;
};

enum class Origin { real, synthetic, clean };
enum class Split { train, val, test };

std::string to_string(Origin o);
std::string to_string(Split s);
Origin origin_from_string(const std::string& s);
Split split_from_string(const std::string& s);

struct Sample {
    std::string id;
    std::string image_path; // relative to the manifest directory
    std::string mask_path;  // empty for clean samples without a mask file
    int class_id = 0;
    Origin origin = Origin::clean;
    Image image;
    Mask mask;
    std::optional<double> phi;       // blend factor used at synthesis time
    std::optional<std::string> object_name;
};

struct Violation {
    std::string sample_id;
    std::string reason;
};

/// Checks every Sample invariant; violations are data, not failures.
std::vector<Violation> validate_sample(const Sample& sample);

struct DatasetManifest {
    std::vector<Sample> samples;
    ClassTable class_table;
    std::map<std::string, Split> split_assignments;
    std::filesystem::path base_dir;

    std::vector<const Sample*> split(Split s) const;
    const Sample* by_id(const std::string& id) const;
};

/// Content-addressed sample id: hash of the relative image path.
std::string sample_id_for_path(const std::string& relative_image_path);

/// Loads and fully validates a line-delimited manifest. Every referenced
/// image/mask is read and checked; the error message lists each offending
/// sample id with its reason.
DatasetManifest load_manifest(const std::filesystem::path& path,
                              const ClassTable& table = ClassTable::defaults());

/// Writes records in load_manifest's format (pixels are not rewritten;
/// image/mask files must already exist at their recorded paths).
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Deterministic stratified split over (class, origin) groups.
/// Ratios are (train, val, test) and must sum to 1 within 1e-9.
DatasetManifest split_dataset(DatasetManifest manifest, const std::array<double, 3>& ratios,
                              std::uint64_t seed);

std::map<std::string, int> class_histogram(const DatasetManifest& manifest);

} // namespace pad
