#include "pad/report.hpp"

#include "pad/errors.hpp"

#include <nlohmann/json.hpp>

#include <iomanip>
#include <sstream>

using nlohmann::json;

namespace pad {

namespace {

json bundle_to_json(const MetricBundle& b) {
    json j;
    j["auroc"] = b.auroc;
    j["ap"] = b.ap;
    j["f1"] = b.f1;
    j["f1_threshold"] = b.f1_threshold;
    if (b.aupro) {
        j["aupro"] = *b.aupro;
    } else {
        j["aupro"] = nullptr;
    }
    return j;
}

MetricBundle bundle_from_json(const json& j) {
    MetricBundle b;
    b.auroc = j.at("auroc").get<double>();
    b.ap = j.at("ap").get<double>();
    b.f1 = j.at("f1").get<double>();
    b.f1_threshold = j.at("f1_threshold").get<double>();
    if (!j.at("aupro").is_null()) b.aupro = j.at("aupro").get<double>();
    return b;
}

std::string cell(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100.0 * v;
    return os.str();
}

void row(std::ostringstream& os, const std::string& name, int name_width,
         const std::vector<std::string>& cells) {
    os << std::left << std::setw(name_width) << name;
    for (const auto& c : cells) os << std::right << std::setw(10) << c;
    os << '\n';
}

} // namespace

std::string report_to_json(const MetricReport& report) {
    json j;
    j["format"] = "pad-report-v1";
    j["fpr_cap"] = report.fpr_cap;
    j["samples_evaluated"] = report.samples_evaluated;

    json counts = json::object();
    for (const auto& [k, n] : report.class_counts) counts[std::to_string(k)] = n;
    j["class_counts"] = counts;
    json names = json::object();
    for (const auto& [k, n] : report.class_names) names[std::to_string(k)] = n;
    j["class_names"] = names;

    json cls;
    cls["macro"] = bundle_to_json(report.cls_macro);
    cls["binary"] = bundle_to_json(report.cls_binary);
    json per_cls = json::object();
    for (const auto& [k, b] : report.per_class_cls) per_cls[std::to_string(k)] = bundle_to_json(b);
    cls["per_class"] = per_cls;
    j["classification"] = cls;

    json seg;
    seg["pooled"] = bundle_to_json(report.seg);
    json per_seg = json::object();
    for (const auto& [k, b] : report.per_class_seg) per_seg[std::to_string(k)] = bundle_to_json(b);
    seg["per_class"] = per_seg;
    j["segmentation"] = seg;

    return j.dump(2) + "\n";
}

MetricReport report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError("report_from_json: invalid JSON: " + std::string(e.what()));
    }
    try {
        if (!j.contains("format") || j["format"] != "pad-report-v1") {
            throw DataError("report_from_json: unknown report format");
        }
        MetricReport r;
        r.fpr_cap = j.at("fpr_cap").get<double>();
        r.samples_evaluated = j.at("samples_evaluated").get<int>();
        for (const auto& [k, v] : j.at("class_counts").items()) {
            r.class_counts[std::stoi(k)] = v.get<int>();
        }
        for (const auto& [k, v] : j.at("class_names").items()) {
            r.class_names[std::stoi(k)] = v.get<std::string>();
        }
        const json& cls = j.at("classification");
        r.cls_macro = bundle_from_json(cls.at("macro"));
        r.cls_binary = bundle_from_json(cls.at("binary"));
        for (const auto& [k, v] : cls.at("per_class").items()) {
            r.per_class_cls[std::stoi(k)] = bundle_from_json(v);
        }
        const json& seg = j.at("segmentation");
        r.seg = bundle_from_json(seg.at("pooled"));
        for (const auto& [k, v] : seg.at("per_class").items()) {
            r.per_class_seg[std::stoi(k)] = bundle_from_json(v);
        }
        return r;
    } catch (const json::exception& e) {
        throw DataError("report_from_json: malformed report: " + std::string(e.what()));
    }
}

std::string render_metric_table(const MetricReport& report) {
    int name_width = static_cast<int>(std::string("artifact-vs-clean").size());
    for (const auto& [k, name] : report.class_names) {
        if (k > 0) name_width = std::max(name_width, static_cast<int>(name.size()));
    }
    name_width += 2;

    std::ostringstream os;
    row(os, "", name_width,
        {"C-AUROC", "C-AP", "C-F1", "S-AUROC", "S-AP", "S-F1", "S-AUPRO"});

    auto seg_cells = [](const MetricBundle& b) {
        return std::vector<std::string>{cell(b.auroc), cell(b.ap), cell(b.f1),
                                        b.aupro ? cell(*b.aupro) : "n/a"};
    };

    {
        std::vector<std::string> cells{cell(report.cls_macro.auroc), cell(report.cls_macro.ap),
                                       cell(report.cls_macro.f1)};
        for (auto& c : seg_cells(report.seg)) cells.push_back(c);
        row(os, "macro", name_width, cells);
    }
    // The binary reduction shares the pooled segmentation pixels with the
    // macro row, so its seg cells stay empty rather than repeating them.
    row(os, "artifact-vs-clean", name_width,
        {cell(report.cls_binary.auroc), cell(report.cls_binary.ap), cell(report.cls_binary.f1),
         "n/a", "n/a", "n/a", "n/a"});

    for (const auto& [k, cls_b] : report.per_class_cls) {
        std::vector<std::string> cells{cell(cls_b.auroc), cell(cls_b.ap), cell(cls_b.f1)};
        auto seg_it = report.per_class_seg.find(k);
        if (seg_it != report.per_class_seg.end()) {
            for (auto& c : seg_cells(seg_it->second)) cells.push_back(c);
        } else {
            for (int i = 0; i < 4; ++i) cells.push_back("n/a");
        }
        auto name_it = report.class_names.find(k);
        row(os, name_it != report.class_names.end() ? name_it->second : std::to_string(k),
            name_width, cells);
    }
    return os.str();
}

std::string render_generalization(const GeneralizationReport& reports) {
    const int name_width = 12;
    std::ostringstream os;
    row(os, "", name_width, {"C-AP", "S-AP", "S-F1"});
    row(os, "synthetic", name_width,
        {cell(reports.synthetic.cls_macro.ap), cell(reports.synthetic.seg.ap),
         cell(reports.synthetic.seg.f1)});
    row(os, "real", name_width,
        {cell(reports.real.cls_macro.ap), cell(reports.real.seg.ap),
         cell(reports.real.seg.f1)});
    return os.str();
}

std::string render_anchor_stats(const AnchorSeparationStats& stats) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6);
    os << "clean-vs-artifact cosine mean: " << stats.clean_vs_artifact_mean_before << " -> "
       << stats.clean_vs_artifact_mean_after << '\n';
    const auto print_matrix = [&os](const char* title, const Eigen::MatrixXd& m) {
        os << title << '\n';
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            os << "  ";
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                os << std::setw(10) << m(i, j);
            }
            os << '\n';
        }
    };
    print_matrix("artifact pairwise cosines before:", stats.artifact_pairwise_before);
    print_matrix("artifact pairwise cosines after:", stats.artifact_pairwise_after);
    return os.str();
}

} // namespace pad
