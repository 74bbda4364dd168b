#include <fstream>

#include <json.hpp>

#include "ppdeid/core/error.hpp"
#include "ppdeid/core/hash.hpp"
#include "ppdeid/eval/evaluation.hpp"

namespace ppdeid {

void write_report_json(const std::string& path, const EvalReport& report) {
    nlohmann::json j;
    j["group"] = report.group;
    j["ablation"] = to_string(report.ablation);
    j["config_hash"] = hex64(report.config_hash);
    j["threshold"] = report.threshold;
    j["original_deid_rate"] = report.original_deid_rate;
    j["deid_rate_train"] = report.deid_rate_train;
    j["deid_rate_test"] = report.deid_rate_test;
    j["ids_count"] = report.ids_count;
    j["detection_rate"]["original"]["unpadded"] = report.detection_rate_original_unpadded;
    j["detection_rate"]["original"]["padded"] = report.detection_rate_original_padded;
    j["detection_rate"]["deid"]["unpadded"] = report.detection_rate_deid_unpadded;
    j["detection_rate"]["deid"]["padded"] = report.detection_rate_deid_padded;
    j["attribute_accuracy"] = report.attribute_accuracy;
    j["mean_ssim"] = report.mean_ssim;
    std::ofstream out(path);
    if (!out) raise("evaluation", "IoError", "cannot write " + path);
    out << j.dump(2) << "\n";
}

void write_report_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) raise("evaluation", "IoError", "cannot write " + path);
    out << "metric,value\n";
    out << "group," << report.group << "\n";
    out << "ablation," << to_string(report.ablation) << "\n";
    out << "config_hash," << hex64(report.config_hash) << "\n";
    char line[128];
    auto row = [&](const char* k, double v) {
        std::snprintf(line, sizeof(line), "%s,%.9g\n", k, v);
        out << line;
    };
    row("threshold", report.threshold);
    row("original_deid_rate", report.original_deid_rate);
    row("deid_rate_train", report.deid_rate_train);
    row("deid_rate_test", report.deid_rate_test);
    out << "ids_count," << report.ids_count << "\n";
    row("detection_rate_original_unpadded", report.detection_rate_original_unpadded);
    row("detection_rate_original_padded", report.detection_rate_original_padded);
    row("detection_rate_deid_unpadded", report.detection_rate_deid_unpadded);
    row("detection_rate_deid_padded", report.detection_rate_deid_padded);
    for (const auto& [attr, acc] : report.attribute_accuracy)
        row(("attribute_accuracy_" + attr).c_str(), acc);
    row("mean_ssim", report.mean_ssim);
}

} // namespace ppdeid
