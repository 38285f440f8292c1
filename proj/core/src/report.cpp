#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "figcap/errors.hpp"
#include "figcap/runner.hpp"

namespace figcap::runner {

using nlohmann::json;

namespace {

std::string fmt(double value, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
    return buf;
}

std::string fmt_opt(const json& value, int digits) {
    if (value.is_null())
        return "-";
    return fmt(value.get<double>(), digits);
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos)
        return value;
    std::string quoted = "\"";
    for (const char c : value) {
        if (c == '"')
            quoted += "\"\"";
        else
            quoted.push_back(c);
    }
    quoted.push_back('"');
    return quoted;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out)
        throw Error("cannot write report file: " + path.string());
    out << content;
}

constexpr const char* kMetricKeys[] = {"bleu1",  "bleu2",  "bleu3", "bleu4",
                                       "rouge1", "rouge2", "rouge_l"};
constexpr const char* kMetricHeaders[] = {"BLEU-1",  "BLEU-2",  "BLEU-3", "BLEU-4",
                                          "Rouge-1", "Rouge-2", "Rouge-L"};

json group_eval_to_json(const GroupEval& eval) {
    json obj;
    obj["n"] = eval.report.n;
    obj["failures"] = eval.failures;
    obj["bleu1"] = eval.report.bleu1;
    obj["bleu2"] = eval.report.bleu2;
    obj["bleu3"] = eval.report.bleu3;
    obj["bleu4"] = eval.report.bleu4;
    obj["rouge1"] = eval.report.rouge1;
    obj["rouge2"] = eval.report.rouge2;
    obj["rouge_l"] = eval.report.rouge_l;
    return obj;
}

// --- markdown / csv renderers over the canonical json docs ---------------

std::string profile_count_markdown(const json& doc) {
    std::string md = "| Group | n |";
    for (const auto* header : kMetricHeaders)
        md += std::string(" ") + header + " |";
    md += "\n|---|---|";
    for (std::size_t i = 0; i < std::size(kMetricHeaders); ++i)
        md += "---|";
    md += "\n";
    for (const auto& row : doc.at("groups")) {
        md += "| " + row.at("label").get<std::string>() + " | " +
              std::to_string(row.at("n").get<std::size_t>()) + " |";
        for (const auto* key : kMetricKeys)
            md += " " + fmt(row.at(key).get<double>(), 3) + " |";
        md += "\n";
    }
    return md;
}

std::string profile_count_csv(const json& doc) {
    std::string csv = "group,n,failures";
    for (const auto* key : kMetricKeys)
        csv += std::string(",") + key;
    csv += "\n";
    for (const auto& row : doc.at("groups")) {
        csv += csv_field(row.at("label").get<std::string>()) + "," +
               std::to_string(row.at("n").get<std::size_t>()) + "," +
               std::to_string(row.at("failures").get<std::size_t>());
        for (const auto* key : kMetricKeys)
            csv += "," + fmt(row.at(key).get<double>(), 6);
        csv += "\n";
    }
    return csv;
}

std::string ablation_markdown(const json& doc) {
    std::string md = "| Profile | Target |";
    for (const auto* header : kMetricHeaders)
        md += std::string(" ") + header + " |";
    md += "\n|---|---|";
    for (std::size_t i = 0; i < std::size(kMetricHeaders); ++i)
        md += "---|";
    md += "\n";
    for (const auto& row : doc.at("rows")) {
        md += "| " + row.at("profile").get<std::string>() + " | " +
              row.at("target").get<std::string>() + " |";
        for (const auto* key : kMetricKeys)
            md += " " + fmt(row.at(key).get<double>(), 3) + " |";
        md += "\n";
    }
    return md;
}

std::string ablation_csv(const json& doc) {
    std::string csv = "preset,profile,target,n,failures";
    for (const auto* key : kMetricKeys)
        csv += std::string(",") + key;
    csv += "\n";
    for (const auto& row : doc.at("rows")) {
        csv += csv_field(row.at("preset").get<std::string>()) + "," +
               csv_field(row.at("profile").get<std::string>()) + "," +
               csv_field(row.at("target").get<std::string>()) + "," +
               std::to_string(row.at("n").get<std::size_t>()) + "," +
               std::to_string(row.at("failures").get<std::size_t>());
        for (const auto* key : kMetricKeys)
            csv += "," + fmt(row.at(key).get<double>(), 6);
        csv += "\n";
    }
    return csv;
}

std::string tradeoff_markdown(const json& doc) {
    std::string md =
        "| Target Quality | Quality Score Forced-Q6 | Quality Score Predicted-Q "
        "| ROUGE-L Forced-Q6 | ROUGE-L Predicted-Q | n |\n"
        "|---|---|---|---|---|---|\n";
    for (const auto& row : doc.at("rows")) {
        md += "| " + std::to_string(row.at("target_quality").get<int>()) + " | " +
              fmt_opt(row.at("quality_forced_q6"), 3) + " | " +
              fmt_opt(row.at("quality_predicted_q"), 3) + " | " +
              fmt_opt(row.at("rouge_l_forced_q6"), 3) + " | " +
              fmt_opt(row.at("rouge_l_predicted_q"), 3) + " | " +
              std::to_string(row.at("n").get<std::size_t>()) + " |\n";
    }
    md += "\nMean quality over all tasks: Forced-Q6 " +
          fmt_opt(doc.at("forced_mean_quality"), 3) + ", Predicted-Q " +
          fmt_opt(doc.at("predicted_mean_quality"), 3) + ".\n";
    return md;
}

std::string tradeoff_csv(const json& doc) {
    std::string csv = "target_quality,n,quality_forced_q6,quality_predicted_q,"
                      "rouge_l_forced_q6,rouge_l_predicted_q,failed_forced,failed_predicted\n";
    auto opt_cell = [](const json& value) {
        return value.is_null() ? std::string() : fmt(value.get<double>(), 6);
    };
    for (const auto& row : doc.at("rows")) {
        csv += std::to_string(row.at("target_quality").get<int>()) + "," +
               std::to_string(row.at("n").get<std::size_t>()) + "," +
               opt_cell(row.at("quality_forced_q6")) + "," +
               opt_cell(row.at("quality_predicted_q")) + "," +
               opt_cell(row.at("rouge_l_forced_q6")) + "," +
               opt_cell(row.at("rouge_l_predicted_q")) + "," +
               std::to_string(row.at("failed_forced").get<std::size_t>()) + "," +
               std::to_string(row.at("failed_predicted").get<std::size_t>()) + "\n";
    }
    return csv;
}

std::string agreement_markdown(const json& doc) {
    std::string md = "Spearman: " + fmt(doc.at("spearman").get<double>(), 3) +
                     "\nQWK: " + fmt(doc.at("qwk").get<double>(), 3) +
                     "\nPairs: " + std::to_string(doc.at("n").get<long long>()) + "\n\n";
    md += "| a\\b | 1 | 2 | 3 | 4 | 5 | 6 |\n|---|---|---|---|---|---|---|\n";
    const auto& matrix = doc.at("confusion");
    for (int i = 0; i < 6; ++i) {
        md += "| " + std::to_string(i + 1) + " |";
        for (int j = 0; j < 6; ++j)
            md += " " + std::to_string(matrix.at(i).at(j).get<long long>()) + " |";
        md += "\n";
    }
    return md;
}

std::string agreement_csv(const json& doc) {
    std::string csv = "score_a,1,2,3,4,5,6\n";
    const auto& matrix = doc.at("confusion");
    for (int i = 0; i < 6; ++i) {
        csv += std::to_string(i + 1);
        for (int j = 0; j < 6; ++j)
            csv += "," + std::to_string(matrix.at(i).at(j).get<long long>());
        csv += "\n";
    }
    return csv;
}

std::vector<std::filesystem::path> emit_doc(const json& doc,
                                            const std::filesystem::path& out_dir,
                                            const std::string& basename,
                                            const EmitOptions& options) {
    std::vector<std::filesystem::path> written;
    const auto json_path = out_dir / (basename + ".json");
    write_file(json_path, doc.dump(2) + "\n");
    written.push_back(json_path);

    const std::string kind = doc.at("kind").get<std::string>();
    std::string md, csv;
    if (kind == "profile_count_report") {
        md = profile_count_markdown(doc);
        csv = profile_count_csv(doc);
    } else if (kind == "ablation_report") {
        md = ablation_markdown(doc);
        csv = ablation_csv(doc);
    } else if (kind == "tradeoff_report") {
        md = tradeoff_markdown(doc);
        csv = tradeoff_csv(doc);
    } else if (kind == "agreement_report") {
        md = agreement_markdown(doc);
        csv = agreement_csv(doc);
    } else {
        throw ConfigError("unknown report kind: " + kind);
    }

    if (options.markdown) {
        const auto path = out_dir / (basename + ".md");
        write_file(path, md);
        written.push_back(path);
    }
    if (options.csv) {
        const auto path = out_dir / (basename + ".csv");
        write_file(path, csv);
        written.push_back(path);
    }
    return written;
}

} // namespace

std::vector<std::filesystem::path> emit_profile_count_report(
    const std::map<std::string, GroupEval>& groups, const std::filesystem::path& out_dir,
    const std::string& basename, const EmitOptions& options) {
    std::map<std::string, std::vector<std::size_t>> label_stub;
    for (const auto& [label, eval] : groups)
        label_stub[label] = {};
    const auto ordered = corpus::ordered_group_labels(label_stub);

    json doc;
    doc["kind"] = "profile_count_report";
    json rows = json::array();
    for (const auto& label : ordered) {
        json row = group_eval_to_json(groups.at(label));
        row["label"] = label;
        rows.push_back(std::move(row));
    }
    doc["groups"] = std::move(rows);
    return emit_doc(doc, out_dir, basename, options);
}

std::vector<std::filesystem::path> emit_ablation_report(
    const std::map<promptkit::ConfigPreset, GroupEval>& rows,
    const std::filesystem::path& out_dir, const std::string& basename,
    const EmitOptions& options) {
    json doc;
    doc["kind"] = "ablation_report";
    json out_rows = json::array();
    for (const auto preset : promptkit::kAllPresets) {
        auto it = rows.find(preset);
        if (it == rows.end())
            continue;
        json row = group_eval_to_json(it->second);
        row["preset"] = promptkit::preset_name(preset);
        row["profile"] = promptkit::preset_profile_label(preset);
        row["target"] = promptkit::preset_target_label(preset);
        out_rows.push_back(std::move(row));
    }
    doc["rows"] = std::move(out_rows);
    return emit_doc(doc, out_dir, basename, options);
}

std::vector<std::filesystem::path> emit_tradeoff_report(const TradeoffReport& report,
                                                        const std::filesystem::path& out_dir,
                                                        const std::string& basename,
                                                        const EmitOptions& options) {
    auto opt_json = [](const std::optional<double>& value) {
        return value ? json(*value) : json(nullptr);
    };

    json doc;
    doc["kind"] = "tradeoff_report";
    json rows = json::array();
    for (const auto& row : report.rows) {
        json obj;
        obj["target_quality"] = row.target_quality_bucket;
        obj["n"] = row.n;
        obj["quality_forced_q6"] = opt_json(row.mean_quality_forced);
        obj["quality_predicted_q"] = opt_json(row.mean_quality_predicted);
        obj["rouge_l_forced_q6"] = opt_json(row.rouge_l_forced);
        obj["rouge_l_predicted_q"] = opt_json(row.rouge_l_predicted);
        obj["failed_forced"] = row.failed_forced;
        obj["failed_predicted"] = row.failed_predicted;
        rows.push_back(std::move(obj));
    }
    doc["rows"] = std::move(rows);
    doc["forced_quality_hist"] = report.forced_quality_hist;
    doc["predicted_quality_hist"] = report.predicted_quality_hist;
    doc["forced_mean_quality"] = opt_json(report.forced_mean_quality);
    doc["predicted_mean_quality"] = opt_json(report.predicted_mean_quality);
    doc["tasks"] = report.tasks;
    return emit_doc(doc, out_dir, basename, options);
}

std::vector<std::filesystem::path> emit_agreement_report(
    const metrics::AgreementReport& report, const std::filesystem::path& out_dir,
    const std::string& basename, const EmitOptions& options) {
    json doc;
    doc["kind"] = "agreement_report";
    doc["spearman"] = report.spearman;
    doc["qwk"] = report.qwk;
    doc["n"] = report.confusion.total();
    json matrix = json::array();
    for (int i = 1; i <= 6; ++i) {
        json row = json::array();
        for (int j = 1; j <= 6; ++j)
            row.push_back(report.confusion.at(i, j));
        matrix.push_back(std::move(row));
    }
    doc["confusion"] = std::move(matrix);
    return emit_doc(doc, out_dir, basename, options);
}

std::vector<std::filesystem::path> render_report_file(const std::filesystem::path& results_json,
                                                      const std::filesystem::path& out_dir,
                                                      const EmitOptions& options) {
    std::ifstream in(results_json);
    if (!in)
        throw ConfigError("results file not found: " + results_json.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& ex) {
        throw ConfigError("results file is not valid JSON: " + std::string(ex.what()));
    }
    if (!doc.contains("kind"))
        throw ConfigError("results file has no 'kind' field: " + results_json.string());
    return emit_doc(doc, out_dir, results_json.stem().string(), options);
}

namespace {

std::string xml_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (const char c : text) {
        switch (c) {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        default:
            out.push_back(c);
        }
    }
    return out;
}

std::string cell_fill(double intensity) {
    // white -> steel blue ramp
    const auto channel = [&](int from, int to) {
        return static_cast<int>(std::lround(from + (to - from) * intensity));
    };
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", channel(255, 33), channel(255, 102),
                  channel(255, 172));
    return buf;
}

} // namespace

void emit_confusion_plot(const metrics::AgreementReport& report,
                         const std::filesystem::path& path, const std::string& row_label,
                         const std::string& col_label) {
    const auto& matrix = report.confusion;
    if (matrix.levels() != 6)
        throw InvalidArgumentError("confusion plot expects a 6x6 matrix");

    constexpr int kCell = 56;
    constexpr int kLeft = 72;
    constexpr int kTop = 64;
    constexpr int kRight = 24;
    constexpr int kBottom = 72;
    const int width = kLeft + 6 * kCell + kRight;
    const int height = kTop + 6 * kCell + kBottom;

    long long max_count = 0;
    for (int i = 1; i <= 6; ++i)
        for (int j = 1; j <= 6; ++j)
            max_count = std::max(max_count, matrix.at(i, j));

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
           std::to_string(width) + " " + std::to_string(height) + "\">\n";
    svg += "<rect width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" fill=\"#ffffff\"/>\n";

    svg += "<text x=\"" + std::to_string(width / 2) +
           "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\" "
           "font-weight=\"bold\">Score agreement</text>\n";
    svg += "<text x=\"" + std::to_string(width / 2) +
           "\" y=\"44\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "fill=\"#444444\">Spearman " +
           fmt(report.spearman, 3) + " / QWK " + fmt(report.qwk, 3) + "</text>\n";

    for (int i = 1; i <= 6; ++i) {
        for (int j = 1; j <= 6; ++j) {
            const long long count = matrix.at(i, j);
            const double intensity =
                max_count == 0 ? 0.0
                               : static_cast<double>(count) / static_cast<double>(max_count);
            const int x = kLeft + (j - 1) * kCell;
            const int y = kTop + (i - 1) * kCell;
            svg += "<rect data-cell=\"" + std::to_string(i) + "," + std::to_string(j) +
                   "\" x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
                   "\" width=\"" + std::to_string(kCell) + "\" height=\"" +
                   std::to_string(kCell) + "\" fill=\"" + cell_fill(intensity) +
                   "\" stroke=\"#cccccc\"/>\n";
            svg += "<text data-cell=\"" + std::to_string(i) + "," + std::to_string(j) +
                   "\" x=\"" + std::to_string(x + kCell / 2) + "\" y=\"" +
                   std::to_string(y + kCell / 2 + 5) +
                   "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
                   "fill=\"" +
                   (intensity > 0.5 ? "#ffffff" : "#1a1a1a") + "\">" + std::to_string(count) +
                   "</text>\n";
        }
    }

    for (int i = 1; i <= 6; ++i) {
        svg += "<text x=\"" + std::to_string(kLeft - 12) + "\" y=\"" +
               std::to_string(kTop + (i - 1) * kCell + kCell / 2 + 5) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"13\">" +
               std::to_string(i) + "</text>\n";
        svg += "<text x=\"" + std::to_string(kLeft + (i - 1) * kCell + kCell / 2) + "\" y=\"" +
               std::to_string(kTop + 6 * kCell + 20) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
               std::to_string(i) + "</text>\n";
    }

    svg += "<text x=\"" + std::to_string(kLeft + 3 * kCell) + "\" y=\"" +
           std::to_string(kTop + 6 * kCell + 48) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
           xml_escape(col_label) + "</text>\n";
    svg += "<text x=\"20\" y=\"" + std::to_string(kTop + 3 * kCell) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 20 " +
           std::to_string(kTop + 3 * kCell) + ")\">" + xml_escape(row_label) + "</text>\n";
    svg += "</svg>\n";

    write_file(path, svg);
}

} // namespace figcap::runner
