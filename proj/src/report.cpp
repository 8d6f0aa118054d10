#include "cdm/report.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "cdm/errors.hpp"

using nlohmann::json;

namespace cdm {

namespace {

json record_to_json(const EvalRecord& r) {
    json j;
    j["id"] = r.id;
    j["gt"] = r.gt;
    j["pred"] = r.pred;
    json cdm;
    cdm["tp"] = r.cdm.tp;
    cdm["fp"] = r.cdm.fp;
    cdm["fn"] = r.cdm.fn;
    cdm["f1"] = r.cdm.f1;
    cdm["render_ok"] = r.cdm.render_ok;
    if (r.cdm.failure) cdm["failure"] = *r.cdm.failure;
    j["cdm"] = std::move(cdm);
    if (r.baselines) {
        json b;
        b["bleu"] = r.baselines->bleu;
        b["edit_distance"] = r.baselines->edit_distance;
        b["exact_match"] = r.baselines->exact_match;
        j["baselines"] = std::move(b);
    }
    j["gt_render_ok"] = r.gt_render_ok;
    j["pred_render_ok"] = r.pred_render_ok;
    if (!r.timings_ms.empty()) j["timings_ms"] = r.timings_ms;
    if (!r.artifacts.empty()) j["artifacts"] = r.artifacts;
    return j;
}

EvalRecord record_from_json(const json& j) {
    EvalRecord r;
    r.id = j.value("id", "");
    r.gt = j.value("gt", "");
    r.pred = j.value("pred", "");
    const auto& cdm = j.at("cdm");
    r.cdm.tp = cdm.value("tp", 0L);
    r.cdm.fp = cdm.value("fp", 0L);
    r.cdm.fn = cdm.value("fn", 0L);
    r.cdm.f1 = cdm.value("f1", 0.0);
    r.cdm.render_ok = cdm.value("render_ok", true);
    if (cdm.contains("failure")) r.cdm.failure = cdm["failure"].get<std::string>();
    if (j.contains("baselines")) {
        BaselineScores b;
        b.bleu = j["baselines"].value("bleu", 0.0);
        b.edit_distance = j["baselines"].value("edit_distance", 0.0);
        b.exact_match = j["baselines"].value("exact_match", false);
        r.baselines = b;
    }
    r.gt_render_ok = j.value("gt_render_ok", true);
    r.pred_render_ok = j.value("pred_render_ok", true);
    if (j.contains("timings_ms"))
        r.timings_ms = j["timings_ms"].get<std::map<std::string, double>>();
    if (j.contains("artifacts"))
        r.artifacts = j["artifacts"].get<std::map<std::string, std::string>>();
    return r;
}

json summary_to_json(const Summary& s) {
    json j;
    j["samples"] = s.samples;
    j["mean_cdm"] = s.mean_cdm;
    j["exprate_at_cdm"] = s.exprate_at_cdm;
    j["mean_bleu"] = s.mean_bleu;
    j["mean_edit_distance"] = s.mean_edit_distance;
    j["exprate"] = s.exprate;
    j["render_success_rate"] = s.render_success_rate;
    return j;
}

Summary summary_from_json(const json& j) {
    Summary s;
    s.samples = j.value("samples", std::size_t{0});
    s.mean_cdm = j.value("mean_cdm", 0.0);
    s.exprate_at_cdm = j.value("exprate_at_cdm", 0.0);
    s.mean_bleu = j.value("mean_bleu", 0.0);
    s.mean_edit_distance = j.value("mean_edit_distance", 0.0);
    s.exprate = j.value("exprate", 0.0);
    s.render_success_rate = j.value("render_success_rate", 0.0);
    return s;
}

}  // namespace

std::vector<Sample> load_samples_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open sample file: " + path);
    std::vector<Sample> samples;
    std::set<std::string> ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("id") ||
            !j.contains("gt") || !j.contains("pred"))
            throw Error("malformed JSONL at line " + std::to_string(line_no) +
                        " of " + path);
        Sample s;
        s.id = j["id"].get<std::string>();
        s.gt = j["gt"].get<std::string>();
        s.pred = j["pred"].get<std::string>();
        if (!ids.insert(s.id).second)
            throw DuplicateId("duplicate sample id '" + s.id + "' at line " +
                              std::to_string(line_no));
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_samples_jsonl(const std::vector<Sample>& samples,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write sample file: " + path);
    for (const auto& s : samples) {
        json j;
        j["id"] = s.id;
        j["gt"] = s.gt;
        j["pred"] = s.pred;
        out << j.dump() << "\n";
    }
}

void write_report(const Report& report, const std::string& path) {
    json j;
    j["summary"] = summary_to_json(report.summary);
    j["records"] = json::array();
    for (const auto& r : report.records)
        j["records"].push_back(record_to_json(r));
    std::ofstream out(path);
    if (!out) throw Error("cannot write report: " + path);
    out << j.dump(2) << "\n";
}

Report load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open report: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("records"))
        throw Error("malformed report: " + path);

    Report report;
    for (const auto& rec : j["records"])
        report.records.push_back(record_from_json(rec));
    report.summary = summary_from_json(j.value("summary", json::object()));

    if (!report.records.empty()) {
        Summary recomputed = summarize(report.records);
        auto same = [](double a, double b) { return a == b || std::abs(a - b) < 1e-12; };
        if (recomputed.samples != report.summary.samples ||
            !same(recomputed.mean_cdm, report.summary.mean_cdm) ||
            !same(recomputed.exprate_at_cdm, report.summary.exprate_at_cdm) ||
            !same(recomputed.render_success_rate,
                  report.summary.render_success_rate))
            throw Error("report summary does not match its records: " + path);
    }
    return report;
}

void write_summary_csv(const Summary& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write csv: " + path);
    out << "samples,mean_cdm,exprate_at_cdm,mean_bleu,mean_edit_distance,"
           "exprate,render_success_rate\n";
    out << s.samples << "," << s.mean_cdm << "," << s.exprate_at_cdm << ","
        << s.mean_bleu << "," << s.mean_edit_distance << "," << s.exprate << ","
        << s.render_success_rate << "\n";
}

std::vector<Sample> mine_hard_cases(const Report& report, double threshold) {
    std::vector<Sample> out;
    for (const auto& r : report.records) {
        if (r.cdm.f1 >= threshold) continue;
        if (r.gt.empty() && r.pred.empty())
            throw MissingArtifacts("record '" + r.id +
                                   "' carries no gt/pred text to mine");
        out.push_back({r.id, r.gt, r.pred});
    }
    return out;
}

}  // namespace cdm
