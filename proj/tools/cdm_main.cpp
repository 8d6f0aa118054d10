// cdm — formula-recognition scoring by rendered-character matching.
//
//   cdm eval      batch formula-level evaluation from a JSONL sample file
//   cdm doc-eval  document-level evaluation over paired gt/pred directories
//   cdm mine      extract hard cases (cdm < threshold) from a report
//
// Exit codes: 0 success, 2 configuration error, 3 unreadable input.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "cdm/doc_eval.hpp"
#include "cdm/errors.hpp"
#include "cdm/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;

struct CliOptions {
    std::string config_path;
    std::string renderer;
    std::string equiv_table;
    std::string cache_dir;
    std::string dump_debug;
    std::string metrics = "all";
    int jobs = 0;
    double w_token = -1.0, w_pos = -1.0, w_order = -1.0;
};

void add_shared_flags(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_path, "JSON config file");
    cmd->add_option("--renderer", opt.renderer, "rendering engine: tex or stub")
        ->check(CLI::IsMember({"tex", "stub"}));
    cmd->add_option("--jobs", opt.jobs, "parallel workers (default: cores)");
    cmd->add_option("--w-token", opt.w_token, "token-cost weight");
    cmd->add_option("--w-pos", opt.w_pos, "position-cost weight");
    cmd->add_option("--w-order", opt.w_order, "order-cost weight");
    cmd->add_option("--metrics", opt.metrics, "cdm (scores only) or all")
        ->check(CLI::IsMember({"cdm", "all"}));
    cmd->add_option("--dump-debug", opt.dump_debug,
                    "write per-sample images and match dumps here");
    cmd->add_option("--cache-dir", opt.cache_dir,
                    "render cache directory (CDM_CACHE_DIR overrides)");
    cmd->add_option("--equiv-table", opt.equiv_table,
                    "render-equivalence table file");
}

cdm::EvalConfig build_config(const CliOptions& opt) {
    cdm::EvalConfig cfg;

    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) throw cdm::ConfigError("cannot open config: " + opt.config_path);
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded())
            throw cdm::ConfigError("config is not valid JSON: " + opt.config_path);

        if (j.contains("weights")) {
            cfg.weights.token = j["weights"].value("token", cfg.weights.token);
            cfg.weights.position =
                j["weights"].value("position", cfg.weights.position);
            cfg.weights.order = j["weights"].value("order", cfg.weights.order);
        }
        if (j.contains("ransac")) {
            const auto& r = j["ransac"];
            cfg.ransac.inlier_tol = r.value("tol", cfg.ransac.inlier_tol);
            cfg.ransac.min_inliers = r.value("min_inliers", cfg.ransac.min_inliers);
            cfg.ransac.iterations = r.value("iters", cfg.ransac.iterations);
            cfg.ransac.max_rounds = r.value("rounds", cfg.ransac.max_rounds);
            cfg.ransac.seed = r.value("seed", cfg.ransac.seed);
        }
        if (j.contains("render")) {
            const auto& r = j["render"];
            std::string engine = r.value("engine", std::string());
            if (engine == "tex") cfg.render.engine = cdm::RenderEngine::Tex;
            if (engine == "stub") cfg.render.engine = cdm::RenderEngine::Stub;
            cfg.render.engine_command =
                r.value("engine_command", cfg.render.engine_command);
            cfg.render.raster_command =
                r.value("raster_command", cfg.render.raster_command);
            cfg.render.dpi = r.value("dpi", cfg.render.dpi);
            cfg.render.timeout_s = r.value("timeout_s", cfg.render.timeout_s);
            cfg.render.page_width_in =
                r.value("page_width_in", cfg.render.page_width_in);
            cfg.render.document_template =
                r.value("document_template", cfg.render.document_template);
            cfg.render.cache_dir = r.value("cache_dir", cfg.render.cache_dir);
        }
        if (j.contains("localize")) {
            cfg.localize.tolerance =
                j["localize"].value("tolerance", cfg.localize.tolerance);
            cfg.localize.min_pixels =
                j["localize"].value("min_pixels", cfg.localize.min_pixels);
        }
        if (j.contains("metrics")) {
            cfg.metrics.baselines =
                j["metrics"].value("baselines", cfg.metrics.baselines);
            cfg.bleu.smoothing =
                j["metrics"].value("bleu_smoothing", cfg.bleu.smoothing);
        }
        if (j.contains("equiv_table"))
            cfg.equiv = cdm::EquivTable::load(j["equiv_table"].get<std::string>());
    }

    if (opt.renderer == "tex") cfg.render.engine = cdm::RenderEngine::Tex;
    if (opt.renderer == "stub") cfg.render.engine = cdm::RenderEngine::Stub;
    if (opt.w_token >= 0) cfg.weights.token = opt.w_token;
    if (opt.w_pos >= 0) cfg.weights.position = opt.w_pos;
    if (opt.w_order >= 0) cfg.weights.order = opt.w_order;
    if (!opt.cache_dir.empty()) cfg.render.cache_dir = opt.cache_dir;
    if (!opt.dump_debug.empty()) cfg.debug_dir = opt.dump_debug;
    if (!opt.equiv_table.empty()) cfg.equiv = cdm::EquivTable::load(opt.equiv_table);
    cfg.metrics.baselines = opt.metrics != "cdm";

    if (cfg.weights.token + cfg.weights.position + cfg.weights.order <= 0.0)
        throw cdm::ConfigError("cost weights must sum to a positive value");
    if (cfg.localize.tolerance < 0 || cfg.localize.tolerance > 7)
        throw cdm::ConfigError("localize tolerance must be in [0, 7]");
    return cfg;
}

int cmd_eval(const CliOptions& opt, const std::string& input,
             const std::string& output, const std::string& csv) {
    cdm::EvalConfig cfg;
    try {
        cfg = build_config(opt);
    } catch (const cdm::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    std::vector<cdm::Sample> samples;
    try {
        samples = cdm::load_samples_jsonl(input);
        if (samples.empty()) throw cdm::EmptyInput("no samples in " + input);
    } catch (const cdm::Error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }

    auto result = cdm::evaluate_batch(samples, cfg, opt.jobs);
    cdm::Report report{result.summary, result.records};
    cdm::write_report(report, output);
    if (!csv.empty()) cdm::write_summary_csv(result.summary, csv);

    const auto& s = result.summary;
    std::cout << "samples              " << s.samples << "\n"
              << "mean CDM             " << s.mean_cdm << "\n"
              << "ExpRate@CDM          " << s.exprate_at_cdm << "\n";
    if (cfg.metrics.baselines) {
        std::cout << "mean BLEU            " << s.mean_bleu << "\n"
                  << "mean edit distance   " << s.mean_edit_distance << "\n"
                  << "ExpRate              " << s.exprate << "\n";
    }
    std::cout << "render success rate  " << s.render_success_rate << "\n"
              << "report written to " << output << "\n";
    return kExitOk;
}

cdm::DocDialect parse_dialect(const std::string& name) {
    if (name == "latex") return cdm::DocDialect::LatexSource;
    if (name == "markdown") return cdm::DocDialect::MarkdownOutput;
    return cdm::DocDialect::BracketOutput;
}

// ground truth arrives either as .tex sources or as pre-extracted
// one-formula-per-line .txt files
std::vector<cdm::DocFormula> gt_formulas_from_file(const fs::path& path) {
    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    std::string id = path.stem().string();
    if (path.extension() == ".txt") {
        std::vector<cdm::DocFormula> out;
        std::istringstream lines(content);
        std::string line;
        int line_no = 0;
        while (std::getline(lines, line)) {
            ++line_no;
            auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            auto last = line.find_last_not_of(" \t\r");
            out.push_back({id, line_no, line.substr(first, last - first + 1), line});
        }
        return out;
    }
    return cdm::extract_displayed(cdm::preprocess_source(content),
                                  cdm::DocDialect::LatexSource, id);
}

int cmd_doc_eval(const CliOptions& opt, const std::string& gt_dir,
                 const std::string& pred_dir, const std::string& dialect,
                 double round1, double round2, const std::string& output,
                 const std::string& csv) {
    cdm::EvalConfig cfg;
    cdm::MatchThresholds thresholds;
    try {
        cfg = build_config(opt);
        thresholds.round1 = round1;
        thresholds.round2 = round2;
        if (!(thresholds.round1 > 0.0) || thresholds.round1 > thresholds.round2 ||
            thresholds.round2 > 1.0)
            throw cdm::ConfigError("thresholds must satisfy 0 < round1 <= round2 <= 1");
    } catch (const cdm::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    if (!fs::is_directory(gt_dir)) {
        std::cerr << "input error: not a directory: " << gt_dir << "\n";
        return kExitInput;
    }

    std::vector<fs::path> gt_files;
    for (const auto& entry : fs::directory_iterator(gt_dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension();
        if (ext == ".tex" || ext == ".txt") gt_files.push_back(entry.path());
    }
    std::sort(gt_files.begin(), gt_files.end());
    if (gt_files.empty()) {
        std::cerr << "input error: no .tex or .txt files in " << gt_dir << "\n";
        return kExitInput;
    }

    std::vector<cdm::EvalRecord> all_records;
    for (const auto& gt_path : gt_files) {
        std::string stem = gt_path.stem().string();
        auto gt_formulas = gt_formulas_from_file(gt_path);

        std::string pred_content;
        bool have_pred = false;
        if (fs::is_directory(pred_dir)) {
            std::vector<fs::path> candidates;
            for (const auto& entry : fs::directory_iterator(pred_dir))
                if (entry.is_regular_file() && entry.path().stem() == stem)
                    candidates.push_back(entry.path());
            std::sort(candidates.begin(), candidates.end());
            if (!candidates.empty()) {
                std::ifstream in(candidates.front());
                pred_content.assign((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
                have_pred = true;
            }
        }
        std::vector<cdm::DocFormula> pred_formulas;
        if (have_pred)
            pred_formulas = cdm::extract_displayed(pred_content,
                                                   parse_dialect(dialect), stem);

        auto doc_result = cdm::evaluate_formulas(gt_formulas, pred_formulas, cfg,
                                                 thresholds, stem);
        for (auto& rec : doc_result.records)
            all_records.push_back(std::move(rec));
    }
    if (all_records.empty()) {
        std::cerr << "input error: no formulas extracted from " << gt_dir << "\n";
        return kExitInput;
    }

    cdm::Report report{cdm::summarize(all_records), all_records};
    cdm::write_report(report, output);
    if (!csv.empty()) cdm::write_summary_csv(report.summary, csv);

    std::cout << "documents " << gt_files.size() << ", formulas "
              << report.summary.samples << "\n"
              << "mean CDM     " << report.summary.mean_cdm << "\n"
              << "ExpRate@CDM  " << report.summary.exprate_at_cdm << "\n"
              << "report written to " << output << "\n";
    return kExitOk;
}

int cmd_mine(const std::string& report_path, double threshold,
             const std::string& output) {
    cdm::Report report;
    try {
        report = cdm::load_report(report_path);
    } catch (const cdm::Error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    try {
        auto hard = cdm::mine_hard_cases(report, threshold);
        cdm::write_samples_jsonl(hard, output);
        std::cout << "mined " << hard.size() << " of " << report.records.size()
                  << " samples into " << output << "\n";
    } catch (const cdm::MissingArtifacts& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"formula-recognition scoring by rendered-character matching"};
    app.require_subcommand(1);

    CliOptions opt;

    auto* eval = app.add_subcommand("eval", "evaluate a JSONL sample file");
    std::string input, output = "report.json", csv;
    eval->add_option("--input,-i", input, "JSONL file of {id, gt, pred}")
        ->required();
    eval->add_option("--output,-o", output, "report JSON path");
    eval->add_option("--csv", csv, "also write a summary CSV");
    add_shared_flags(eval, opt);

    auto* doc = app.add_subcommand("doc-eval", "evaluate document outputs");
    std::string gt_dir, pred_dir, dialect = "markdown";
    double round1 = 0.4, round2 = 0.8;
    std::string doc_output = "doc_report.json", doc_csv;
    doc->add_option("--gt", gt_dir, "directory of GT .tex or .txt files")
        ->required();
    doc->add_option("--pred", pred_dir, "directory of model output files")
        ->required();
    doc->add_option("--dialect", dialect, "latex, markdown or bracket")
        ->check(CLI::IsMember({"latex", "markdown", "bracket"}));
    doc->add_option("--round1", round1, "first-round matching threshold");
    doc->add_option("--round2", round2, "second-round matching threshold");
    doc->add_option("--output,-o", doc_output, "report JSON path");
    doc->add_option("--csv", doc_csv, "also write a summary CSV");
    add_shared_flags(doc, opt);

    auto* mine = app.add_subcommand("mine", "extract hard cases from a report");
    std::string report_path, mine_output = "hard_cases.jsonl";
    double threshold = 1.0;
    mine->add_option("--report,-r", report_path, "report JSON to mine")
        ->required();
    mine->add_option("--threshold,-t", threshold,
                     "keep samples with cdm below this");
    mine->add_option("--output,-o", mine_output, "JSONL output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (eval->parsed()) return cmd_eval(opt, input, output, csv);
        if (doc->parsed())
            return cmd_doc_eval(opt, gt_dir, pred_dir, dialect, round1, round2,
                                doc_output, doc_csv);
        if (mine->parsed()) return cmd_mine(report_path, threshold, mine_output);
    } catch (const cdm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const cdm::Error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
