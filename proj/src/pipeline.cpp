#include "cdm/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "cdm/errors.hpp"

namespace fs = std::filesystem;

namespace cdm {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start)
        .count();
}

std::string sanitize_id(const std::string& id) {
    std::string out = id;
    for (char& c : out)
        if (c == '/' || c == '\\' || c == ' ') c = '_';
    return out;
}

void draw_box_outline(RasterImage& img, const BBox& b, Rgb color) {
    int x1 = std::max(0, b.x1 - 1), y1 = std::max(0, b.y1 - 1);
    int x2 = std::min(img.width - 1, b.x2 + 1);
    int y2 = std::min(img.height - 1, b.y2 + 1);
    for (int x = x1; x <= x2; ++x) {
        img.set(x, y1, color);
        img.set(x, y2, color);
    }
    for (int y = y1; y <= y2; ++y) {
        img.set(x1, y, color);
        img.set(x2, y, color);
    }
}

// boxes colored by pair validity: kept matches green, eliminated red
RasterImage match_overlay(const RasterImage& base, const MatchSet& validated,
                          bool gt_side) {
    RasterImage img = base;
    const Rgb kept{0, 190, 0}, dropped{220, 0, 0};
    for (const auto& p : validated.pairs)
        draw_box_outline(img, gt_side ? p.gt.bbox : p.pred.bbox, kept);
    const auto& loose = gt_side ? validated.unmatched_gt : validated.unmatched_pred;
    for (const auto& e : loose) draw_box_outline(img, e.bbox, dropped);
    return img;
}

void dump_elements_json(const std::string& path, const ElementSet& set) {
    std::ofstream out(path);
    auto esc = [](const std::string& s) {
        std::string r;
        for (char c : s) {
            if (c == '\\' || c == '"') r += '\\';
            r += c;
        }
        return r;
    };
    out << "[\n";
    for (std::size_t i = 0; i < set.elements.size(); ++i) {
        const auto& e = set.elements[i];
        out << "  {\"token\": \"" << esc(e.token.text) << "\", \"color\": ["
            << int(e.color[0]) << ", " << int(e.color[1]) << ", "
            << int(e.color[2]) << "], \"bbox\": [" << e.bbox.x1 << ", "
            << e.bbox.y1 << ", " << e.bbox.x2 << ", " << e.bbox.y2 << "]}"
            << (i + 1 < set.elements.size() ? "," : "") << "\n";
    }
    out << "]\n";
}

void dump_match_json(const std::string& path, const MatchSet& validated) {
    std::ofstream out(path);
    auto esc = [](const std::string& s) {
        std::string r;
        for (char c : s) {
            if (c == '\\' || c == '"') r += '\\';
            r += c;
        }
        return r;
    };
    auto box = [](const BBox& b) {
        return "[" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " +
               std::to_string(b.x2) + ", " + std::to_string(b.y2) + "]";
    };
    out << "{\n  \"pairs\": [\n";
    for (std::size_t i = 0; i < validated.pairs.size(); ++i) {
        const auto& p = validated.pairs[i];
        out << "    {\"gt\": \"" << esc(p.gt.token.text) << "\", \"pred\": \""
            << esc(p.pred.token.text) << "\", \"gt_box\": " << box(p.gt.bbox)
            << ", \"pred_box\": " << box(p.pred.bbox) << ", \"cost\": " << p.cost
            << "}" << (i + 1 < validated.pairs.size() ? "," : "") << "\n";
    }
    out << "  ],\n  \"unmatched_gt\": [";
    for (std::size_t i = 0; i < validated.unmatched_gt.size(); ++i)
        out << (i ? ", " : "") << "\"" << esc(validated.unmatched_gt[i].token.text)
            << "\"";
    out << "],\n  \"unmatched_pred\": [";
    for (std::size_t i = 0; i < validated.unmatched_pred.size(); ++i)
        out << (i ? ", " : "") << "\""
            << esc(validated.unmatched_pred[i].token.text) << "\"";
    out << "]\n}\n";
}

struct RenderOutcome {
    bool ok = false;
    std::string failure;  // reason when !ok
    RasterImage image;
    ColoredSource source;
    bool tokenized = false;
    TokenSequence seq;
};

RenderOutcome render_side(const std::string& latex, const EvalConfig& cfg,
                          const Palette& palette) {
    RenderOutcome out;
    try {
        out.seq = tokenize(latex);
        out.tokenized = true;
    } catch (const UnbalancedBraces&) {
        out.failure = "CompileError";  // cannot be normalized
        return out;
    }
    try {
        out.source = assign_colors(out.seq, palette);
        out.image = render(out.source, cfg.render);
        out.ok = true;
    } catch (const RenderFailure& e) {
        out.failure = to_string(e.kind);
    } catch (const PaletteExhausted&) {
        out.failure = "PaletteExhausted";
    }
    return out;
}

}  // namespace

EvalRecord evaluate_pair(const std::string& gt, const std::string& pred,
                         const EvalConfig& cfg, const std::string& id) {
    static const Palette palette;

    EvalRecord rec;
    rec.id = id;
    rec.gt = gt;
    rec.pred = pred;

    auto started = Clock::now();
    double budget_ms = (cfg.render.timeout_s * 2.0 + 5.0) * 1000.0;

    auto t0 = Clock::now();
    RenderOutcome gt_side = render_side(gt, cfg, palette);
    RenderOutcome pred_side = render_side(pred, cfg, palette);
    rec.timings_ms["render"] = ms_since(t0);

    rec.gt_render_ok = gt_side.ok;
    rec.pred_render_ok = pred_side.ok;
    if (ms_since(started) > budget_ms) {
        rec.pred_render_ok = false;
        pred_side.failure = "Timeout";
    }

    if (!gt_side.ok || !rec.pred_render_ok) {
        rec.cdm = cdm_score(MatchSet{}, false);
        rec.cdm.failure = !rec.pred_render_ok ? pred_side.failure : gt_side.failure;
    } else {
        auto t1 = Clock::now();
        auto gt_elems = localize(gt_side.image, gt_side.source, cfg.localize);
        auto pred_elems =
            localize(pred_side.image, pred_side.source, cfg.localize);
        rec.timings_ms["localize"] = ms_since(t1);

        auto t2 = Clock::now();
        auto matched = assign(gt_elems, pred_elems, cfg.weights, cfg.equiv);
        rec.timings_ms["match"] = ms_since(t2);

        auto t3 = Clock::now();
        auto validated = ransac_filter(token_filter(matched, cfg.equiv),
                                       cfg.ransac);
        rec.timings_ms["validate"] = ms_since(t3);

        rec.cdm = cdm_score(validated, true);

        if (!cfg.debug_dir.empty()) {
            fs::create_directories(cfg.debug_dir);
            std::string stem = cfg.debug_dir + "/" + sanitize_id(id);
            write_png(gt_side.image, stem + "_gt.png");
            write_png(pred_side.image, stem + "_pred.png");
            write_png(match_overlay(gt_side.image, validated, true),
                      stem + "_gt_overlay.png");
            write_png(match_overlay(pred_side.image, validated, false),
                      stem + "_pred_overlay.png");
            dump_elements_json(stem + "_gt_elements.json", gt_elems);
            dump_elements_json(stem + "_pred_elements.json", pred_elems);
            dump_match_json(stem + "_match.json", validated);
            rec.artifacts["gt_image"] = stem + "_gt.png";
            rec.artifacts["pred_image"] = stem + "_pred.png";
            rec.artifacts["gt_overlay"] = stem + "_gt_overlay.png";
            rec.artifacts["pred_overlay"] = stem + "_pred_overlay.png";
            rec.artifacts["match"] = stem + "_match.json";
        }
    }
    if (cfg.metrics.baselines) {
        BaselineScores b;
        if (gt_side.tokenized && pred_side.tokenized) {
            b.bleu = bleu(gt_side.seq, pred_side.seq, cfg.bleu);
            b.exact_match =
                detokenize(gt_side.seq) == detokenize(pred_side.seq);
        }
        b.edit_distance = edit_distance_chars(gt, pred);
        rec.baselines = b;
    }
    rec.timings_ms["total"] = ms_since(started);
    return rec;
}

BatchResult evaluate_batch(const std::vector<Sample>& samples,
                           const EvalConfig& cfg, int jobs) {
    if (samples.empty()) throw EmptyInput("empty batch");
    std::set<std::string> ids;
    for (const auto& s : samples)
        if (!ids.insert(s.id).second)
            throw DuplicateId("duplicate sample id: " + s.id);

    if (jobs <= 0)
        jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<int>(jobs, static_cast<int>(samples.size()));

    BatchResult result;
    result.records.resize(samples.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= samples.size()) break;
            try {
                result.records[i] = evaluate_pair(samples[i].gt, samples[i].pred,
                                                  cfg, samples[i].id);
            } catch (const std::exception& e) {
                EvalRecord rec;
                rec.id = samples[i].id;
                rec.gt = samples[i].gt;
                rec.pred = samples[i].pred;
                rec.cdm = cdm_score(MatchSet{}, false);
                rec.cdm.failure = std::string("Error: ") + e.what();
                rec.pred_render_ok = false;
                result.records[i] = std::move(rec);
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    result.summary = summarize(result.records);
    return result;
}

Summary summarize(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw EmptyInput("no records");
    Summary s;
    s.samples = records.size();

    double cdm_sum = 0.0;
    std::size_t perfect = 0, pred_ok = 0;
    double bleu_sum = 0.0, edit_sum = 0.0;
    std::size_t baseline_count = 0, exact = 0;
    for (const auto& r : records) {
        cdm_sum += r.cdm.f1;
        if (r.cdm.f1 == 1.0) ++perfect;
        if (r.pred_render_ok) ++pred_ok;
        if (r.baselines) {
            ++baseline_count;
            bleu_sum += r.baselines->bleu;
            edit_sum += r.baselines->edit_distance;
            if (r.baselines->exact_match) ++exact;
        }
    }
    s.mean_cdm = cdm_sum / static_cast<double>(s.samples);
    s.exprate_at_cdm = static_cast<double>(perfect) / static_cast<double>(s.samples);
    s.render_success_rate =
        static_cast<double>(pred_ok) / static_cast<double>(s.samples);
    if (baseline_count > 0) {
        s.mean_bleu = bleu_sum / static_cast<double>(baseline_count);
        s.mean_edit_distance = edit_sum / static_cast<double>(baseline_count);
        s.exprate = static_cast<double>(exact) / static_cast<double>(baseline_count);
    }
    return s;
}

}  // namespace cdm
