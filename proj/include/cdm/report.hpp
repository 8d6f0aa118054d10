#pragma once

// Report and sample-file IO. Samples arrive as JSONL ({"id","gt","pred"}
// per line); reports are a JSON document with a summary block plus
// per-sample records, recomputable from the records on load.

#include <string>
#include <vector>

#include "cdm/pipeline.hpp"

namespace cdm {

struct Report {
    Summary summary;
    std::vector<EvalRecord> records;
};

// throws Error with a line number message on malformed lines and
// DuplicateId on repeated ids
std::vector<Sample> load_samples_jsonl(const std::string& path);
void write_samples_jsonl(const std::vector<Sample>& samples,
                         const std::string& path);

void write_report(const Report& report, const std::string& path);

// verifies on load that the stored summary matches one recomputed from the
// records; throws Error on mismatch
Report load_report(const std::string& path);

void write_summary_csv(const Summary& summary, const std::string& path);

// records with cdm.f1 < threshold, as mining input for hard-case training
// sets; throws MissingArtifacts when a selected record lacks gt/pred text
std::vector<Sample> mine_hard_cases(const Report& report, double threshold);

}  // namespace cdm
