#pragma once

#include <string>

#include "svcap/corpus.hpp"
#include "svcap/sdn.hpp"
#include "svcap/trainer.hpp"

namespace svcap {

// Effective run configuration: a keyed JSON document merged with CLI
// overrides. Unknown keys are rejected; the fingerprint is a content hash
// over everything that shapes results (the output directory is excluded).
struct RunConfig {
    std::string out = "run";
    uint64_t seed = 1;

    SynthSpec synth;

    struct CorpusCfg {
        std::string data_dir;      // defaults to <out>/data
        std::string semantic_dir;  // defaults to <out>/sdn
        int min_count = 1;
        int tag_count = 300;
        std::string stoplist_file;
    } corpus;

    SdnConfig sdn;
    TrainConfig train;

    struct EvalCfg {
        std::string split = "test";
    } evaluate;

    std::string fingerprint;
};

struct CliOverrides {
    std::optional<uint64_t> seed;
    std::optional<double> beta;
    std::optional<std::string> strategy;
    std::optional<double> epsilon_rate;
    std::optional<int> epochs;
    std::optional<std::string> out;
};

// Loads the config document (empty path = all defaults), applies overrides
// (flags win), derives per-module seeds from the top-level seed, and
// computes the fingerprint.
RunConfig load_run_config(const std::string& config_path, const CliOverrides& overrides);

// FNV-1a 64-bit over a canonical serialization, as 16 hex digits.
std::string fingerprint_string(const std::string& canonical);

}  // namespace svcap
