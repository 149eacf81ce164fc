#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "sagc/error.hpp"
#include "sagc/training.hpp"

namespace sagc::cli {

enum ExitCode : int { kOk = 0, kDomainFailure = 1, kIoOrUsage = 2, kNumerical = 3 };

int exit_code_for(ErrorKind kind);

struct RunConfig {
    std::filesystem::path dataset;
    std::filesystem::path out_dir;
    std::filesystem::path checkpoint;      // default: <out>/checkpoint.sagc
    std::filesystem::path split_manifest;  // default: next to the checkpoint
    std::filesystem::path graph_file;
    std::optional<std::filesystem::path> cache_dir;
    std::optional<std::uint64_t> seed;
    TrainConfig train;
    bool evaluate_train_split = false;
    int synth_count = 4;
    int synth_spaces = 8;
    int log_every = 100;
};

// $SAGC_OUT when set, otherwise ./sagc_out.
std::filesystem::path default_out_dir();

std::filesystem::path checkpoint_path(const RunConfig& cfg);
std::filesystem::path split_manifest_path(const RunConfig& cfg);

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_featurize(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_export_embeddings(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Full argument parsing and dispatch.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sagc::cli
