#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "xalign/adversary.hpp"
#include "xalign/embed_io.hpp"
#include "xalign/metric.hpp"
#include "xalign/refine.hpp"
#include "xalign/synthgen.hpp"

namespace xalign {

namespace fs = std::filesystem;

/// Everything one run needs. Every artifact written from it carries
/// config_hash() and the seed.
struct PipelineConfig {
  fs::path src_embeddings;
  fs::path tgt_embeddings;
  std::string src_lang = "src";
  std::string tgt_lang = "tgt";
  Index max_vocab = 200000;
  bool lowercase = false;
  Normalization normalization = Normalization::unit;

  bool supervised = false;
  fs::path supervision_dictionary;

  std::vector<fs::path> eval_dictionaries;          ///< source -> target
  std::vector<fs::path> reverse_eval_dictionaries;  ///< target -> source, scored with W^T
  std::vector<fs::path> wordsim_files;
  fs::path src_sentences;
  fs::path tgt_sentences;
  fs::path src_idf_corpus;
  fs::path tgt_idf_corpus;
  fs::path bleu_sources;
  fs::path bleu_references;
  bool bleu_known_only = false;  ///< drop pairs whose source has unknown words

  TrainConfig train;
  RefineParams refine;
  std::vector<RetrievalMethod> methods{RetrievalMethod::nn, RetrievalMethod::csls};
  RetrievalOptions retrieval;
  bool oov_counts_wrong = true;

  fs::path output_dir = "out";
  fs::path mapping;  ///< W for evaluate/translate; defaults to output_dir/mapping.txt
  std::uint64_t seed = 0;

  /// Keys and values in a fixed order; the single canonical record of a run.
  std::vector<std::pair<std::string, std::string>> canonical() const;
  /// 16 hex digits of FNV-1a over canonical().
  std::string config_hash() const;
  fs::path mapping_path() const;
};

struct SynthRequest {
  SynthConfig config;
  std::string preset;  ///< informational, recorded in the manifest
  fs::path output_dir = "synth";
};

/// Each command throws the library's exceptions with the failing stage
/// prefixed to the message; run_command turns them into exit codes.
void cmd_train(const PipelineConfig& cfg, std::ostream& log);
void cmd_evaluate(const PipelineConfig& cfg, std::ostream& log);

struct TranslateRequest {
  std::vector<std::string> words;
  fs::path sentences;
  fs::path references;
  Index top_k = 5;
  RetrievalMethod method = RetrievalMethod::csls;
};
void cmd_translate(const PipelineConfig& cfg, const TranslateRequest& req, std::ostream& out,
                   std::ostream& log);
void cmd_synth(const SynthRequest& req, std::ostream& log);

enum ExitCode : int { exit_ok = 0, exit_other = 1, exit_usage = 2, exit_io = 3, exit_numerical = 4 };

/// Runs `body`, reports any exception on `err`, and returns the exit code.
int run_command(const std::function<void()>& body, std::ostream& err);

}  // namespace xalign
