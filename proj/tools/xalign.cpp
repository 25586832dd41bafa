// Command-line front end: train, evaluate, translate, synth.
//
// Option names follow the configuration field names. Any option can also be
// set in a flat key=value file passed with --config; command-line values win.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xalign/error.hpp"
#include "xalign/pipeline.hpp"

namespace {

struct Raw {
  std::string normalization = "unit";
  std::vector<std::string> methods{"nn", "csls"};
  std::string criterion_metric = "csls";
  std::string refine_metric = "csls";
  std::optional<double> map_learning_rate;
  std::string translate_method = "csls";
  std::string preset;
  std::string rotation = "planted";
};

void add_pipeline_options(CLI::App& app, xalign::PipelineConfig& c, Raw& raw) {
  auto& t = c.train;
  app.add_option("--src_embeddings", c.src_embeddings, "source vectors (.vec text)");
  app.add_option("--tgt_embeddings", c.tgt_embeddings, "target vectors (.vec text)");
  app.add_option("--src_lang", c.src_lang);
  app.add_option("--tgt_lang", c.tgt_lang);
  app.add_option("--max_vocab", c.max_vocab, "keep the most frequent words only");
  app.add_flag("--lowercase,!--no-lowercase", c.lowercase);
  app.add_option("--normalization", raw.normalization, "none, unit, center_then_unit");
  app.add_flag("--supervised,!--unsupervised", c.supervised, "Procrustes on a given dictionary");
  app.add_option("--supervision_dictionary", c.supervision_dictionary);
  app.add_option("--eval_dictionaries", c.eval_dictionaries)->delimiter(',');
  app.add_option("--reverse_eval_dictionaries", c.reverse_eval_dictionaries)->delimiter(',');
  app.add_option("--wordsim_files", c.wordsim_files)->delimiter(',');
  app.add_option("--src_sentences", c.src_sentences);
  app.add_option("--tgt_sentences", c.tgt_sentences);
  app.add_option("--src_idf_corpus", c.src_idf_corpus);
  app.add_option("--tgt_idf_corpus", c.tgt_idf_corpus);
  app.add_option("--bleu_sources", c.bleu_sources);
  app.add_option("--bleu_references", c.bleu_references);
  app.add_flag("--bleu_known_only", c.bleu_known_only);

  app.add_option("--batch_size", t.batch_size);
  app.add_option("--learning_rate", t.learning_rate);
  app.add_option("--map_learning_rate", raw.map_learning_rate);
  app.add_option("--lr_decay", t.lr_decay);
  app.add_option("--lr_shrink_on_criterion_drop", t.lr_shrink_on_criterion_drop);
  app.add_option("--epochs", t.epochs);
  app.add_option("--iterations_per_epoch", t.iterations_per_epoch);
  app.add_option("--discriminator_feed_limit", t.discriminator_feed_limit);
  app.add_option("--discriminator_steps", t.discriminator_steps);
  app.add_option("--smoothing", t.smoothing);
  app.add_flag("--smooth_mapping_loss,!--no-smooth_mapping_loss", t.smooth_mapping_loss);
  app.add_option("--beta", t.beta);
  app.add_option("--hidden_dim", t.hidden_dim);
  app.add_option("--leaky_slope", t.leaky_slope);
  app.add_option("--input_dropout", t.input_dropout);
  app.add_option("--accuracy_samples", t.accuracy_samples);
  app.add_option("--n_queries", t.criterion.n_queries);
  app.add_option("--criterion_metric", raw.criterion_metric);

  app.add_option("--dict_rank_cap", c.refine.dict_rank_cap);
  app.add_option("--n_iterations", c.refine.n_iterations);
  app.add_option("--refine_metric", raw.refine_metric);
  app.add_flag("--mutual_nn_only,!--no-mutual_nn_only", c.refine.mutual_nn_only);

  app.add_option("--csls_k", c.retrieval.csls_k);
  app.add_option("--isf_beta", c.retrieval.isf_beta);
  app.add_option("--isf_pool", c.retrieval.isf_pool);
  app.add_option("--source_rank_cap", c.retrieval.source_rank_cap);
  app.add_option("--methods", raw.methods, "nn, isf, csls")->delimiter(',');
  app.add_flag("--oov_counts_wrong,!--oov_dropped", c.oov_counts_wrong);

  app.add_option("--output_dir", c.output_dir);
  app.add_option("--mapping", c.mapping, "W file (default: <output_dir>/mapping.txt)");
  app.add_option("--seed", c.seed);
}

void finish_pipeline_config(xalign::PipelineConfig& c, const Raw& raw) {
  c.normalization = xalign::parse_normalization(raw.normalization);
  c.methods.clear();
  for (const auto& m : raw.methods) c.methods.push_back(xalign::parse_method(m));
  if (c.methods.empty()) throw xalign::UsageError("no retrieval methods given");
  c.train.criterion.metric = xalign::parse_method(raw.criterion_metric);
  c.refine.metric = xalign::parse_method(raw.refine_metric);
  c.train.map_learning_rate = raw.map_learning_rate;
  c.train.rng_seed = c.seed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual word embedding alignment"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value file; command-line options override it");
  app.fallthrough();

  xalign::PipelineConfig cfg;
  Raw raw;
  add_pipeline_options(app, cfg, raw);

  auto* train = app.add_subcommand("train", "adversarial training + refinement, or --supervised");
  auto* evaluate = app.add_subcommand("evaluate", "word translation, wordsim, sentence retrieval, BLEU");
  auto* translate = app.add_subcommand("translate", "top-k word translations or word-by-word sentences");
  auto* synth = app.add_subcommand("synth", "write a synthetic embedding pair with planted ground truth");

  xalign::TranslateRequest treq;
  translate->add_option("--words", treq.words, "query words")->delimiter(',');
  translate->add_option("--sentences", treq.sentences, "one sentence per line");
  translate->add_option("--references", treq.references, "references for BLEU");
  translate->add_option("--top_k", treq.top_k);
  translate->add_option("--method", raw.translate_method, "nn, isf, csls");

  xalign::SynthRequest sreq;
  auto& sc = sreq.config;
  synth->add_option("--preset", raw.preset, "noiseless, noisy, hubbed, desk");
  synth->add_option("--n_words", sc.n_words);
  synth->add_option("--dim", sc.dim);
  synth->add_option("--noise_sigma", sc.noise_sigma);
  synth->add_option("--rotation", raw.rotation, "planted or identity");
  synth->add_option("--hub_count", sc.hub_count);
  synth->add_option("--zipf_exponent", sc.zipf_exponent);
  synth->add_option("--clusters", sc.clusters);
  synth->add_option("--cluster_spread", sc.cluster_spread);
  synth->add_option("--mean_offset", sc.mean_offset);
  synth->add_option("--spectrum_decay", sc.spectrum_decay);
  synth->add_option("--hub_noise", sc.hub_noise);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return xalign::exit_usage;
  }

  return xalign::run_command(
      [&] {
        if (*synth) {
          if (!raw.preset.empty()) {
            // Options given explicitly override the preset.
            const xalign::SynthConfig base = xalign::synth_preset(raw.preset);
            auto pick = [&](const char* name, auto& field, const auto& preset_value) {
              if (synth->count(name) == 0) field = preset_value;
            };
            pick("--n_words", sc.n_words, base.n_words);
            pick("--dim", sc.dim, base.dim);
            pick("--noise_sigma", sc.noise_sigma, base.noise_sigma);
            pick("--hub_count", sc.hub_count, base.hub_count);
            pick("--zipf_exponent", sc.zipf_exponent, base.zipf_exponent);
            pick("--clusters", sc.clusters, base.clusters);
            pick("--cluster_spread", sc.cluster_spread, base.cluster_spread);
            pick("--mean_offset", sc.mean_offset, base.mean_offset);
            pick("--spectrum_decay", sc.spectrum_decay, base.spectrum_decay);
            pick("--hub_noise", sc.hub_noise, base.hub_noise);
            if (synth->count("--rotation") == 0)
              raw.rotation = base.rotation == xalign::RotationKind::planted ? "planted" : "identity";
          }
          if (raw.rotation == "planted")
            sc.rotation = xalign::RotationKind::planted;
          else if (raw.rotation == "identity")
            sc.rotation = xalign::RotationKind::identity;
          else
            throw xalign::UsageError("unknown rotation '" + raw.rotation + "'");
          sc.rng_seed = cfg.seed;
          sreq.preset = raw.preset;
          sreq.output_dir = cfg.output_dir;
          xalign::cmd_synth(sreq, std::cerr);
          return;
        }
        finish_pipeline_config(cfg, raw);
        if (*train) {
          xalign::cmd_train(cfg, std::cerr);
        } else if (*evaluate) {
          xalign::cmd_evaluate(cfg, std::cerr);
        } else if (*translate) {
          treq.method = xalign::parse_method(raw.translate_method);
          xalign::cmd_translate(cfg, treq, std::cout, std::cerr);
        }
      },
      std::cerr);
}
