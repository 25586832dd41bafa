#include "xalign/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "xalign/error.hpp"
#include "xalign/evalsuite.hpp"
#include "xalign/linmap.hpp"
#include "xalign/modelsel.hpp"

namespace xalign {
namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

template <class Int>
std::string num(Int v) {
  return std::to_string(v);
}

std::string yes_no(bool b) { return b ? "true" : "false"; }

std::string join_paths(const std::vector<fs::path>& ps) {
  std::string out;
  for (const auto& p : ps) {
    if (!out.empty()) out += ',';
    out += p.generic_string();
  }
  return out;
}

// Runs one pipeline stage, prefixing its name to any library error.
template <class F>
auto stage(std::string_view name, F&& f) -> decltype(f()) {
  const std::string prefix = std::string(name) + ": ";
  try {
    return f();
  } catch (const UsageError& e) {
    throw UsageError(prefix + e.what());
  } catch (const IoError& e) {
    throw IoError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string());
}

void require_file(const fs::path& p, std::string_view what) {
  if (p.empty()) throw UsageError(std::string(what) + " path is required");
  if (!fs::is_regular_file(p)) throw IoError("no such file: " + p.string());
}

std::vector<std::string> provenance(const PipelineConfig& cfg) {
  return {"config_hash " + cfg.config_hash(), "seed " + std::to_string(cfg.seed)};
}

struct Spaces {
  EmbeddingSpace src;
  EmbeddingSpace tgt;
};

Spaces load_spaces(const PipelineConfig& cfg, std::ostream& log) {
  return stage("embed_io", [&] {
    require_file(cfg.src_embeddings, "source embeddings");
    require_file(cfg.tgt_embeddings, "target embeddings");
    LoadOptions so{cfg.max_vocab, cfg.lowercase, cfg.src_lang};
    LoadOptions to{cfg.max_vocab, cfg.lowercase, cfg.tgt_lang};
    Spaces s{normalize(load_embeddings(cfg.src_embeddings, so), cfg.normalization),
             normalize(load_embeddings(cfg.tgt_embeddings, to), cfg.normalization)};
    if (s.src.dim() != s.tgt.dim())
      throw UsageError("embedding dimensions differ (" + std::to_string(s.src.dim()) + " vs " +
                       std::to_string(s.tgt.dim()) + ")");
    log << "loaded " << s.src.size() << " source and " << s.tgt.size() << " target vectors (d="
        << s.src.dim() << ")\n";
    return s;
  });
}

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> PipelineConfig::canonical() const {
  std::string methods_s;
  for (RetrievalMethod m : methods) {
    if (!methods_s.empty()) methods_s += ',';
    methods_s += to_string(m);
  }
  const TrainConfig& t = train;
  return {
      {"src_embeddings", src_embeddings.generic_string()},
      {"tgt_embeddings", tgt_embeddings.generic_string()},
      {"src_lang", src_lang},
      {"tgt_lang", tgt_lang},
      {"max_vocab", num(max_vocab)},
      {"lowercase", yes_no(lowercase)},
      {"normalization", std::string(to_string(normalization))},
      {"supervised", yes_no(supervised)},
      {"supervision_dictionary", supervision_dictionary.generic_string()},
      {"eval_dictionaries", join_paths(eval_dictionaries)},
      {"reverse_eval_dictionaries", join_paths(reverse_eval_dictionaries)},
      {"wordsim_files", join_paths(wordsim_files)},
      {"src_sentences", src_sentences.generic_string()},
      {"tgt_sentences", tgt_sentences.generic_string()},
      {"src_idf_corpus", src_idf_corpus.generic_string()},
      {"tgt_idf_corpus", tgt_idf_corpus.generic_string()},
      {"bleu_sources", bleu_sources.generic_string()},
      {"bleu_references", bleu_references.generic_string()},
      {"bleu_known_only", yes_no(bleu_known_only)},
      {"batch_size", num(t.batch_size)},
      {"learning_rate", num(t.learning_rate)},
      {"map_learning_rate", t.map_learning_rate ? num(*t.map_learning_rate) : ""},
      {"lr_decay", num(t.lr_decay)},
      {"lr_shrink_on_criterion_drop", num(t.lr_shrink_on_criterion_drop)},
      {"epochs", num(t.epochs)},
      {"iterations_per_epoch", num(t.iterations_per_epoch)},
      {"discriminator_feed_limit", num(t.discriminator_feed_limit)},
      {"discriminator_steps", num(t.discriminator_steps)},
      {"smoothing", num(t.smoothing)},
      {"smooth_mapping_loss", yes_no(t.smooth_mapping_loss)},
      {"beta", num(t.beta)},
      {"hidden_dim", num(t.hidden_dim)},
      {"leaky_slope", num(t.leaky_slope)},
      {"input_dropout", num(t.input_dropout)},
      {"accuracy_samples", num(t.accuracy_samples)},
      {"n_queries", num(t.criterion.n_queries)},
      {"criterion_metric", std::string(to_string(t.criterion.metric))},
      {"dict_rank_cap", num(refine.dict_rank_cap)},
      {"n_iterations", num(refine.n_iterations)},
      {"refine_metric", std::string(to_string(refine.metric))},
      {"mutual_nn_only", yes_no(refine.mutual_nn_only)},
      {"csls_k", num(retrieval.csls_k)},
      {"isf_beta", num(retrieval.isf_beta)},
      {"isf_pool", num(retrieval.isf_pool)},
      {"source_rank_cap", num(retrieval.source_rank_cap)},
      {"methods", methods_s},
      {"oov_counts_wrong", yes_no(oov_counts_wrong)},
      {"seed", num(seed)},
  };
}

std::string PipelineConfig::config_hash() const {
  std::string text;
  for (const auto& [k, v] : canonical()) text += k + '=' + v + '\n';
  return hex64(fnv1a(text));
}

fs::path PipelineConfig::mapping_path() const {
  return mapping.empty() ? output_dir / "mapping.txt" : mapping;
}

void cmd_train(const PipelineConfig& cfg, std::ostream& log) {
  stage("train", [&] {
    cfg.train.validate();
    if (cfg.refine.n_iterations < 0) throw UsageError("n_iterations must be non-negative");
  });
  const Spaces sp = load_spaces(cfg, log);
  stage("output", [&] { ensure_dir(cfg.output_dir); });
  const auto comments = provenance(cfg);
  const auto clock0 = std::chrono::steady_clock::now();

  CriterionConfig crit = cfg.train.criterion;
  crit.csls_k = cfg.retrieval.csls_k;
  crit.source_rank_cap = cfg.retrieval.source_rank_cap;

  struct TracePoint {
    std::string stage;
    int step;
    double criterion;
    std::size_t dictionary_size;
  };
  std::vector<TracePoint> trace;
  MappingMatrix w = MappingMatrix::identity(sp.src.dim(), cfg.train.beta);
  Dictionary induced;

  if (cfg.supervised) {
    w = stage("procrustes", [&] {
      require_file(cfg.supervision_dictionary, "supervision dictionary");
      const DictionaryLoad dl = load_dictionary(cfg.supervision_dictionary, sp.src, sp.tgt);
      if (dl.dictionary.empty()) throw UsageError("supervision dictionary has no usable pairs");
      log << "supervision pairs: " << dl.dictionary.size() << " (dropped " << dl.dropped_pairs
          << ")\n";
      const auto [x, y] = gather_pairs(dl.dictionary, sp.src, sp.tgt);
      FitResult fit = procrustes(x, y);
      fit.map.beta = cfg.train.beta;
      induced = dl.dictionary;
      return fit.map;
    });
    trace.push_back({"procrustes", 0, validation_criterion(w, sp.src, sp.tgt, crit),
                     induced.size()});
  } else {
    TrainConfig tc = cfg.train;
    tc.rng_seed = cfg.seed;
    tc.criterion = crit;
    const TrainResult tr = stage("adversary", [&] {
      AdversarialTrainer trainer(sp.src, sp.tgt, tc);
      while (!trainer.done()) {
        const EpochRecord& r = trainer.run_epoch();
        log << "epoch " << r.epoch << " criterion " << fmt9(r.criterion) << " L_D "
            << fmt9(r.disc_loss) << " L_W " << fmt9(r.map_loss) << " acc "
            << fmt9(r.disc_accuracy) << '\n';
      }
      return trainer.result();
    });
    {
      std::ofstream h = open_out(cfg.output_dir / "history.csv");
      for (const auto& c : comments) h << "# " << c << '\n';
      write_history_csv(tr.history, h);
    }
    for (const EpochRecord& r : tr.history) trace.push_back({"adversarial", r.epoch, r.criterion, 0});
    w = tr.best_epoch >= 0 ? tr.best : w;

    RefineParams one = cfg.refine;
    one.n_iterations = 1;
    one.csls_k = cfg.retrieval.csls_k;
    for (int it = 1; it <= cfg.refine.n_iterations; ++it) {
      const RefineResult rr = stage("refine", [&] { return refine(w, sp.src, sp.tgt, one); });
      if (rr.aborted) {
        log << "refinement stopped: " << rr.diagnostic << '\n';
        break;
      }
      w = rr.map;
      induced = rr.last_dictionary;
      trace.push_back({"refine", it, validation_criterion(w, sp.src, sp.tgt, crit), induced.size()});
      log << "refine " << it << " dictionary " << induced.size() << " criterion "
          << fmt9(trace.back().criterion) << '\n';
    }
  }

  stage("output", [&] {
    save_mapping(w, cfg.output_dir / "mapping.txt", comments);
    save_dictionary(induced, sp.src, sp.tgt, cfg.output_dir / "dictionary.txt", comments);
    {
      std::ofstream t = open_out(cfg.output_dir / "criterion.csv");
      for (const auto& c : comments) t << "# " << c << '\n';
      t << "stage,step,criterion,dictionary_size\n";
      for (const auto& p : trace)
        t << p.stage << ',' << p.step << ',' << fmt9(p.criterion) << ',' << p.dictionary_size
          << '\n';
    }
    nlohmann::ordered_json run;
    run["schema_version"] = 1;
    run["config_hash"] = cfg.config_hash();
    run["seed"] = cfg.seed;
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& [k, v] : cfg.canonical()) c[k] = v;
    run["config"] = c;
    run["w_fingerprint"] = hex64(fingerprint(w.w));
    run["final_criterion"] = trace.empty() ? 0.0 : trace.back().criterion;
    run["dictionary_size"] = induced.size();
    const Vector sv = singular_values(w);
    run["singular_value_min"] = sv.minCoeff();
    run["singular_value_max"] = sv.maxCoeff();
    std::ofstream j = open_out(cfg.output_dir / "run.json");
    j << run.dump(2) << '\n';
  });
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock0).count();
  log << "wrote " << (cfg.output_dir / "mapping.txt").string() << " in " << fmt9(secs) << " s\n";
}

void cmd_evaluate(const PipelineConfig& cfg, std::ostream& log) {
  const MappingMatrix w = stage("linmap", [&] {
    require_file(cfg.mapping_path(), "mapping");
    return load_mapping(cfg.mapping_path());
  });
  const Spaces sp = load_spaces(cfg, log);
  if (w.dim() != sp.src.dim())
    throw UsageError("linmap: mapping dimension " + std::to_string(w.dim()) +
                     " does not match the embeddings (" + std::to_string(sp.src.dim()) + ")");
  stage("output", [&] { ensure_dir(cfg.output_dir); });

  EvalReport report;
  report.w_fingerprint = fingerprint(w.w);
  report.config_hash = cfg.config_hash();
  report.seed = cfg.seed;
  report.config = cfg.canonical();
  PrecisionOptions popt;
  popt.oov_counts_wrong = cfg.oov_counts_wrong;

  stage("word_translation", [&] {
    const std::string fwd = cfg.src_lang + "-" + cfg.tgt_lang;
    const std::string bwd = cfg.tgt_lang + "-" + cfg.src_lang;
    auto run_dicts = [&](const std::vector<fs::path>& files, const MappingMatrix& m,
                         const EmbeddingSpace& a, const EmbeddingSpace& b,
                         const std::string& dir) {
      if (files.empty()) return;
      Translator tr(m, a, b, cfg.retrieval);
      for (const fs::path& f : files) {
        require_file(f, "evaluation dictionary");
        const DictionaryLoad dl = load_dictionary(f, a, b);
        const std::string name = files.size() > 1 ? dir + ":" + f.stem().string() : dir;
        for (RetrievalMethod method : cfg.methods) {
          report.word_translation.push_back(
              {name, method,
               word_translation_precision(dl.dictionary, tr, method, popt,
                                          dl.oov_sources.size())});
          const auto& p = report.word_translation.back().result;
          log << name << ' ' << to_string(method) << " P@1 " << fmt9(p.at(1)) << '\n';
        }
      }
    };
    run_dicts(cfg.eval_dictionaries, w, sp.src, sp.tgt, fwd);
    const MappingMatrix wt{w.w.transpose(), w.beta};
    run_dicts(cfg.reverse_eval_dictionaries, wt, sp.tgt, sp.src, bwd);
  });

  stage("wordsim", [&] {
    for (const fs::path& f : cfg.wordsim_files) {
      require_file(f, "wordsim file");
      const WordSimDataset ds = load_wordsim(f, cfg.lowercase);
      report.wordsim.push_back({ds.name, wordsim_pearson(ds, w, sp.src, sp.tgt)});
    }
  });

  if (!cfg.src_sentences.empty() || !cfg.tgt_sentences.empty()) {
    stage("sentence_retrieval", [&] {
      require_file(cfg.src_sentences, "source sentences");
      require_file(cfg.tgt_sentences, "target sentences");
      const auto ss = load_sentences(cfg.src_sentences, cfg.lowercase);
      const auto ts = load_sentences(cfg.tgt_sentences, cfg.lowercase);
      auto idf_for = [&](const fs::path& corpus, const std::vector<Tokens>& fallback) {
        if (corpus.empty()) {
          log << "no idf corpus given; using the evaluation sentences\n";
          return IdfTable::from_corpus(fallback);
        }
        return IdfTable::from_corpus(load_sentences(corpus, cfg.lowercase));
      };
      const IdfTable si = idf_for(cfg.src_idf_corpus, ss);
      const IdfTable ti = idf_for(cfg.tgt_idf_corpus, ts);
      for (RetrievalMethod method : cfg.methods) {
        if (method == RetrievalMethod::isf) continue;
        SentenceRetrievalOptions so;
        so.method = method;
        so.csls_k = cfg.retrieval.csls_k;
        report.sentence_retrieval.push_back(
            {cfg.src_lang + "-" + cfg.tgt_lang, method,
             sentence_retrieval_precision(ss, ts, w, sp.src, sp.tgt, si, ti, so)});
      }
    });
  }

  if (!cfg.bleu_sources.empty() || !cfg.bleu_references.empty()) {
    stage("bleu", [&] {
      require_file(cfg.bleu_sources, "BLEU sources");
      require_file(cfg.bleu_references, "BLEU references");
      auto srcs = load_sentences(cfg.bleu_sources, cfg.lowercase);
      auto refs = load_sentences(cfg.bleu_references, cfg.lowercase);
      if (cfg.bleu_known_only) std::tie(srcs, refs) = keep_known_sources(srcs, refs, sp.src);
      Translator tr(w, sp.src, sp.tgt, cfg.retrieval);
      const RetrievalMethod method = cfg.methods.empty() ? RetrievalMethod::csls : cfg.methods.back();
      const TranslationMap map = build_translation_map(tr, sp.src, sp.tgt, method, sp.src.size());
      std::vector<Tokens> hyps;
      std::size_t passthrough = 0;
      for (const Tokens& s : srcs) {
        WordByWord t = word_by_word_translate(s, map);
        passthrough += t.passthrough;
        hyps.push_back(std::move(t.tokens));
      }
      report.bleu.push_back(
          {cfg.src_lang + "-" + cfg.tgt_lang, corpus_bleu(hyps, refs), hyps.size(), passthrough});
    });
  }

  stage("output", [&] {
    {
      std::ofstream j = open_out(cfg.output_dir / "report.json");
      j << report_json(report);
    }
    std::ofstream c = open_out(cfg.output_dir / "precision.csv");
    for (const auto& line : provenance(cfg)) c << "# " << line << '\n';
    write_precision_csv(report.word_translation, c);
  });
  log << "wrote " << (cfg.output_dir / "report.json").string() << '\n';
}

void cmd_translate(const PipelineConfig& cfg, const TranslateRequest& req, std::ostream& out,
                   std::ostream& log) {
  if (req.words.empty() && req.sentences.empty())
    throw UsageError("translate: give query words or a sentence file");
  if (!req.references.empty() && req.sentences.empty())
    throw UsageError("translate: references need a sentence file");
  const MappingMatrix w = stage("linmap", [&] {
    require_file(cfg.mapping_path(), "mapping");
    return load_mapping(cfg.mapping_path());
  });
  const Spaces sp = load_spaces(cfg, log);
  Translator tr = stage("metric", [&] { return Translator(w, sp.src, sp.tgt, cfg.retrieval); });

  if (!req.words.empty()) {
    stage("translate", [&] {
      std::vector<Index> queries;
      for (const auto& word : req.words) {
        const auto row = sp.src.find(word);
        if (!row) throw UsageError("query word '" + word + "' is not in the source vocabulary");
        queries.push_back(*row);
      }
      const Index k = std::clamp<Index>(req.top_k, 1, sp.tgt.size());
      const RetrievalResult res = tr.translate(queries, req.method, k);
      write_retrieval_tsv(res, sp.src, sp.tgt, out);
    });
  }
  if (!req.sentences.empty()) {
    stage("translate", [&] {
      require_file(req.sentences, "sentence file");
      const auto sents = load_sentences(req.sentences, cfg.lowercase);
      const TranslationMap map = build_translation_map(tr, sp.src, sp.tgt, req.method, sp.src.size());
      std::vector<Tokens> hyps;
      std::size_t passthrough = 0;
      for (const Tokens& s : sents) {
        WordByWord t = word_by_word_translate(s, map);
        passthrough += t.passthrough;
        for (std::size_t i = 0; i < t.tokens.size(); ++i) out << (i ? " " : "") << t.tokens[i];
        out << '\n';
        hyps.push_back(std::move(t.tokens));
      }
      log << "untranslated tokens: " << passthrough << '\n';
      if (!req.references.empty()) {
        require_file(req.references, "reference file");
        const auto refs = load_sentences(req.references, cfg.lowercase);
        log << "BLEU " << fmt9(corpus_bleu(hyps, refs)) << '\n';
      }
    });
  }
}

void cmd_synth(const SynthRequest& req, std::ostream& log) {
  const SynthPair pair = stage("synthgen", [&] { return generate_pair(req.config); });
  stage("output", [&] {
    ensure_dir(req.output_dir);
    const SynthConfig& c = req.config;
    std::vector<std::pair<std::string, std::string>> canon{
        {"preset", req.preset},
        {"n_words", num(c.n_words)},
        {"dim", num(c.dim)},
        {"seed", num(c.rng_seed)},
        {"noise_sigma", num(c.noise_sigma)},
        {"rotation", c.rotation == RotationKind::planted ? "planted" : "identity"},
        {"hub_count", num(c.hub_count)},
        {"zipf_exponent", num(c.zipf_exponent)},
        {"clusters", num(c.clusters)},
        {"cluster_spread", num(c.cluster_spread)},
        {"mean_offset", num(c.mean_offset)},
        {"spectrum_decay", num(c.spectrum_decay)},
        {"hub_noise", num(c.hub_noise)},
    };
    std::string text;
    for (const auto& [k, v] : canon) text += k + '=' + v + '\n';
    const std::string hash = hex64(fnv1a(text));
    const std::vector<std::string> comments{"config_hash " + hash,
                                            "seed " + std::to_string(c.rng_seed)};

    save_embeddings(pair.src, req.output_dir / "src.vec");
    save_embeddings(pair.tgt, req.output_dir / "tgt.vec");
    save_dictionary(pair.gold, pair.src, pair.tgt, req.output_dir / "gold.txt", comments);
    // Every fifth pair goes to the test split.
    std::vector<WordPair> train, test;
    for (std::size_t i = 0; i < pair.gold.pairs.size(); ++i)
      (i % 5 == 0 ? test : train).push_back(pair.gold.pairs[i]);
    save_dictionary(Dictionary::from_pairs(train), pair.src, pair.tgt,
                    req.output_dir / "gold.train.txt", comments);
    save_dictionary(Dictionary::from_pairs(test), pair.src, pair.tgt,
                    req.output_dir / "gold.test.txt", comments);
    save_mapping(pair.planted, req.output_dir / "planted.txt", comments);

    nlohmann::ordered_json m;
    m["schema_version"] = 1;
    m["config_hash"] = hash;
    m["seed"] = c.rng_seed;
    nlohmann::ordered_json cj = nlohmann::ordered_json::object();
    for (const auto& [k, v] : canon) cj[k] = v;
    m["config"] = cj;
    m["src_fingerprint"] = hex64(fingerprint(pair.src.vectors().cast<double>()));
    m["tgt_fingerprint"] = hex64(fingerprint(pair.tgt.vectors().cast<double>()));
    m["hub_rows"] = pair.hub_rows;
    std::ofstream j = open_out(req.output_dir / "manifest.json");
    j << m.dump(2) << '\n';
  });
  log << "wrote synthetic pair to " << req.output_dir.string() << '\n';
}

int run_command(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return exit_ok;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_usage;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return exit_io;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return exit_numerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_other;
  }
}

}  // namespace xalign
