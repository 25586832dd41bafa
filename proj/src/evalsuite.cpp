#include "xalign/evalsuite.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "xalign/error.hpp"

namespace xalign {
namespace {

void check_ks(const std::vector<Index>& ks) {
  if (ks.empty()) throw UsageError("no precision cutoffs requested");
  for (Index k : ks)
    if (k < 1) throw UsageError("precision cutoff must be positive");
}

Index max_k(const std::vector<Index>& ks, Index n_keys) {
  return std::min(*std::max_element(ks.begin(), ks.end()), n_keys);
}

// Rank (0-based) of the first hit that satisfies `is_gold`, or -1.
template <class Pred>
Index first_hit(std::span<const Index> hits, Pred is_gold) {
  for (std::size_t r = 0; r < hits.size(); ++r)
    if (is_gold(hits[r])) return static_cast<Index>(r);
  return -1;
}

PrecisionAtK tally(const std::vector<Index>& ks, const std::vector<Index>& first_ranks,
                   std::size_t extra_misses) {
  PrecisionAtK out;
  out.ks = ks;
  out.queries = first_ranks.size() + extra_misses;
  out.oov_queries = extra_misses;
  for (Index k : ks) {
    std::size_t correct = 0;
    for (Index r : first_ranks)
      if (r >= 0 && r < k) ++correct;
    out.precision.push_back(out.queries == 0 ? 0.0
                                             : static_cast<double>(correct) /
                                                   static_cast<double>(out.queries));
  }
  return out;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::ifstream open_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

nlohmann::ordered_json precision_json(const PrecisionAtK& p) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json at = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < p.ks.size(); ++i)
    at[std::to_string(p.ks[i])] = p.precision[i];
  j["precision"] = at;
  j["queries"] = p.queries;
  j["oov_queries"] = p.oov_queries;
  return j;
}

// Counts of every n-gram of one order.
std::map<std::vector<std::string_view>, std::size_t> ngram_counts(const Tokens& toks,
                                                                  std::size_t n) {
  std::map<std::vector<std::string_view>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::vector<std::string_view> g;
    g.reserve(n);
    for (std::size_t j = 0; j < n; ++j) g.emplace_back(toks[i + j]);
    ++counts[g];
  }
  return counts;
}

}  // namespace

double PrecisionAtK::at(Index k) const {
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (ks[i] == k) return precision[i];
  throw UsageError("precision@" + std::to_string(k) + " was not evaluated");
}

PrecisionAtK word_translation_precision(const Dictionary& dict, Translator& translator,
                                        RetrievalMethod method, const PrecisionOptions& options,
                                        std::size_t oov_sources) {
  check_ks(options.ks);
  if (dict.empty()) throw UsageError("evaluation dictionary has no in-vocabulary pairs");
  const std::vector<Index> sources = dict.unique_sources();
  std::unordered_map<Index, std::unordered_set<Index>> gold;
  for (const WordPair& p : dict.pairs) gold[p.src].insert(p.tgt);

  const Index k = max_k(options.ks, translator.target().rows());
  const RetrievalResult res = translator.translate(sources, method, k);
  std::vector<Index> first(sources.size());
  for (std::size_t q = 0; q < sources.size(); ++q) {
    const auto& targets = gold.at(sources[q]);
    first[q] = first_hit(res.targets_of(q), [&](Index t) { return targets.contains(t); });
  }
  PrecisionAtK out = tally(options.ks, first, options.oov_counts_wrong ? oov_sources : 0);
  out.oov_queries = oov_sources;
  return out;
}

PrecisionAtK word_translation_precision(const Dictionary& dict, const MappingMatrix& w,
                                        const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                                        RetrievalMethod method, const PrecisionOptions& options,
                                        const RetrievalOptions& retrieval,
                                        std::size_t oov_sources) {
  Translator t(w, src, tgt, retrieval);
  return word_translation_precision(dict, t, method, options, oov_sources);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("pearson: series lengths differ");
  if (a.size() < 2) throw UsageError("pearson: need at least 2 points");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw NumericalError("pearson: zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

WordSimDataset load_wordsim(const std::filesystem::path& path, bool lowercase) {
  std::ifstream in = open_text(path);
  WordSimDataset ds;
  ds.name = path.stem().string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    WordSimPair p;
    std::string score;
    if (!(ls >> p.src >> p.tgt >> score))
      throw FormatError(path.string(), lineno, "expected 'word1 word2 score'");
    try {
      std::size_t used = 0;
      p.score = std::stod(score, &used);
      if (used != score.size()) throw std::invalid_argument(score);
    } catch (const std::exception&) {
      throw FormatError(path.string(), lineno, "bad score '" + score + "'");
    }
    if (!std::isfinite(p.score)) throw FormatError(path.string(), lineno, "non-finite score");
    if (lowercase) {
      p.src = lower_ascii(p.src);
      p.tgt = lower_ascii(p.tgt);
    }
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

WordSimResult wordsim_pearson(const WordSimDataset& ds, const MappingMatrix& w,
                              const EmbeddingSpace& src, const EmbeddingSpace& tgt) {
  std::vector<Index> s_rows, t_rows;
  std::vector<double> human;
  WordSimResult out;
  for (const WordSimPair& p : ds.pairs) {
    const auto s = src.find(p.src);
    const auto t = tgt.find(p.tgt);
    if (!s || !t) {
      ++out.oov_pairs;
      continue;
    }
    s_rows.push_back(*s);
    t_rows.push_back(*t);
    human.push_back(p.score);
  }
  if (human.size() < 2)
    throw UsageError("wordsim '" + ds.name + "': fewer than 2 in-vocabulary pairs");
  const Matrix xs = normalized_rows(apply_map(w, src.rows(s_rows)));
  const Matrix yt = normalized_rows(tgt.rows(t_rows));
  std::vector<double> model(human.size());
  for (std::size_t i = 0; i < human.size(); ++i)
    model[i] = xs.row(static_cast<Index>(i)).dot(yt.row(static_cast<Index>(i)));
  out.used_pairs = human.size();
  out.pearson = pearson(model, human);
  return out;
}

IdfTable IdfTable::from_corpus(std::span<const Tokens> sentences) {
  if (sentences.empty()) throw UsageError("idf corpus is empty");
  std::unordered_map<std::string, std::size_t> df;
  for (const Tokens& s : sentences) {
    std::unordered_set<std::string_view> seen(s.begin(), s.end());
    for (std::string_view w : seen) ++df[std::string(w)];
  }
  IdfTable t;
  t.documents_ = sentences.size();
  const double n = static_cast<double>(sentences.size());
  t.fallback_ = std::log(n);
  for (const auto& [w, c] : df) t.weights_[w] = std::log(n / static_cast<double>(c));
  return t;
}

IdfTable IdfTable::from_weights(std::unordered_map<std::string, double> weights,
                                double fallback) {
  IdfTable t;
  t.weights_ = std::move(weights);
  t.fallback_ = fallback;
  return t;
}

double IdfTable::weight(std::string_view word, bool* unseen) const {
  const auto it = weights_.find(std::string(word));
  if (unseen) *unseen = it == weights_.end();
  return it == weights_.end() ? fallback_ : it->second;
}

SentenceVector sentence_embedding(std::span<const std::string> tokens,
                                  const EmbeddingSpace& space, const IdfTable& idf) {
  SentenceVector out;
  out.vector = Vector::Zero(space.dim());
  double total = 0.0;
  for (const std::string& tok : tokens) {
    const auto row = space.find(tok);
    if (!row) continue;
    const double wgt = idf.weight(tok);
    if (wgt <= 0.0) continue;
    out.vector += wgt * space.vectors().row(*row).cast<double>().transpose();
    total += wgt;
    ++out.used_tokens;
  }
  if (total > 0.0) {
    out.vector /= total;
    out.empty = false;
  } else {
    out.vector.setZero();
  }
  return out;
}

SentenceRetrievalResult sentence_retrieval_precision(
    std::span<const Tokens> src_sents, std::span<const Tokens> tgt_sents, const MappingMatrix& w,
    const EmbeddingSpace& src, const EmbeddingSpace& tgt, const IdfTable& src_idf,
    const IdfTable& tgt_idf, const SentenceRetrievalOptions& options,
    std::span<const Index> alignment) {
  check_ks(options.ks);
  if (src_sents.empty() || tgt_sents.empty()) throw UsageError("empty sentence set");
  if (alignment.empty() && src_sents.size() > tgt_sents.size())
    throw UsageError("more source sentences than targets without an alignment");
  if (!alignment.empty() && alignment.size() != src_sents.size())
    throw UsageError("alignment size differs from the source sentence count");
  if (options.method == RetrievalMethod::isf)
    throw UsageError("sentence retrieval supports nn and csls");

  SentenceRetrievalResult out;
  Matrix xs(static_cast<Index>(src_sents.size()), src.dim());
  for (std::size_t i = 0; i < src_sents.size(); ++i) {
    const SentenceVector v = sentence_embedding(src_sents[i], src, src_idf);
    out.empty_sources += v.empty ? 1 : 0;
    xs.row(static_cast<Index>(i)) = v.vector.transpose();
  }
  Matrix yt(static_cast<Index>(tgt_sents.size()), tgt.dim());
  for (std::size_t i = 0; i < tgt_sents.size(); ++i) {
    const SentenceVector v = sentence_embedding(tgt_sents[i], tgt, tgt_idf);
    out.empty_targets += v.empty ? 1 : 0;
    yt.row(static_cast<Index>(i)) = v.vector.transpose();
  }
  const Matrix q = normalized_rows(apply_map(w, xs));
  const Matrix keys = normalized_rows(yt);
  const Index k = max_k(options.ks, keys.rows());
  TopK hits;
  if (options.method == RetrievalMethod::csls) {
    const Index nk = std::min({options.csls_k, q.rows(), keys.rows()});
    const NeighborhoodStats st = neighborhood_stats(q, keys, nk);
    hits = scored_top_k(q, keys, k, 2.0, &st.r_tgt, &st.r_src);
  } else {
    hits = scored_top_k(q, keys, k);
  }
  std::vector<Index> first(src_sents.size());
  for (std::size_t i = 0; i < src_sents.size(); ++i) {
    const Index want = alignment.empty() ? static_cast<Index>(i) : alignment[i];
    first[i] = first_hit(hits.indices_of(static_cast<Index>(i)),
                         [want](Index t) { return t == want; });
  }
  out.precision = tally(options.ks, first, 0);
  return out;
}

TranslationMap build_translation_map(Translator& translator, const EmbeddingSpace& src,
                                     const EmbeddingSpace& tgt, RetrievalMethod method,
                                     Index limit) {
  const Index n = std::clamp<Index>(limit, 0, src.size());
  TranslationMap map;
  if (n == 0) return map;
  std::vector<Index> queries(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) queries[static_cast<std::size_t>(i)] = i;
  const RetrievalResult res = translator.translate(queries, method, 1);
  for (std::size_t q = 0; q < queries.size(); ++q)
    map.emplace(src.word(queries[q]), tgt.word(res.targets_of(q)[0]));
  return map;
}

WordByWord word_by_word_translate(std::span<const std::string> sentence,
                                  const TranslationMap& map) {
  WordByWord out;
  out.tokens.reserve(sentence.size());
  for (const std::string& tok : sentence) {
    const auto it = map.find(tok);
    if (it == map.end()) {
      out.tokens.push_back(tok);
      ++out.passthrough;
    } else {
      out.tokens.push_back(it->second);
    }
  }
  return out;
}

BleuStats bleu_stats(std::span<const Tokens> hypotheses, std::span<const Tokens> references) {
  if (hypotheses.size() != references.size())
    throw UsageError("BLEU: hypothesis and reference counts differ");
  if (hypotheses.empty()) throw UsageError("BLEU: empty corpus");
  BleuStats st;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const Tokens& h = hypotheses[s];
    const Tokens& r = references[s];
    st.hyp_length += h.size();
    st.ref_length += r.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      if (h.size() < n) continue;
      st.totals[n - 1] += h.size() - n + 1;
      const auto hc = ngram_counts(h, n);
      const auto rc = ngram_counts(r, n);
      for (const auto& [g, c] : hc) {
        const auto it = rc.find(g);
        if (it != rc.end()) st.matches[n - 1] += std::min(c, it->second);
      }
    }
  }
  return st;
}

double bleu_from_stats(const BleuStats& st) {
  if (st.hyp_length == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (st.matches[n] == 0 || st.totals[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(st.matches[n]) / static_cast<double>(st.totals[n]));
  }
  const double ratio = static_cast<double>(st.ref_length) / static_cast<double>(st.hyp_length);
  const double log_bp = std::min(0.0, 1.0 - ratio);
  return 100.0 * std::exp(log_bp + log_sum / 4.0);
}

double corpus_bleu(std::span<const Tokens> hypotheses, std::span<const Tokens> references) {
  return bleu_from_stats(bleu_stats(hypotheses, references));
}

Tokens tokenize(std::string_view line, bool lowercase) {
  Tokens out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(lowercase ? lower_ascii(line.substr(i, j - i))
                                       : std::string(line.substr(i, j - i)));
    i = j;
  }
  return out;
}

std::vector<Tokens> load_sentences(const std::filesystem::path& path, bool lowercase) {
  std::ifstream in = open_text(path);
  std::vector<Tokens> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(tokenize(line, lowercase));
  return out;
}

std::pair<std::vector<Tokens>, std::vector<Tokens>> keep_known_sources(
    std::span<const Tokens> sources, std::span<const Tokens> references,
    const EmbeddingSpace& space) {
  if (sources.size() != references.size())
    throw UsageError("source and reference counts differ");
  std::pair<std::vector<Tokens>, std::vector<Tokens>> out;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const bool known = std::all_of(sources[i].begin(), sources[i].end(),
                                   [&](const std::string& t) { return space.find(t).has_value(); });
    if (!known) continue;
    out.first.push_back(sources[i]);
    out.second.push_back(references[i]);
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  using json = nlohmann::ordered_json;
  json j;
  j["schema_version"] = EvalReport::schema_version;
  json meta;
  meta["w_fingerprint"] = hex64(report.w_fingerprint);
  meta["config_hash"] = report.config_hash;
  meta["seed"] = report.seed;
  json cfg = json::object();
  for (const auto& [k, v] : report.config) cfg[k] = v;
  meta["config"] = cfg;
  j["metadata"] = meta;

  json wt = json::array();
  for (const auto& row : report.word_translation) {
    json r = precision_json(row.result);
    r["direction"] = row.direction;
    r["method"] = std::string(to_string(row.method));
    wt.push_back(r);
  }
  j["word_translation"] = wt;

  json ws = json::array();
  for (const auto& row : report.wordsim) {
    json r;
    r["dataset"] = row.dataset;
    r["pearson"] = row.result.pearson;
    r["used_pairs"] = row.result.used_pairs;
    r["oov_pairs"] = row.result.oov_pairs;
    ws.push_back(r);
  }
  j["wordsim"] = ws;

  json sr = json::array();
  for (const auto& row : report.sentence_retrieval) {
    json r = precision_json(row.result.precision);
    r["direction"] = row.direction;
    r["method"] = std::string(to_string(row.method));
    r["empty_sources"] = row.result.empty_sources;
    r["empty_targets"] = row.result.empty_targets;
    sr.push_back(r);
  }
  j["sentence_retrieval"] = sr;

  json bl = json::array();
  for (const auto& row : report.bleu) {
    json r;
    r["direction"] = row.direction;
    r["score"] = row.score;
    r["sentences"] = row.sentences;
    r["passthrough_tokens"] = row.passthrough_tokens;
    bl.push_back(r);
  }
  j["bleu"] = bl;
  return j.dump(2) + "\n";
}

void write_precision_csv(const std::vector<WordTranslationRow>& rows, std::ostream& out) {
  std::vector<std::string> directions;
  std::vector<RetrievalMethod> methods;
  for (const auto& r : rows) {
    if (std::find(directions.begin(), directions.end(), r.direction) == directions.end())
      directions.push_back(r.direction);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
  }
  out << "method,k";
  for (const auto& d : directions) out << ',' << d;
  out << '\n';
  std::vector<Index> ks;
  for (const auto& r : rows)
    for (Index k : r.result.ks)
      if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
  std::sort(ks.begin(), ks.end());
  char buf[32];
  for (RetrievalMethod m : methods) {
    for (Index k : ks) {
      out << to_string(m) << ',' << k;
      for (const auto& d : directions) {
        out << ',';
        for (const auto& r : rows) {
          if (r.method != m || r.direction != d) continue;
          const auto it = std::find(r.result.ks.begin(), r.result.ks.end(), k);
          if (it == r.result.ks.end()) continue;
          std::snprintf(buf, sizeof buf, "%.1f",
                        100.0 * r.result.precision[static_cast<std::size_t>(it - r.result.ks.begin())]);
          out << buf;
        }
      }
      out << '\n';
    }
  }
}

}  // namespace xalign
