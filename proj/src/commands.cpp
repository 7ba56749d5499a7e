#include "splat/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"
#include "splat/optimizer.hpp"
#include "splat/rss.hpp"
#include "splat/synth.hpp"

namespace splat {

namespace fs = std::filesystem;
using nlohmann::json;

void OptimConfig::validate() const {
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0))
    throw std::runtime_error("config: warmup_fraction must be in (0,1)");
  if (batch_size < 1) throw std::runtime_error("config: batch_size must be >= 1");
  if (epochs < 0) throw std::runtime_error("config: epochs must be >= 0");
  if (learning_rate <= 0.0) throw std::runtime_error("config: learning_rate must be positive");
}

void RunConfig::validate() const {
  optim.validate();
  model.head.validate();
  if (pretrain_steps < 1) throw std::runtime_error("config: pretrain_steps must be >= 1");
  if (fuzzy_threshold < 0.0 || fuzzy_threshold > 1.0)
    throw std::runtime_error("config: fuzzy_threshold must be in [0,1]");
}

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(origin + ": malformed JSON at byte " + std::to_string(e.byte) + ": " +
                             e.what());
  }
  RunConfig cfg;
  cfg.seed = j.value("seed", 0ull);
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    cfg.model.encoder.n_layers = e.value("n_layers", cfg.model.encoder.n_layers);
    cfg.model.encoder.d_model = e.value("d_model", cfg.model.encoder.d_model);
    cfg.model.encoder.n_heads = e.value("n_heads", cfg.model.encoder.n_heads);
    cfg.model.encoder.d_ff = e.value("d_ff", cfg.model.encoder.d_ff);
    cfg.model.encoder.window_w = e.value("window_w", cfg.model.encoder.window_w);
    cfg.model.encoder.max_seq_len = e.value("max_seq_len", cfg.model.encoder.max_seq_len);
    cfg.model.encoder.dropout_rate = e.value("dropout_rate", cfg.model.encoder.dropout_rate);
  }
  if (j.contains("head")) {
    const json& h = j["head"];
    cfg.model.head.l_ans = h.value("l_ans", cfg.model.head.l_ans);
    cfg.model.head.hidden_width = h.value("hidden_width", cfg.model.head.hidden_width);
    cfg.model.head.n_head_layers = h.value("n_head_layers", cfg.model.head.n_head_layers);
  }
  cfg.model.head.d_model = cfg.model.encoder.d_model;
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    cfg.optim.learning_rate = o.value("learning_rate", cfg.optim.learning_rate);
    cfg.optim.warmup_fraction = o.value("warmup_fraction", cfg.optim.warmup_fraction);
    cfg.optim.epochs = o.value("epochs", cfg.optim.epochs);
    cfg.optim.batch_size = o.value("batch_size", cfg.optim.batch_size);
  }
  if (j.contains("paths")) {
    const json& p = j["paths"];
    cfg.paths.schema = p.value("schema", "");
    cfg.paths.dialogues = p.value("dialogues", "");
    cfg.paths.dev_dialogues = p.value("dev_dialogues", "");
    cfg.paths.vocab = p.value("vocab", "");
    cfg.paths.params = p.value("params", "");
    cfg.paths.corpus = p.value("corpus", "");
    cfg.paths.output = p.value("output", "");
  }
  if (j.contains("gen")) {
    cfg.gen.n_services = j["gen"].value("n_services", cfg.gen.n_services);
    cfg.gen.n_dialogues = j["gen"].value("n_dialogues", cfg.gen.n_dialogues);
  }
  for (const json& v : j.value("variants", json::array()))
    cfg.variants.push_back(v.get<std::string>());
  const std::string mode = j.value("eval_mode", "fuzzy");
  if (mode == "fuzzy")
    cfg.eval_mode = MatchMode::Fuzzy;
  else if (mode == "exact")
    cfg.eval_mode = MatchMode::Exact;
  else
    throw std::runtime_error(origin + ": eval_mode must be fuzzy or exact");
  cfg.fuzzy_threshold = j.value("fuzzy_threshold", cfg.fuzzy_threshold);
  cfg.pretrain_steps = j.value("pretrain_steps", cfg.pretrain_steps);
  cfg.cache_rss_instances = j.value("cache_rss_instances", cfg.cache_rss_instances);
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str(), path);
}

namespace {

void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  os << content;
  if (!os) throw std::runtime_error("write failed for '" + p.string() + "'");
}

fs::path out_dir(const RunConfig& cfg) {
  if (cfg.paths.output.empty()) throw std::runtime_error("config: paths.output is required");
  fs::create_directories(cfg.paths.output);
  return cfg.paths.output;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Vocabulary load_or_build_vocab(const RunConfig& cfg, const Corpus& corpus) {
  if (!cfg.paths.vocab.empty() && fs::exists(cfg.paths.vocab))
    return Vocabulary::load(cfg.paths.vocab);
  Vocabulary vocab = Vocabulary::build(corpus_documents(corpus.schemas, corpus.dialogues), 1);
  const fs::path dest =
      cfg.paths.vocab.empty() ? out_dir(cfg) / "vocab.json" : fs::path(cfg.paths.vocab);
  fs::create_directories(dest.parent_path().empty() ? fs::path(".") : dest.parent_path());
  vocab.save(dest.string());
  return vocab;
}

std::vector<DstInstance> corpus_instances(const Corpus& corpus, const Vocabulary& vocab,
                                          const SplatConfig& cfg) {
  std::vector<DstInstance> out;
  for (const Dialogue& d : corpus.dialogues) {
    const ServiceSchema& schema = corpus.schema_of(d.service);
    std::vector<DstInstance> insts = build_instances(schema, d, vocab, cfg);
    for (DstInstance& i : insts) out.push_back(std::move(i));
  }
  return out;
}

namespace {

void check_params_match(const ParamStore& params, const Vocabulary& vocab,
                        const SplatConfig& cfg) {
  const Tensor& tok = params.at("encoder.embed.tok");
  if (tok.dim(0) != vocab.size())
    throw std::runtime_error("params/vocab mismatch: embedding table has " +
                             std::to_string(tok.dim(0)) + " rows, vocabulary has " +
                             std::to_string(vocab.size()) + " entries");
  if (tok.dim(1) != cfg.encoder.d_model)
    throw std::runtime_error("params/config mismatch: embedding width " +
                             std::to_string(tok.dim(1)) + " vs configured d_model " +
                             std::to_string(cfg.encoder.d_model));
}

std::string prediction_line(const DstInstance& inst, const DialogueState& state) {
  json j;
  j["dialogue_id"] = inst.dialogue_id;
  j["turn_index"] = inst.turn_index;
  j["active_intent"] = state.active_intent;
  j["slot_values"] = state.slot_values;
  return j.dump();
}

}  // namespace

EvalReport evaluate_corpus(ParamStore& params, const SplatConfig& cfg, const Corpus& corpus,
                           const Vocabulary& vocab, MatchMode mode, double threshold,
                           std::string* predictions_jsonl) {
  check_params_match(params, vocab, cfg);
  std::vector<TurnRecord> turns;
  std::map<std::string, const ServiceSchema*> schema_index;
  for (const ServiceSchema& s : corpus.schemas) schema_index[s.service_name] = &s;
  std::string lines;
  for (const Dialogue& d : corpus.dialogues) {
    const ServiceSchema& schema = corpus.schema_of(d.service);
    for (const DstInstance& inst : build_instances(schema, d, vocab, cfg)) {
      TurnRecord rec;
      rec.dialogue_id = inst.dialogue_id;
      rec.turn_index = inst.turn_index;
      rec.service = inst.service_name;
      rec.gold = inst.gold_state;
      rec.pred = model_predict(params, cfg, inst, schema, vocab);
      if (predictions_jsonl) lines += prediction_line(inst, rec.pred) + "\n";
      turns.push_back(std::move(rec));
    }
  }
  if (predictions_jsonl) *predictions_jsonl = std::move(lines);
  return build_report(std::move(turns), schema_index, mode, threshold,
                      static_cast<int>(corpus.unreachable.size()));
}

void cmd_gen_synth(const RunConfig& cfg) {
  const fs::path dir = out_dir(cfg);
  SynthOutput synth = gen_synth(cfg.seed, cfg.gen.n_services, cfg.gen.n_dialogues);
  write_file(dir / "schema.json", schemas_to_json(synth.schemas));
  write_file(dir / "dialogues.json", dialogues_to_json(synth.dialogues));
  std::string corpus_text;
  for (const std::string& doc : synth.rss_docs) corpus_text += doc + "\n";
  write_file(dir / "rss_corpus.txt", corpus_text);

  Corpus corpus = validate_corpus(synth.schemas, synth.dialogues);
  std::vector<std::string> docs = corpus_documents(corpus.schemas, corpus.dialogues);
  docs.insert(docs.end(), synth.rss_docs.begin(), synth.rss_docs.end());
  Vocabulary vocab = Vocabulary::build(docs, 1);
  vocab.save((dir / "vocab.json").string());
  std::cout << "gen-synth: " << synth.schemas.size() << " services, " << synth.dialogues.size()
            << " dialogues, " << synth.rss_docs.size() << " rss docs, vocab " << vocab.size()
            << ", unreachable " << corpus.unreachable.size() << "\n";
}

TrainResult cmd_train(const RunConfig& cfg) {
  const fs::path dir = out_dir(cfg);
  Corpus corpus = load_corpus(cfg.paths.schema, cfg.paths.dialogues);
  Corpus dev = cfg.paths.dev_dialogues.empty()
                   ? corpus
                   : validate_corpus(corpus.schemas, load_dialogues(cfg.paths.dev_dialogues));
  Vocabulary vocab = load_or_build_vocab(cfg, corpus);

  SplatConfig model_cfg = cfg.model;
  model_cfg.encoder.vocab_size = vocab.size();
  model_cfg.validate();

  ParamStore params = cfg.paths.params.empty() ? ParamStore(cfg.seed)
                                               : ParamStore::load(cfg.paths.params);
  if (cfg.paths.params.empty()) init_model_params(params, model_cfg);
  check_params_match(params, vocab, model_cfg);

  std::vector<DstInstance> all = corpus_instances(corpus, vocab, model_cfg);
  std::vector<const DstInstance*> train;
  for (const DstInstance& i : all)
    if (i.reachable) train.push_back(&i);
  if (train.empty()) throw std::runtime_error("train: no trainable instances");

  const int n_train = static_cast<int>(train.size());
  const int steps_per_epoch = (n_train + cfg.optim.batch_size - 1) / cfg.optim.batch_size;
  LrSchedule sched{cfg.optim.learning_rate, cfg.optim.warmup_fraction,
                   std::max(1, cfg.optim.epochs * steps_per_epoch)};
  Adam adam;

  TrainResult result;
  result.best_epoch = 0;
  double best_jga = -1.0;
  std::vector<double> best_snapshot;  // concatenated parameter values
  auto snapshot = [&]() {
    std::vector<double> flat;
    for (const auto& [path, t] : params.entries())
      flat.insert(flat.end(), t.values().begin(), t.values().end());
    return flat;
  };
  auto restore = [&](const std::vector<double>& flat) {
    size_t ofs = 0;
    for (auto& [path, t] : params.entries()) {
      std::copy_n(flat.begin() + static_cast<long>(ofs), t.values().size(),
                  t.mutable_values().begin());
      ofs += t.values().size();
    }
  };

  // The initialization is the fallback checkpoint (epochs == 0).
  {
    EvalReport r = evaluate_corpus(params, model_cfg, dev, vocab, cfg.eval_mode,
                                   cfg.fuzzy_threshold);
    best_jga = r.jga;
    best_snapshot = snapshot();
  }

  int step = 0;
  for (int epoch = 1; epoch <= cfg.optim.epochs; ++epoch) {
    std::vector<int> order(static_cast<size_t>(n_train));
    for (int i = 0; i < n_train; ++i) order[static_cast<size_t>(i)] = i;
    Rng shuffle_rng(Rng::mix(cfg.seed, 1000 + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    Rng dropout_rng(Rng::mix(cfg.seed, 5000 + static_cast<uint64_t>(epoch)));

    double epoch_loss = 0.0;
    int cursor = 0;
    while (cursor < n_train) {
      const int take = std::min(cfg.optim.batch_size, n_train - cursor);
      params.zero_grads();
      double batch_loss = 0.0;
      for (int b = 0; b < take; ++b) {
        const DstInstance& inst = *train[static_cast<size_t>(order[static_cast<size_t>(cursor + b)])];
        Rng* drop = model_cfg.encoder.dropout_rate > 0.0 ? &dropout_rng : nullptr;
        ModelOutputs out = model_forward(params, model_cfg, inst, true, drop);
        const double l = out.loss.item();
        if (!std::isfinite(l))
          throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   " step " + std::to_string(step + 1) + " on dialogue '" +
                                   inst.dialogue_id + "'");
        batch_loss += l;
        out.loss.backward();
      }
      ++step;
      const double lr = sched.at(step);
      adam.step(params, lr, static_cast<double>(take));
      cursor += take;
      epoch_loss += batch_loss;
      std::cout << "train epoch " << epoch << " step " << step << " lr " << lr << " loss "
                << batch_loss / take << "\n";
    }
    result.mean_loss_per_epoch.push_back(epoch_loss / n_train);

    params.save((dir / ("checkpoint_epoch_" + std::to_string(epoch) + ".params")).string());
    EvalReport r =
        evaluate_corpus(params, model_cfg, dev, vocab, cfg.eval_mode, cfg.fuzzy_threshold);
    result.dev_jga_per_epoch.push_back(r.jga);
    std::cout << "train epoch " << epoch << " dev jga " << r.jga << " intent "
              << r.intent_accuracy << "\n";
    if (r.jga > best_jga) {
      best_jga = r.jga;
      best_snapshot = snapshot();
      result.best_epoch = epoch;
    }
  }

  restore(best_snapshot);
  const fs::path best_path = dir / "best.params";
  params.save(best_path.string());
  result.best_params_path = best_path.string();
  result.train_report =
      evaluate_corpus(params, model_cfg, corpus, vocab, cfg.eval_mode, cfg.fuzzy_threshold);

  json j;
  j["best_epoch"] = result.best_epoch;
  j["dev_jga_per_epoch"] = result.dev_jga_per_epoch;
  j["mean_loss_per_epoch"] = result.mean_loss_per_epoch;
  j["train_jga"] = result.train_report.jga;
  j["train_intent_accuracy"] = result.train_report.intent_accuracy;
  j["n_train_instances"] = n_train;
  j["unreachable_flagged"] = corpus.unreachable.size();
  write_file(dir / "train_report.json", j.dump(2) + "\n");
  return result;
}

PretrainResult cmd_pretrain_rss(const RunConfig& cfg) {
  const fs::path dir = out_dir(cfg);
  if (cfg.paths.corpus.empty()) throw std::runtime_error("pretrain: paths.corpus is required");
  std::ifstream is(cfg.paths.corpus);
  if (!is) throw std::runtime_error("pretrain: cannot open corpus '" + cfg.paths.corpus + "'");
  std::vector<std::string> docs;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) docs.push_back(line);
  if (docs.empty()) throw std::runtime_error("pretrain: corpus '" + cfg.paths.corpus + "' is empty");

  // Vocabulary must match the one fine-tuning will use, so fold in the DST
  // files when they are configured.
  Vocabulary vocab = [&]() {
    if (!cfg.paths.vocab.empty() && fs::exists(cfg.paths.vocab))
      return Vocabulary::load(cfg.paths.vocab);
    std::vector<std::string> sources = docs;
    if (!cfg.paths.schema.empty() && !cfg.paths.dialogues.empty()) {
      Corpus corpus = load_corpus(cfg.paths.schema, cfg.paths.dialogues);
      std::vector<std::string> extra = corpus_documents(corpus.schemas, corpus.dialogues);
      sources.insert(sources.end(), extra.begin(), extra.end());
    }
    Vocabulary v = Vocabulary::build(sources, 1);
    const fs::path dest =
        cfg.paths.vocab.empty() ? dir / "vocab.json" : fs::path(cfg.paths.vocab);
    v.save(dest.string());
    return v;
  }();

  SplatConfig model_cfg = cfg.model;
  model_cfg.encoder.vocab_size = vocab.size();
  model_cfg.validate();

  std::unordered_set<int> stop_ids;
  for (const char* w : rss_stopwords())
    if (vocab.contains(w)) stop_ids.insert(vocab.id(w));

  std::vector<RssInstance> instances;
  std::string cache;
  for (size_t i = 0; i < docs.size(); ++i) {
    std::vector<int> toks;
    for (const std::string& t : tokenize(docs[i])) toks.push_back(vocab.id(t));
    if (toks.size() < 2 || static_cast<int>(toks.size()) > model_cfg.encoder.max_seq_len) continue;
    auto clusters =
        find_recurring_spans(toks, 1, std::min(10, model_cfg.head.l_ans), &stop_ids);
    Rng rng(Rng::mix(cfg.seed, 9000 + static_cast<uint64_t>(i)));
    RssInstance inst = select_and_mask(clusters, toks, rng);
    if (inst.queries.empty()) continue;
    if (cfg.cache_rss_instances) {
      json j;
      j["tokens"] = inst.tokens;
      json qs = json::array();
      for (const RssQuery& q : inst.queries)
        qs.push_back({{"pos", q.position}, {"start", q.gold_start}, {"end", q.gold_end}});
      j["queries"] = std::move(qs);
      cache += j.dump() + "\n";
    }
    instances.push_back(std::move(inst));
  }
  if (instances.empty())
    throw std::runtime_error("pretrain: corpus produced zero usable instances");
  if (cfg.cache_rss_instances) write_file(dir / "rss_instances.jsonl", cache);

  ParamStore params(cfg.seed);
  init_model_params(params, model_cfg);
  LrSchedule sched{cfg.optim.learning_rate, cfg.optim.warmup_fraction, cfg.pretrain_steps};
  Adam adam;
  PretrainResult result;
  result.n_instances = static_cast<int>(instances.size());

  std::vector<int> order(instances.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng shuffle_rng(Rng::mix(cfg.seed, 777));
  shuffle_rng.shuffle(order);
  Rng dropout_rng(Rng::mix(cfg.seed, 778));
  size_t cursor = 0;
  for (int step = 1; step <= cfg.pretrain_steps; ++step) {
    params.zero_grads();
    double batch_loss = 0.0;
    const int take = cfg.optim.batch_size;
    for (int b = 0; b < take; ++b) {
      if (cursor == order.size()) {
        cursor = 0;
        shuffle_rng.shuffle(order);
      }
      const RssInstance& inst = instances[static_cast<size_t>(order[cursor++])];
      Rng* drop = model_cfg.encoder.dropout_rate > 0.0 ? &dropout_rng : nullptr;
      Tensor encoded =
          encode(inst.tokens, rss_global_mask(inst), model_cfg.encoder, params, drop);
      Tensor loss = rss_loss(encoded, inst, params, model_cfg.head);
      const double l = loss.item();
      if (!std::isfinite(l))
        throw std::runtime_error("pretrain: non-finite loss at step " + std::to_string(step));
      batch_loss += l;
      loss.backward();
    }
    adam.step(params, sched.at(step), static_cast<double>(take));
    result.loss_per_step.push_back(batch_loss / take);
    std::cout << "pretrain step " << step << " loss " << batch_loss / take << "\n";
  }

  const fs::path params_path = dir / "pretrained.params";
  params.save(params_path.string());
  result.params_path = params_path.string();
  std::string curve = "step,loss\n";
  for (size_t i = 0; i < result.loss_per_step.size(); ++i)
    curve += std::to_string(i + 1) + "," + format_double(result.loss_per_step[i]) + "\n";
  write_file(dir / "pretrain_loss.csv", curve);
  return result;
}

EvalReport cmd_eval(const RunConfig& cfg) {
  const fs::path dir = out_dir(cfg);
  if (cfg.paths.params.empty()) throw std::runtime_error("eval: paths.params is required");
  Corpus corpus = load_corpus(cfg.paths.schema, cfg.paths.dialogues);
  Vocabulary vocab = load_or_build_vocab(cfg, corpus);
  SplatConfig model_cfg = cfg.model;
  model_cfg.encoder.vocab_size = vocab.size();
  ParamStore params = ParamStore::load(cfg.paths.params);

  std::string predictions;
  EvalReport report = evaluate_corpus(params, model_cfg, corpus, vocab, cfg.eval_mode,
                                      cfg.fuzzy_threshold, &predictions);
  write_file(dir / "predictions.jsonl", predictions);
  write_file(dir / "eval_report.json", report.to_json());
  std::cout << report.to_table();
  return report;
}

RobustnessResult cmd_robustness(const RunConfig& cfg) {
  const fs::path dir = out_dir(cfg);
  if (cfg.paths.params.empty()) throw std::runtime_error("robustness: paths.params is required");
  if (cfg.variants.empty()) throw std::runtime_error("robustness: no variant schema files given");
  Corpus corpus = load_corpus(cfg.paths.schema, cfg.paths.dialogues);
  Vocabulary vocab = load_or_build_vocab(cfg, corpus);
  SplatConfig model_cfg = cfg.model;
  model_cfg.encoder.vocab_size = vocab.size();
  ParamStore params = ParamStore::load(cfg.paths.params);

  RobustnessResult result;
  result.original_jga = evaluate_corpus(params, model_cfg, corpus, vocab, cfg.eval_mode,
                                        cfg.fuzzy_threshold)
                            .jga;
  double sum_jga = 0.0, sum_delta = 0.0, min_delta = 0.0;
  for (const std::string& variant_path : cfg.variants) {
    Corpus swapped = swap_schema_variant(corpus, load_schemas(variant_path));
    EvalReport r =
        evaluate_corpus(params, model_cfg, swapped, vocab, cfg.eval_mode, cfg.fuzzy_threshold);
    RobustnessRow row;
    row.variant = fs::path(variant_path).stem().string();
    row.jga = r.jga;
    row.delta = r.jga - result.original_jga;
    sum_jga += row.jga;
    sum_delta += row.delta;
    min_delta = std::min(min_delta, row.delta);
    result.rows.push_back(std::move(row));
  }
  result.avg_variant_jga = sum_jga / static_cast<double>(result.rows.size());
  result.avg_delta = sum_delta / static_cast<double>(result.rows.size());
  result.max_delta = min_delta;

  json j;
  j["original_jga"] = result.original_jga;
  j["avg_variant_jga"] = result.avg_variant_jga;
  j["avg_delta"] = result.avg_delta;
  j["max_delta"] = result.max_delta;
  json rows = json::array();
  for (const RobustnessRow& r : result.rows)
    rows.push_back({{"variant", r.variant}, {"jga", r.jga}, {"delta", r.delta}});
  j["variants"] = std::move(rows);
  write_file(dir / "robustness.json", j.dump(2) + "\n");

  std::cout << "robustness: original jga " << result.original_jga << "\n";
  for (const RobustnessRow& r : result.rows)
    std::cout << "  " << r.variant << " jga " << r.jga << " delta " << r.delta << "\n";
  std::cout << "  avg " << result.avg_variant_jga << " avg_delta " << result.avg_delta
            << " max_delta " << result.max_delta << "\n";
  return result;
}

}  // namespace splat
