// Command-line front end: vector quantization, corpus handling, training,
// fold-in, similarity, Mantel tests and the cross-validated experiments.
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmlda/audio_words.hpp"
#include "mmlda/corpus.hpp"
#include "mmlda/experiments.hpp"
#include "mmlda/inference.hpp"
#include "mmlda/mantel.hpp"
#include "mmlda/sampler.hpp"
#include "mmlda/similarity.hpp"
#include "mmlda/text_io.hpp"

namespace fs = std::filesystem;
using namespace mmlda;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : text::split(s, ',')) {
    const auto t = text::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

// "name=m1,m2"
ModalityGroup parse_group(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("group must look like name=mod1,mod2: '" + spec + "'");
  ModalityGroup g{spec.substr(0, eq), split_list(spec.substr(eq + 1))};
  if (g.modalities.empty()) throw ValidationError("group '" + g.name + "' lists no modalities");
  return g;
}

Corpus load_view(const fs::path& dir, const std::string& modalities) {
  Corpus c = load_corpus(dir);
  if (modalities.empty()) return c;
  const auto names = split_list(modalities);
  return c.select_modalities(names);
}

// Held-out / training selection shared by train, foldin and similarity.
struct FoldArgs {
  std::optional<std::size_t> fold;
  std::size_t folds = 10;
  std::uint64_t split_seed = 0;

  void add(CLI::App* app) {
    app->add_option("--fold", fold, "Cross-validation fold index (omit to use every document)");
    app->add_option("--folds", folds, "Number of cross-validation folds")->capture_default_str();
    app->add_option("--split-seed", split_seed, "Seed of the fold assignment")->capture_default_str();
  }
  std::optional<FoldSplit> split(const Corpus& c) const {
    if (!fold) return std::nullopt;
    const auto splits = cv_split(c, folds, split_seed);
    if (*fold >= splits.size()) throw ValidationError("fold index out of range");
    return splits[*fold];
  }
};

struct TrainArgs {
  std::optional<fs::path> config;
  std::optional<std::size_t> topics, iterations, evidence_window, burn_in, hyper_update_every;
  std::optional<double> alpha_init, beta_init;

  void add(CLI::App* app) {
    app->add_option("--config", config, "key=value training config file")->check(CLI::ExistingFile);
    app->add_option("--topics", topics, "Number of topics");
    app->add_option("--iterations", iterations, "Gibbs sweeps (default 4000)");
    app->add_option("--evidence-window", evidence_window, "Final sweeps searched for the best evidence (default 50)");
    app->add_option("--burn-in", burn_in, "Sweeps before hyperparameter updates (default 200)");
    app->add_option("--hyper-update-every", hyper_update_every, "Sweeps between hyperparameter updates (0 = fixed)");
    app->add_option("--alpha-init", alpha_init, "Initial total alpha mass (default 1.0)");
    app->add_option("--beta-init", beta_init, "Initial beta (default 0.01)");
  }
  TrainConfig build(std::uint64_t seed) const {
    TrainConfig cfg = config ? load_train_config(*config) : TrainConfig{};
    if (topics) cfg.topics = *topics;
    if (iterations) cfg.iterations = *iterations;
    if (evidence_window) cfg.evidence_window = *evidence_window;
    if (burn_in) cfg.burn_in = *burn_in;
    if (hyper_update_every) cfg.hyper_update_every = *hyper_update_every;
    if (alpha_init) cfg.alpha_init = *alpha_init;
    if (beta_init) cfg.beta_init = *beta_init;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

FoldInMode parse_mode(const std::string& s) {
  if (s == "frozen-phi" || s == "frozen_phi") return FoldInMode::frozen_phi;
  if (s == "frozen-counts" || s == "frozen_counts") return FoldInMode::frozen_counts;
  throw ValidationError("unknown fold-in mode '" + s + "' (frozen-phi | frozen-counts)");
}

// Held-out documents restricted to the model's modalities, empty ones augmented.
Corpus heldout_view(const Corpus& corpus, const TrainedModel& model, const std::vector<std::string>& ids) {
  const auto view = corpus.select_modalities(model.modality_names).subset(ids);
  return augment_empty_documents(view, model.modality_names);
}

void print_report(const CorrelationReport& report) {
  for (const auto& s : report.summaries) {
    std::cout << s.label << " T=" << s.topics << ": n=" << s.rho.count << " median rho=" << s.rho.median
              << " [" << s.rho.q1 << ", " << s.rho.q3 << "]";
    if (s.max_p_value) std::cout << " max p=" << *s.max_p_value;
    std::cout << "\n";
  }
  for (const auto& f : report.failed_cells) std::cout << "failed: " << f << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal LDA: training, fold-in, predictive similarity and Mantel tests"};
  app.require_subcommand(1);

  // vq -------------------------------------------------------------------
  auto* vq = app.add_subcommand("vq", "Audio-word codebooks");
  vq->require_subcommand(1);

  struct {
    fs::path features, out;
    std::size_t k = 0, max_iters = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;
  } vq_fit;
  auto* fit = vq->add_subcommand("fit", "Fit a k-means codebook on all frames of a feature CSV");
  fit->add_option("--features", vq_fit.features, "CSV of track_id,v1..vd frames")->required()->check(CLI::ExistingFile);
  fit->add_option("--k", vq_fit.k, "Codebook size")->required();
  fit->add_option("--max-iters", vq_fit.max_iters, "Lloyd iterations")->capture_default_str();
  fit->add_option("--tol", vq_fit.tol, "Relative distortion tolerance")->capture_default_str();
  fit->add_option("--seed", vq_fit.seed, "Seed for k-means++")->capture_default_str();
  fit->add_option("--out", vq_fit.out, "Codebook file")->required();
  fit->callback([&] {
    const auto features = load_track_features(vq_fit.features);
    CodebookFitTrace trace;
    const auto book = fit_codebook(stack_frames(features), {vq_fit.k, vq_fit.seed, vq_fit.max_iters, vq_fit.tol}, &trace);
    save_codebook(book, vq_fit.out);
    std::cout << "codebook K=" << book.size() << " d=" << book.dim() << " distortion=" << book.distortion
              << " iterations=" << trace.iterations << "\n";
  });

  struct {
    std::vector<fs::path> features, codebooks;
    std::string name = "audio";
    std::uint64_t seed = 0;
    fs::path out;
  } vq_apply;
  auto* apply = vq->add_subcommand("apply", "Quantize tracks into an audio-word modality");
  apply->add_option("--features", vq_apply.features, "Feature CSV, one per family")->required()->check(CLI::ExistingFile);
  apply->add_option("--codebook", vq_apply.codebooks, "Codebook, one per family (same order)")
      ->required()
      ->check(CLI::ExistingFile);
  apply->add_option("--name", vq_apply.name, "Modality name")->capture_default_str();
  apply->add_option("--seed", vq_apply.seed, "Unused; accepted for uniformity");
  apply->add_option("--out", vq_apply.out, "Output directory (<name>.counts, <name>.vocab, <name>.docs)")->required();
  apply->callback([&] {
    if (vq_apply.features.size() != vq_apply.codebooks.size()) {
      throw ValidationError("need one --codebook per --features file");
    }
    std::vector<Codebook> books;
    std::vector<TrackFeatures> families;
    for (std::size_t f = 0; f < vq_apply.features.size(); ++f) {
      books.push_back(load_codebook(vq_apply.codebooks[f]));
      families.push_back(load_track_features(vq_apply.features[f]));
    }
    const CodebookSet set(std::move(books));
    // Tracks are taken in the first family's order and must appear in every family.
    ModalityData data;
    data.vocabulary.modality_name = vq_apply.name;
    for (std::size_t w = 0; w < set.vocabulary_size(); ++w) data.vocabulary.tokens.push_back("aw" + std::to_string(w));
    for (std::size_t i = 0; i < families[0].track_ids.size(); ++i) {
      const auto& id = families[0].track_ids[i];
      std::vector<Matrix<double>> frames;
      for (const auto& fam : families) {
        const auto it = std::find(fam.track_ids.begin(), fam.track_ids.end(), id);
        if (it == fam.track_ids.end()) throw ValidationError("track '" + id + "' missing from a feature family");
        frames.push_back(fam.frames[static_cast<std::size_t>(it - fam.track_ids.begin())]);
      }
      data.bags.push_back(set.quantize(frames));
      data.doc_ids.push_back(id);
    }
    save_modality(data, vq_apply.out / (vq_apply.name + ".counts"), vq_apply.out / (vq_apply.name + ".vocab"));
    std::string ids;
    for (const auto& id : data.doc_ids) ids += id + "\n";
    text::write_text(vq_apply.out / (vq_apply.name + ".docs"), ids);
    std::cout << data.bags.size() << " tracks, vocabulary " << set.vocabulary_size() << "\n";
  });

  // corpus ---------------------------------------------------------------
  auto* corpus_cmd = app.add_subcommand("corpus", "Corpus handling");
  corpus_cmd->require_subcommand(1);

  struct {
    fs::path corpus;
    std::uint64_t seed = 0;
    std::optional<fs::path> out;
  } validate_args;
  auto* validate = corpus_cmd->add_subcommand("validate", "Load a corpus directory and report its shape");
  validate->add_option("--corpus", validate_args.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  validate->add_option("--seed", validate_args.seed, "Unused; accepted for uniformity");
  validate->add_option("--out", validate_args.out, "Write the summary as JSON");
  validate->callback([&] {
    const auto c = load_corpus(validate_args.corpus);
    nlohmann::json j{{"name", c.name()},
                     {"documents", c.size()},
                     {"total_tokens", c.total_tokens()},
                     {"empty_documents", c.empty_documents().size()},
                     {"labelled", c.has_labels()}};
    for (std::size_t m = 0; m < c.num_modalities(); ++m) {
      std::uint64_t tokens = 0;
      for (const auto& d : c.documents()) tokens += d.tokens_in(m);
      j["modalities"].push_back(
          {{"name", c.vocabularies()[m].modality_name}, {"vocabulary", c.vocabularies()[m].size()}, {"tokens", tokens}});
    }
    std::cout << j.dump(2) << "\n";
    if (validate_args.out) text::write_text(*validate_args.out, j.dump(2) + "\n");
  });

  struct {
    std::vector<std::string> modalities;
    std::optional<fs::path> docs, labels;
    std::string name = "corpus";
    std::uint64_t seed = 0;
    fs::path out;
  } assemble_args;
  auto* assemble = corpus_cmd->add_subcommand("assemble", "Fuse per-modality count files into a corpus directory");
  assemble->add_option("--modality", assemble_args.modalities, "name=counts_path,vocab_path[,docs_path]")->required();
  assemble->add_option("--docs", assemble_args.docs, "Document ids, one per line")->check(CLI::ExistingFile);
  assemble->add_option("--labels", assemble_args.labels, "doc_id<TAB>label file")->check(CLI::ExistingFile);
  assemble->add_option("--name", assemble_args.name, "Corpus name")->capture_default_str();
  assemble->add_option("--seed", assemble_args.seed, "Unused; accepted for uniformity");
  assemble->add_option("--out", assemble_args.out, "Corpus directory")->required();
  assemble->callback([&] {
    std::vector<ModalityData> mods;
    for (const auto& spec : assemble_args.modalities) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) throw ValidationError("--modality must look like name=counts,vocab[,docs]");
      const auto paths = split_list(spec.substr(eq + 1));
      if (paths.size() < 2 || paths.size() > 3) throw ValidationError("--modality needs counts and vocab paths");
      auto data = load_modality(paths[0], paths[1], spec.substr(0, eq));
      if (paths.size() == 3) {
        data.doc_ids = text::read_lines(paths[2]);
        while (!data.doc_ids.empty() && data.doc_ids.back().empty()) data.doc_ids.pop_back();
      }
      mods.push_back(std::move(data));
    }
    std::vector<std::string> ids;
    if (assemble_args.docs) {
      ids = text::read_lines(*assemble_args.docs);
      while (!ids.empty() && ids.back().empty()) ids.pop_back();
    }
    const auto labels = assemble_args.labels ? load_labels(*assemble_args.labels) : std::map<std::string, std::string>{};
    const auto c = assemble_corpus(std::move(mods), ids, labels, assemble_args.name);
    save_corpus(c, assemble_args.out);
    std::cout << c.size() << " documents, " << c.num_modalities() << " modalities\n";
  });

  struct {
    std::size_t labels = 15, docs_per_label = 20, true_topics = 5, vocab = 100, tokens = 50;
    std::string modalities = "tags,lyrics,audio";
    std::string independent;
    std::uint64_t seed = 0;
    fs::path out;
  } synth_args;
  auto* synth = corpus_cmd->add_subcommand("synth", "Write a synthetic labelled corpus");
  synth->add_option("--labels", synth_args.labels, "Number of labels")->capture_default_str();
  synth->add_option("--docs-per-label", synth_args.docs_per_label, "Documents per label")->capture_default_str();
  synth->add_option("--true-topics", synth_args.true_topics, "Generating topics")->capture_default_str();
  synth->add_option("--vocab", synth_args.vocab, "Vocabulary size per modality")->capture_default_str();
  synth->add_option("--tokens", synth_args.tokens, "Tokens per document and modality")->capture_default_str();
  synth->add_option("--modalities", synth_args.modalities, "Comma-separated modality names")->capture_default_str();
  synth->add_option("--independent", synth_args.independent, "Modalities drawn from independent proportions");
  synth->add_option("--seed", synth_args.seed, "Generator seed")->capture_default_str();
  synth->add_option("--out", synth_args.out, "Corpus directory")->required();
  synth->callback([&] {
    SyntheticSpec spec;
    spec.num_labels = synth_args.labels;
    spec.docs_per_label = synth_args.docs_per_label;
    spec.true_topics = synth_args.true_topics;
    const auto independent = split_list(synth_args.independent);
    for (const auto& n : split_list(synth_args.modalities)) {
      const bool ind = std::find(independent.begin(), independent.end(), n) != independent.end();
      spec.modalities.push_back({n, synth_args.vocab, synth_args.tokens, ind});
    }
    const auto c = make_synthetic_corpus(spec, synth_args.seed);
    save_corpus(c, synth_args.out);
    std::cout << c.size() << " documents written to " << synth_args.out.string() << "\n";
  });

  // train ----------------------------------------------------------------
  struct {
    fs::path corpus, out;
    std::string modalities;
    std::uint64_t seed = 0;
    FoldArgs fold;
    TrainArgs train;
  } train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model by collapsed Gibbs sampling");
  train_cmd->add_option("--corpus", train_args.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--modalities", train_args.modalities, "Comma-separated modalities (default: all)");
  train_cmd->add_option("--seed", train_args.seed, "Chain seed")->capture_default_str();
  train_cmd->add_option("--out", train_args.out, "Model directory")->required();
  train_args.fold.add(train_cmd);
  train_args.train.add(train_cmd);
  train_cmd->callback([&] {
    auto c = load_view(train_args.corpus, train_args.modalities);
    if (const auto split = train_args.fold.split(c)) c = c.subset(split->train_ids);
    const auto cfg = train_args.train.build(train_args.seed);
    const auto model = train(c, cfg);
    save_model(model, train_args.out);
    std::cout << "trained T=" << cfg.topics << " on " << c.size() << " documents; selected iteration "
              << model.selected_iteration << ", evidence " << model.evidence << "\n";
  });

  // foldin ---------------------------------------------------------------
  struct {
    fs::path model, corpus, out;
    std::size_t sweeps = 200;
    std::string mode = "frozen-phi";
    std::uint64_t seed = 0;
    FoldArgs fold;
  } foldin_args;
  auto* foldin_cmd = app.add_subcommand("foldin", "Estimate topic proportions of held-out documents");
  foldin_cmd->add_option("--model", foldin_args.model, "Model directory")->required()->check(CLI::ExistingDirectory);
  foldin_cmd->add_option("--corpus", foldin_args.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  foldin_cmd->add_option("--sweeps", foldin_args.sweeps, "Gibbs sweeps per document")->capture_default_str();
  foldin_cmd->add_option("--mode", foldin_args.mode, "frozen-phi | frozen-counts")->capture_default_str();
  foldin_cmd->add_option("--seed", foldin_args.seed, "Fold-in seed")->capture_default_str();
  foldin_cmd->add_option("--out", foldin_args.out, "theta_heldout.csv path")->required();
  foldin_args.fold.add(foldin_cmd);
  foldin_cmd->callback([&] {
    const auto model = load_model(foldin_args.model);
    const auto c = load_corpus(foldin_args.corpus);
    const auto split = foldin_args.fold.split(c);
    const auto heldout = heldout_view(c, model, split ? split->heldout_ids : c.doc_ids());
    const auto result = fold_in(model, heldout, {foldin_args.sweeps, foldin_args.seed, parse_mode(foldin_args.mode)});
    save_fold_in(result, foldin_args.out);
    std::cout << "folded in " << result.doc_ids.size() << " documents\n";
  });

  // similarity -----------------------------------------------------------
  struct {
    fs::path model, corpus, thetas, out;
    std::string measure = "predictive";
    std::string fold_label;
    std::uint64_t seed = 0;
  } sim_args;
  auto* sim_cmd = app.add_subcommand("similarity", "Similarity matrix over folded-in documents");
  sim_cmd->add_option("--model", sim_args.model, "Model directory")->required()->check(CLI::ExistingDirectory);
  sim_cmd->add_option("--corpus", sim_args.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  sim_cmd->add_option("--thetas", sim_args.thetas, "theta_heldout.csv from foldin")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--measure", sim_args.measure, "predictive | kl | cosine | inner")->capture_default_str();
  sim_cmd->add_option("--fold-label", sim_args.fold_label, "Fold recorded in the sidecar");
  sim_cmd->add_option("--seed", sim_args.seed, "Unused; accepted for uniformity");
  sim_cmd->add_option("--out", sim_args.out, "similarity.csv path")->required();
  sim_cmd->callback([&] {
    const auto model = load_model(sim_args.model);
    const auto thetas = load_fold_in(sim_args.thetas);
    const auto heldout = heldout_view(load_corpus(sim_args.corpus), model, thetas.doc_ids);
    const auto s = similarity_matrix(heldout, thetas, model, parse_measure(sim_args.measure));
    save_similarity(s, sim_args.out, sim_args.fold_label);
    std::cout << s.size() << "x" << s.size() << " " << to_string(s.measure) << " matrix\n";
  });

  // mantel ---------------------------------------------------------------
  struct {
    fs::path a, b, out;
    std::size_t permutations = 100;
    std::string tail = "upper";
    std::uint64_t seed = 0;
  } mantel_args;
  auto* mantel_cmd = app.add_subcommand("mantel", "Mantel test between two similarity matrices");
  mantel_cmd->add_option("--a", mantel_args.a, "First similarity.csv")->required()->check(CLI::ExistingFile);
  mantel_cmd->add_option("--b", mantel_args.b, "Second similarity.csv")->required()->check(CLI::ExistingFile);
  mantel_cmd->add_option("--permutations", mantel_args.permutations, "Permutations")->capture_default_str();
  mantel_cmd->add_option("--tail", mantel_args.tail, "upper | two-sided")->capture_default_str();
  mantel_cmd->add_option("--seed", mantel_args.seed, "Permutation seed")->capture_default_str();
  mantel_cmd->add_option("--out", mantel_args.out, "Result JSON path")->required();
  mantel_cmd->callback([&] {
    const auto a = load_similarity(mantel_args.a);
    const auto b = load_similarity(mantel_args.b);
    if (a.doc_ids != b.doc_ids) throw ValidationError("similarity matrices cover different documents");
    const auto r = mantel_test(a.values, b.values, mantel_args.permutations, mantel_args.seed,
                               parse_tail(mantel_args.tail));
    save_mantel_json(r, mantel_args.out);
    std::cout << "rho=" << r.rho_observed << " p=" << r.p_value << " (" << r.permutations << " permutations)\n";
  });

  // experiment -----------------------------------------------------------
  auto* exp_cmd = app.add_subcommand("experiment", "Cross-validated stability and cross-group protocol");
  exp_cmd->require_subcommand(1);
  struct {
    fs::path corpus, out;
    std::vector<std::string> groups;
    std::vector<std::size_t> topics{8, 32, 128};
    std::size_t seeds = 5, folds = 10, folds_to_run = 0, permutations = 100, foldin_sweeps = 200;
    std::uint64_t seed = 0;
    bool verbose = false;
    TrainArgs train;
    std::string a, b;
  } exp_args;
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--corpus", exp_args.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--group", exp_args.groups, "Modality group as name=mod1,mod2 (repeatable)")->required();
    cmd->add_option("--topic-counts", exp_args.topics, "Topic counts to sweep")->delimiter(',')->capture_default_str();
    cmd->add_option("--seeds", exp_args.seeds, "Models per (group, T, fold)")->capture_default_str();
    cmd->add_option("--folds", exp_args.folds, "Cross-validation folds")->capture_default_str();
    cmd->add_option("--folds-to-run", exp_args.folds_to_run, "Run only the first N folds (0 = all)")
        ->capture_default_str();
    cmd->add_option("--permutations", exp_args.permutations, "Mantel permutations")->capture_default_str();
    cmd->add_option("--foldin-sweeps", exp_args.foldin_sweeps, "Fold-in sweeps")->capture_default_str();
    cmd->add_option("--seed", exp_args.seed, "Experiment seed")->capture_default_str();
    cmd->add_option("--out", exp_args.out, "Output directory")->required();
    cmd->add_flag("--verbose", exp_args.verbose, "Log each trained model");
    exp_args.train.add(cmd);
  };
  const auto make_runner = [&] {
    ExperimentPlan plan;
    for (const auto& g : exp_args.groups) plan.groups.push_back(parse_group(g));
    plan.topic_counts = exp_args.topics;
    plan.seeds = exp_args.seeds;
    plan.folds = exp_args.folds;
    plan.folds_to_run = exp_args.folds_to_run;
    plan.permutations = exp_args.permutations;
    plan.foldin_sweeps = exp_args.foldin_sweeps;
    plan.seed = exp_args.seed;
    plan.output_dir = exp_args.out;
    plan.verbose = exp_args.verbose;
    // Topics and seed are set per model; give validation a placeholder.
    auto train_args = exp_args.train;
    if (!train_args.topics) train_args.topics = exp_args.topics.empty() ? 1 : exp_args.topics.front();
    plan.train = train_args.build(0);
    return ExperimentRunner(load_corpus(exp_args.corpus), std::move(plan));
  };

  auto* stability_cmd = exp_cmd->add_subcommand("stability", "Correlations between seeds of the same model");
  add_common(stability_cmd);
  stability_cmd->callback([&] { print_report(make_runner().run_stability()); });

  auto* cross_cmd = exp_cmd->add_subcommand("cross", "Correlations and Mantel tests between two groups");
  add_common(cross_cmd);
  cross_cmd->add_option("--a", exp_args.a, "First group name")->required();
  cross_cmd->add_option("--b", exp_args.b, "Second group name")->required();
  cross_cmd->callback([&] { print_report(make_runner().run_cross_group(exp_args.a, exp_args.b)); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
