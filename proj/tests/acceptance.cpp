// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <iostream>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "mmlda/experiments.hpp"
#include "mmlda/inference.hpp"
#include "mmlda/mantel.hpp"
#include "mmlda/sampler.hpp"
#include "mmlda/similarity.hpp"

using namespace mmlda;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double rel_err(double got, double want) {
  if (got == want) return 0.0;
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome sampler_oracle() {
  double worst_lib = 0.0, worst_seq = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    // D=2, M=2, at most 5 tokens per (doc, modality): <= 20 tokens.
    const auto c = fixtures::random_corpus(derive_seed(1, seed), 2, {3, 4}, 5);
    auto st = init_state(c, 2, seed, 1.0, 0.5);
    Rng rng(seed);
    st.hyper.alpha = {0.05 + 2 * uniform01(rng), 0.05 + 2 * uniform01(rng)};
    st.hyper.beta = {0.01 + uniform01(rng), 0.01 + uniform01(rng)};
    for (std::size_t d = 0; d < 2; ++d) {
      for (std::size_t i = 0; i < st.tokens[d].size(); ++i) {
        const auto tok = st.tokens[d][i];
        st.remove_token(d, i);
        const auto p = topic_conditional(st, d, tok.modality, tok.word);
        double lib[2], seq[2];
        for (std::uint32_t t = 0; t < 2; ++t) {
          st.assign_token(d, i, t);
          lib[t] = log_evidence(st);
          seq[t] = oracle::sequential_log_joint(st);
          st.remove_token(d, i);
        }
        st.assign_token(d, i, tok.topic);
        for (std::uint32_t t = 0; t < 2; ++t) {
          // Normalized exp(delta log evidence) over the two completions.
          const double want_lib = 1.0 / (1.0 + std::exp(lib[1 - t] - lib[t]));
          const double want_seq = 1.0 / (1.0 + std::exp(seq[1 - t] - seq[t]));
          worst_lib = std::max(worst_lib, rel_err(p[t], want_lib));
          worst_seq = std::max(worst_seq, rel_err(p[t], want_seq));
          ++checked;
        }
      }
    }
  }
  return {worst_lib <= 1e-10 && worst_seq <= 1e-10,
          std::to_string(checked) + " token-topic checks, max rel err " + fmt(worst_lib) +
              " (log_evidence), " + fmt(worst_seq) + " (sequential oracle); tol 1e-10"};
}

Outcome sparse_equals_dense() {
  double worst = 0.0;
  std::size_t tokens = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    Rng rng(derive_seed(2, s));
    const std::size_t T = 1 + uniform_below(rng, 24);
    const std::size_t docs = 1 + uniform_below(rng, 6);
    const std::vector<std::size_t> vocab{1 + uniform_below(rng, 15), 1 + uniform_below(rng, 6)};
    const auto c = fixtures::random_corpus(derive_seed(3, s), docs, vocab, 12);
    auto st = init_state(c, T, s);
    for (auto& a : st.hyper.alpha) a = std::exp(-5.0 + 7.0 * uniform01(rng));
    for (auto& b : st.hyper.beta) b = std::exp(-6.0 + 6.0 * uniform01(rng));
    SparseSampler sampler(st);
    sampler.sweep();  // move away from the uniform initialization
    sampler.sweep([&](const ModelState& x, std::size_t d, std::size_t i, const BucketMasses& b) {
      const auto& tok = x.tokens[d][i];
      const double beta = x.hyper.beta[tok.modality];
      const double V = static_cast<double>(x.vocab_sizes[tok.modality]);
      double sum = 0.0;
      for (std::size_t t = 0; t < x.num_topics; ++t) {
        const double dense = (x.doc_topic_count(d, t) + x.hyper.alpha[t]) *
                             (x.topic_word_count(tok.modality, t, tok.word) + beta) /
                             (static_cast<double>(x.topic_total[tok.modality][t]) + V * beta);
        sum += dense;
        worst = std::max(worst, rel_err(b.per_topic[t], dense));
      }
      worst = std::max(worst, rel_err(b.total(), sum));
      ++tokens;
    });
    st.check_consistency();
  }
  return {worst <= 1e-12, "1000 states, " + std::to_string(tokens) + " token conditionals, max rel err " +
                              fmt(worst) + "; tol 1e-12"};
}

Outcome hyperparameter_fixed_points() {
  bool ok = true;
  std::ostringstream detail;
  double worst_drop = 0.0;

  const std::vector<std::vector<std::vector<int>>> alpha_tables{
      {{5, 0}, {0, 5}, {4, 1}, {1, 4}, {6, 2}},
      {{8, 0, 1}, {0, 6, 2}, {1, 1, 7}, {3, 3, 0}},
  };
  for (const auto& counts : alpha_tables) {
    auto st = fixtures::state_with_doc_topic_counts(counts);
    const auto target = oracle::grid_maximize(
        [&](const std::vector<double>& a) {
          double s = 0;
          for (const auto& n : counts) s += oracle::log_dirmult(n, a);
          return s;
        },
        counts.front().size());
    double prev = log_evidence(st);
    for (int i = 0; i < 20000; ++i) {
      st.hyper.alpha = update_alpha(st);
      const double ev = log_evidence(st);
      worst_drop = std::max(worst_drop, prev - ev);
      prev = ev;
    }
    double err = 0;
    for (std::size_t t = 0; t < target.size(); ++t) err = std::max(err, rel_err(st.hyper.alpha[t], target[t]));
    ok = ok && err <= 1e-3;
    detail << "alpha rel err " << err << ", ";
  }

  const std::vector<std::vector<std::vector<int>>> beta_tables{
      {{6, 0, 0}, {0, 1, 5}, {2, 2, 0}},
      {{9, 1, 0, 0}, {0, 0, 4, 4}},
  };
  for (const auto& rows : beta_tables) {
    const std::size_t V = rows.front().size();
    Bag bag;
    std::vector<std::uint32_t> topics;
    for (std::uint32_t w = 0; w < V; ++w) {
      std::uint32_t n = 0;
      for (std::uint32_t t = 0; t < rows.size(); ++t) {
        topics.insert(topics.end(), rows[t][w], t);
        n += static_cast<std::uint32_t>(rows[t][w]);
      }
      if (n) bag.push_back({w, n});
    }
    auto st = init_state(fixtures::corpus({V}, {{bag}}), rows.size(), 1, 1.0, 1.0);
    fixtures::set_topics(st, 0, topics);
    const auto target = oracle::grid_maximize(
        [&](const std::vector<double>& b) {
          double s = 0;
          for (const auto& r : rows) s += oracle::log_dirmult(r, std::vector<double>(r.size(), b[0]));
          return s;
        },
        1);
    double prev = log_evidence(st);
    for (int i = 0; i < 5000; ++i) {
      st.hyper.beta[0] = update_beta(st, 0);
      const double ev = log_evidence(st);
      worst_drop = std::max(worst_drop, prev - ev);
      prev = ev;
    }
    const double err = rel_err(st.hyper.beta[0], target[0]);
    ok = ok && err <= 1e-3;
    detail << "beta rel err " << err << ", ";
  }
  ok = ok && worst_drop <= 1e-8;
  detail << "largest evidence decrease " << worst_drop << "; tol 1e-3 / 1e-8";
  return {ok, detail.str()};
}

Outcome predictive_oracle() {
  double worst = 0.0;
  bool exact = true;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    Rng rng(derive_seed(4, s));
    const std::size_t T = 1 + uniform_below(rng, 12);
    const std::size_t M = 1 + uniform_below(rng, 3);
    std::vector<Matrix<double>> phi;
    std::vector<Bag> a(M);
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t V = 1 + uniform_below(rng, 30);
      Matrix<double> p(T, V);
      for (std::size_t t = 0; t < T; ++t) {
        double z = 0;
        for (auto& v : p.row(t)) z += (v = 1e-3 + uniform01(rng));
        for (auto& v : p.row(t)) v /= z;
      }
      phi.push_back(std::move(p));
      for (std::uint32_t w = 0; w < V; ++w) {
        if (uniform01(rng) < 0.4) a[m].push_back({w, 1 + static_cast<std::uint32_t>(uniform_below(rng, 5))});
      }
    }
    if (a[0].empty()) a[0].push_back({0, 1});
    std::vector<double> theta(T);
    double z = 0;
    for (auto& v : theta) z += (v = uniform01(rng) + 1e-3);
    for (auto& v : theta) v /= z;

    const double got = predictive_similarity(a, theta, phi);
    worst = std::max(worst, std::abs(got - oracle::naive_predictive(a, theta, phi)));

    auto doubled = a;
    for (auto& bag : doubled) {
      for (auto& wc : bag) wc.count *= 2;
    }
    exact = exact && predictive_similarity(doubled, theta, phi) == got;

    // Token reordering: expand to single tokens and shuffle within each modality.
    std::vector<Bag> reordered(M);
    for (std::size_t m = 0; m < M; ++m) {
      for (const auto& wc : a[m]) reordered[m].insert(reordered[m].end(), wc.count, WordCount{wc.word, 1});
      shuffle(std::span(reordered[m]), rng);
    }
    exact = exact && predictive_similarity(reordered, theta, phi) == got;
  }
  return {worst <= 1e-12 && exact, "1000 instances, max abs err " + fmt(worst) +
                                       "; tol 1e-12; duplication and reordering " +
                                       (exact ? "bit-identical" : "NOT identical")};
}

// Synthetic corpus used by criteria 5 and 8.
Corpus stability_corpus() {
  SyntheticSpec spec;
  spec.true_topics = 5;
  spec.modalities = {{"a", 100, 50, false}, {"b", 100, 50, false}};
  return make_synthetic_corpus(spec, 20150601);
}

ExperimentPlan stability_plan() {
  ExperimentPlan plan;
  plan.groups = {{"meta", {"a", "b"}}};
  plan.topic_counts = {8};
  plan.seeds = 5;
  plan.folds = 10;
  plan.folds_to_run = 2;
  plan.seed = 5;
  return plan;  // default training schedule: 4000 sweeps, window 50
}

Outcome stability(ExperimentRunner& runner) {
  const auto report = runner.run_stability();
  std::vector<double> rhos;
  for (const auto& r : report.rows) rhos.push_back(r.rho);
  if (rhos.empty()) return {false, "no correlation rows"};
  const auto q = quantiles(rhos);
  return {q.median >= 0.7 && report.failed_cells.empty() && rhos.size() == 20,
          std::to_string(rhos.size()) + " pairs over 2 folds, median rho " + fmt(q.median) + " (min " + fmt(q.min) +
              ", max " + fmt(q.max) + "); threshold 0.7"};
}

Outcome cross_modality() {
  const std::vector<std::size_t> topic_counts{8, 32, 128};
  std::map<std::size_t, int> shared_hits, null_hits;
  std::map<std::size_t, std::vector<double>> shared_rho;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    SyntheticSpec spec;
    spec.modalities = {{"tags", 100, 50, false}, {"lyrics", 100, 50, false}, {"audio", 100, 50, false},
                       {"noise", 100, 50, true}};
    const auto corpus = make_synthetic_corpus(spec, derive_seed(6, static_cast<std::uint64_t>(rep)));
    ExperimentPlan plan;
    plan.groups = {{"meta", {"tags", "lyrics"}}, {"audio", {"audio"}}, {"null", {"noise"}}};
    plan.topic_counts = topic_counts;
    plan.seeds = 1;
    plan.folds = 10;
    plan.folds_to_run = 1;
    plan.permutations = 100;
    plan.train.iterations = 500;
    plan.train.burn_in = 200;
    plan.train.evidence_window = 50;
    plan.seed = derive_seed(7, static_cast<std::uint64_t>(rep));
    ExperimentRunner runner(corpus, plan);
    const auto shared = runner.run_cross_group("meta", "audio");
    const auto null = runner.run_cross_group("meta", "null");
    if (!shared.failed_cells.empty() || !null.failed_cells.empty()) return {false, "failed cells in repetition"};
    for (const auto& r : shared.rows) {
      shared_hits[r.topics] += *r.p_value <= 0.01;
      shared_rho[r.topics].push_back(r.rho);
    }
    for (const auto& r : null.rows) null_hits[r.topics] += *r.p_value <= 0.01;
  }
  bool ok = true;
  std::ostringstream detail;
  for (auto T : topic_counts) {
    ok = ok && shared_hits[T] >= 19 && null_hits[T] <= 1;
    detail << "T=" << T << ": shared " << shared_hits[T] << "/20 (median rho " << quantiles(shared_rho[T]).median
           << "), independent " << null_hits[T] << "/20; ";
  }
  detail << "need >= 19/20 and <= 1/20 at p <= 0.01";
  return {ok, detail.str()};
}

Outcome mantel_statistics() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 300; ++s) {
    Rng rng(derive_seed(8, s));
    const std::size_t H = 3 + uniform_below(rng, 18);
    Matrix<double> a(H, H), b(H, H);
    // Coarse values in half the cases so ties are exercised.
    const bool coarse = s % 2 == 0;
    for (auto& v : a.data()) v = coarse ? static_cast<double>(uniform_below(rng, 5)) : uniform01(rng);
    for (auto& v : b.data()) v = coarse ? static_cast<double>(uniform_below(rng, 5)) : uniform01(rng);
    worst = std::max(worst, std::abs(spearman_offdiag(a, b) - oracle::naive_spearman_offdiag(a, b)));
  }
  int small = 0;
  bool bounds = true;
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    Rng rng(derive_seed(9, rep));
    Matrix<double> a(10, 10), b(10, 10);
    for (auto& v : a.data()) v = uniform01(rng);
    for (auto& v : b.data()) v = uniform01(rng);
    const auto r = mantel_test(a, b, 100, rep);
    bounds = bounds && r.p_value >= 1.0 / 101.0 && r.p_value <= 1.0;
    small += r.p_value <= 0.05;
  }
  const double frac = small / 200.0;
  return {worst <= 1e-12 && frac >= 0.01 && frac <= 0.12 && bounds,
          "300 matrices, max abs diff " + fmt(worst) + " (tol 1e-12); null fraction p<=0.05 = " + fmt(frac) +
              " (band [0.01, 0.12])"};
}

Outcome group_separation(ExperimentRunner& runner) {
  const auto& matrices = runner.cell("meta", 8, 0);
  const auto labels = stability_corpus().labels();
  bool ok = true;
  std::ostringstream detail;
  for (std::size_t s = 0; s < matrices.size(); ++s) {
    const auto g = summarize_group_separation(matrices[s], labels);
    ok = ok && g.within.median > g.between.median;
    if (s == 0) {
      detail << "seed 0: within median " << g.within.median << " vs between " << g.between.median << " ("
             << g.within.count << "/" << g.between.count << " pairs); ";
    }
    detail << (s ? "," : "difference per seed ") << g.median_difference;
  }
  return {ok, detail.str()};
}

Outcome protocol_shape() {
  std::ostringstream detail;
  // 4000-iteration window on a 400-token corpus.
  std::vector<std::vector<Bag>> docs;
  Rng rng(10);
  for (int d = 0; d < 20; ++d) {
    std::vector<std::uint32_t> counts(30, 0);
    for (int i = 0; i < 20; ++i) ++counts[uniform_below(rng, 30)];
    Bag bag;
    for (std::uint32_t w = 0; w < 30; ++w) {
      if (counts[w]) bag.push_back({w, counts[w]});
    }
    docs.push_back({bag});
  }
  TrainConfig cfg;
  cfg.topics = 5;
  cfg.seed = 3;
  const auto model = train(fixtures::corpus({30}, docs), cfg);
  const bool window_ok = model.selected_iteration >= 3950 && model.selected_iteration < 4000;
  detail << "selected iteration " << model.selected_iteration << "; ";

  // cv_split on 30000 ids, labelled in 7 unequal strata.
  std::vector<Vocabulary> vocabs{fixtures::vocab("m", 2)};
  std::vector<Document> many;
  for (int i = 0; i < 30000; ++i) {
    many.push_back({"id" + std::to_string(i), {Bag{{0, 1}}}, "L" + std::to_string(i % 7 == 0 ? 0 : i % 5), false});
  }
  const Corpus big("big", vocabs, std::move(many));
  const auto splits = cv_split(big, 10, 11);
  bool split_ok = splits.size() == 10;
  std::set<std::string> seen;
  for (const auto& f : splits) {
    split_ok = split_ok && f.heldout_ids.size() == 3000 && f.train_ids.size() == 27000;
    seen.insert(f.heldout_ids.begin(), f.heldout_ids.end());
  }
  split_ok = split_ok && seen.size() == 30000;
  detail << "cv_split heldout sizes " << (split_ok ? "all 3000, disjoint" : "WRONG") << "; ";

  // Stability rows per (group, T) cell: 10 folds x C(5,2).
  SyntheticSpec spec;
  spec.num_labels = 4;
  spec.docs_per_label = 15;
  spec.modalities = {{"a", 30, 20, false}, {"b", 30, 20, false}};
  ExperimentPlan plan;
  plan.groups = {{"ab", {"a", "b"}}, {"a", {"a"}}};
  plan.topic_counts = {3, 6};
  plan.seeds = 5;
  plan.folds = 10;
  plan.train.iterations = 20;
  plan.train.burn_in = 5;
  plan.train.evidence_window = 5;
  plan.foldin_sweeps = 10;
  plan.seed = 12;
  ExperimentRunner runner(make_synthetic_corpus(spec, 13), plan);
  const auto report = runner.run_stability();
  std::map<std::pair<std::string, std::size_t>, std::size_t> per_cell;
  for (const auto& r : report.rows) ++per_cell[{r.label, r.topics}];
  bool rows_ok = per_cell.size() == 4 && report.failed_cells.empty();
  for (const auto& [cell, n] : per_cell) rows_ok = rows_ok && n == 100;
  detail << "stability rows per cell ";
  for (const auto& [cell, n] : per_cell) detail << n << " ";
  detail << "(expected 100), total " << report.rows.size();
  return {window_ok && split_ok && rows_ok, detail.str()};
}

struct Criterion {
  int number;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  std::unique_ptr<ExperimentRunner> stability_runner;
  const auto runner = [&]() -> ExperimentRunner& {
    if (!stability_runner) stability_runner = std::make_unique<ExperimentRunner>(stability_corpus(), stability_plan());
    return *stability_runner;
  };

  // Criterion 8 reuses the fold-0 matrices trained for criterion 5, so its
  // clock covers only the summary.
  const std::vector<Criterion> criteria{
      {1, "sampler conditional equals evidence ratios", 1.0, sampler_oracle},
      {2, "sparse buckets equal dense conditional", 10.0, sparse_equals_dense},
      {3, "hyperparameter fixed points", 10.0, hyperparameter_fixed_points},
      {4, "predictive similarity oracle and invariances", 5.0, predictive_oracle},
      {5, "stability of same-model similarities", 300.0, [&] { return stability(runner()); }},
      {6, "cross-modality Mantel significance", 600.0, cross_modality},
      {7, "Mantel statistics", 30.0, mantel_statistics},
      {8, "within-label above between-label similarity", 60.0, [&] { return group_separation(runner()); }},
      {9, "protocol shape", 60.0, protocol_shape},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = out.pass && in_time;
    failed += !pass;
    std::printf("[%s] criterion %d: %s: %s; %.2f s (budget %.0f s%s)\n", pass ? "PASS" : "FAIL", c.number,
                c.name.c_str(), out.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", EXCEEDED");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
