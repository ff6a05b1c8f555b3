#include "forumcp/lda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "forumcp/error.hpp"
#include "forumcp/tensor.hpp"
#include "forumcp/text.hpp"

namespace forumcp {

std::vector<std::string> TopicModel::top_words(int topic, int n) const {
  std::vector<int> order(vocabulary.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return topic_word(topic, a) > topic_word(topic, b); });
  std::vector<std::string> out;
  for (int w : order) {
    if (static_cast<int>(out.size()) == n) break;
    out.push_back(vocabulary[static_cast<std::size_t>(w)]);
  }
  return out;
}

TopicModel fit_lda(const std::vector<std::vector<std::string>>& docs, const LdaOptions& opts) {
  if (opts.topics < 1) throw ValidationError("topic count must be >= 1");
  if (!(opts.beta > 0.0)) throw ValidationError("beta must be > 0");
  if (opts.sweeps < 1) throw ValidationError("sweeps must be >= 1");
  TopicModel tm;
  tm.topic_count = opts.topics;
  tm.alpha = opts.alpha > 0.0 ? opts.alpha : 50.0 / opts.topics;
  tm.beta = opts.beta;
  for (const auto& d : docs) tm.vocabulary.insert(tm.vocabulary.end(), d.begin(), d.end());
  std::sort(tm.vocabulary.begin(), tm.vocabulary.end());
  tm.vocabulary.erase(std::unique(tm.vocabulary.begin(), tm.vocabulary.end()), tm.vocabulary.end());

  const int K = opts.topics;
  const int V = static_cast<int>(tm.vocabulary.size());
  const int D = static_cast<int>(docs.size());
  std::vector<std::vector<int>> words(docs.size());
  for (int d = 0; d < D; ++d) {
    for (const auto& w : docs[static_cast<std::size_t>(d)]) {
      words[static_cast<std::size_t>(d)].push_back(
          static_cast<int>(std::lower_bound(tm.vocabulary.begin(), tm.vocabulary.end(), w) - tm.vocabulary.begin()));
    }
  }

  std::mt19937_64 gen(opts.seed);
  Eigen::MatrixXi ndk = Eigen::MatrixXi::Zero(D, K);
  Eigen::MatrixXi nkw = Eigen::MatrixXi::Zero(K, std::max(V, 1));
  Eigen::VectorXi nk = Eigen::VectorXi::Zero(K);
  std::vector<std::vector<int>> z(words.size());
  for (int d = 0; d < D; ++d) {
    for (int w : words[static_cast<std::size_t>(d)]) {
      const int k = std::min(K - 1, static_cast<int>(uniform01(gen) * K));
      z[static_cast<std::size_t>(d)].push_back(k);
      ++ndk(d, k);
      ++nkw(k, w);
      ++nk(k);
    }
  }
  const double vbeta = V * tm.beta;
  std::vector<double> p(static_cast<std::size_t>(K));
  for (int sweep = 0; sweep < opts.sweeps; ++sweep) {
    for (int d = 0; d < D; ++d) {
      auto& zd = z[static_cast<std::size_t>(d)];
      const auto& wd = words[static_cast<std::size_t>(d)];
      for (std::size_t n = 0; n < wd.size(); ++n) {
        const int w = wd[n];
        int k = zd[n];
        --ndk(d, k);
        --nkw(k, w);
        --nk(k);
        double total = 0.0;
        for (int t = 0; t < K; ++t) {
          total += (ndk(d, t) + tm.alpha) * (nkw(t, w) + tm.beta) / (nk(t) + vbeta);
          p[static_cast<std::size_t>(t)] = total;
        }
        const double u = uniform01(gen) * total;
        k = static_cast<int>(std::upper_bound(p.begin(), p.end(), u) - p.begin());
        k = std::min(k, K - 1);
        zd[n] = k;
        ++ndk(d, k);
        ++nkw(k, w);
        ++nk(k);
      }
    }
  }

  tm.doc_counts = ndk;
  tm.topic_word.resize(K, V);
  for (int t = 0; t < K; ++t)
    for (int w = 0; w < V; ++w) tm.topic_word(t, w) = (nkw(t, w) + tm.beta) / (nk(t) + vbeta);
  // Topic proportions of each document given the final topic-word counts,
  // by fixed-point iteration from the uniform mixture.
  constexpr int kFoldInIterations = 100;
  tm.doc_topic.resize(D, K);
  Eigen::VectorXd theta(K), expected(K), r(K);
  for (int d = 0; d < D; ++d) {
    const auto& wd = words[static_cast<std::size_t>(d)];
    const double len = static_cast<double>(wd.size());
    theta.setConstant(1.0 / K);
    for (int it = 0; it < kFoldInIterations && !wd.empty(); ++it) {
      expected.setZero();
      for (int w : wd) {
        r = theta.cwiseProduct(tm.topic_word.col(w));
        expected += r / r.sum();
      }
      theta = (expected.array() + tm.alpha) / (len + K * tm.alpha);
    }
    tm.doc_topic.row(d) = theta.transpose();
  }
  return tm;
}

int title_topic_count(std::size_t thread_count) {
  return std::max(2, static_cast<int>(std::lround(std::sqrt(static_cast<double>(thread_count)))));
}

TopicModel fit_titles_lda(const Cluster& c, const PostTable& table, std::uint64_t seed, int sweeps) {
  std::vector<std::vector<std::string>> docs;
  std::vector<int> threads;
  for (const auto& t : c.threads) {
    auto terms = text::terms(table.thread_title(t.index));
    if (terms.empty()) continue;
    docs.push_back(std::move(terms));
    threads.push_back(t.index);
  }
  if (docs.size() < 2) {
    throw Error("storyline_unavailable", "storyline unavailable: cluster " + std::to_string(c.cluster_id) + " has " +
                                             std::to_string(docs.size()) + " usable thread title(s), at least 2 needed");
  }
  LdaOptions opts;
  opts.topics = title_topic_count(c.threads.size());
  opts.alpha = kTitleAlpha;
  opts.sweeps = sweeps;
  opts.seed = seed;
  TopicModel tm = fit_lda(docs, opts);
  tm.threads = std::move(threads);
  return tm;
}

}  // namespace forumcp
