#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "forumcp/clusters.hpp"
#include "forumcp/ingest.hpp"

namespace forumcp {

struct LdaOptions {
  int topics = 2;
  double alpha = 0.0;  ///< <= 0 selects 50 / topics
  double beta = 0.01;
  int sweeps = 500;
  std::uint64_t seed = 0;
};

/// Topic model over short documents, fitted by collapsed Gibbs sampling.
struct TopicModel {
  int topic_count = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<std::string> vocabulary;  ///< sorted
  /// Thread index (into the PostTable) of each document, when fitted on titles.
  std::vector<int> threads;
  Eigen::MatrixXd topic_word;  ///< topics x vocabulary, rows sum to 1
  /// documents x topics, rows sum to 1: each document's topic proportions
  /// given `topic_word`, so identical documents get identical rows.
  Eigen::MatrixXd doc_topic;
  Eigen::MatrixXi doc_counts;  ///< documents x topics, tokens assigned in the final sweep

  /// Up to `n` words of a topic, weight descending, ties alphabetical.
  std::vector<std::string> top_words(int topic, int n = 10) const;
};

/// Documents are lists of terms; empty documents are allowed and get the
/// prior as their topic distribution.
TopicModel fit_lda(const std::vector<std::vector<std::string>>& docs, const LdaOptions& opts);

/// Per-topic document prior of title models.
inline constexpr double kTitleAlpha = 0.1;

/// max(2, round(sqrt(thread_count))).
int title_topic_count(std::size_t thread_count);

/// LDA over the titles of the cluster threads (keyword terms of each title).
/// Threads whose title has no terms are left out. Throws
/// Error("storyline_unavailable") with fewer than two usable titles.
TopicModel fit_titles_lda(const Cluster& c, const PostTable& table, std::uint64_t seed, int sweeps = 500);

}  // namespace forumcp
