#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "forumcp/date.hpp"
#include "forumcp/tensor.hpp"

namespace forumcp {

enum class InputFormat { csv, jsonl };

InputFormat parse_input_format(std::string_view name);

/// One forum post. `title` is optional: when absent the thread title falls
/// back to the first line of the thread's first post.
struct PostRecord {
  std::string forum_id;
  std::string thread_id;
  std::string post_id;
  std::string username;
  Date date{};
  std::string content;
  std::string title;
};

/// Dense, bidirectional name <-> [0, n) map. Names are numbered in byte-wise
/// lexicographic order, independent of row order.
class EntityIndex {
 public:
  EntityIndex() = default;
  explicit EntityIndex(std::vector<std::string> names);

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::optional<int> find(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
};

/// Parsed posts plus the entity indices the tensor is built on.
struct PostTable {
  std::vector<PostRecord> records;
  EntityIndex users;
  EntityIndex threads;
  std::vector<int> record_user;    // per record
  std::vector<int> record_thread;  // per record
  /// Per thread: record index of its first post (earliest date, ties by
  /// post_id).
  std::vector<std::size_t> first_post;
  Date min_date{};
  Date max_date{};

  int user_count() const { return users.size(); }
  int thread_count() const { return threads.size(); }
  bool empty() const { return records.empty(); }

  std::string thread_title(int thread) const;
  const PostRecord& first_post_of(int thread) const { return records[first_post.at(static_cast<std::size_t>(thread))]; }

  /// Validates the records (unique post ids per forum, dates in range) and
  /// builds every index. Usernames are NFC-normalized.
  static PostTable from_records(std::vector<PostRecord> records, Date latest_allowed = today());
};

/// Parses CSV (header `forum_id,thread_id,post_id,username,date,content`,
/// optionally followed by `,title`; RFC 4180 quoting) or JSON Lines with the
/// same field names. Row numbers in errors count data rows from 1.
PostTable parse_posts(std::istream& in, InputFormat format, Date latest_allowed = today());

/// Writes records in input order; parse_posts on the output rebuilds the
/// same table.
void write_posts(std::ostream& out, const std::vector<PostRecord>& records, InputFormat format);

enum class Granularity { day, week, month };

Granularity parse_granularity(std::string_view name);
const char* granularity_name(Granularity g);

/// Maps calendar dates to time slots counted from `origin`.
struct TimeIndex {
  Granularity granularity = Granularity::week;
  Date origin{};
  int slot_count = 0;

  int slot(Date d) const;
  /// First day of a slot.
  Date slot_start(int slot) const;
  /// One past the last day of a slot.
  Date slot_end(int slot) const;
};

TimeIndex discretize(const PostTable& table, Granularity granularity);

/// X(i,j,k) = number of posts by user i in thread j during slot k.
SparseTensor3<double> build_tensor(const PostTable& table, const TimeIndex& time);

struct ForumStats {
  int users = 0;
  int threads = 0;
  std::size_t posts = 0;
  /// Distinct calendar dates with at least one post.
  std::size_t active_days = 0;
};

ForumStats forum_stats(const PostTable& table);

}  // namespace forumcp
