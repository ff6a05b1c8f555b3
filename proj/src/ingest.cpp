#include "forumcp/ingest.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

#include <json.hpp>

#include "forumcp/error.hpp"
#include "forumcp/text.hpp"

namespace forumcp {

namespace {

constexpr std::array<std::string_view, 6> kRequiredColumns = {"forum_id", "thread_id", "post_id",
                                                              "username", "date",      "content"};
constexpr std::string_view kTitleColumn = "title";

const Date kEarliestDate = std::chrono::sys_days{std::chrono::year{1990} / 1 / 1};

// RFC 4180 record reader over an in-memory buffer. Accepts LF or CRLF line
// ends and quoted fields spanning lines.
class CsvReader {
 public:
  explicit CsvReader(std::string data) : data_(std::move(data)) {
    if (data_.starts_with("\xEF\xBB\xBF")) pos_ = 3;
  }

  // Returns false at end of input. `row` is the 1-based record number used in
  // error messages.
  bool next(std::vector<std::string>& fields, std::size_t row) {
    fields.clear();
    if (pos_ >= data_.size()) return false;
    std::string field;
    bool quoted = false;
    bool after_quote = false;
    while (true) {
      if (pos_ >= data_.size()) {
        if (quoted) throw ParseError(row, "record", "unterminated quoted field");
        fields.push_back(std::move(field));
        return true;
      }
      const char c = data_[pos_++];
      if (quoted) {
        if (c == '"') {
          if (pos_ < data_.size() && data_[pos_] == '"') {
            field.push_back('"');
            ++pos_;
          } else {
            quoted = false;
            after_quote = true;
          }
        } else {
          field.push_back(c);
        }
        continue;
      }
      if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
        after_quote = false;
      } else if (c == '\n' || c == '\r') {
        if (c == '\r' && pos_ < data_.size() && data_[pos_] == '\n') ++pos_;
        fields.push_back(std::move(field));
        return true;
      } else if (c == '"') {
        if (!field.empty() || after_quote) throw ParseError(row, "record", "stray quote inside unquoted field");
        quoted = true;
      } else {
        if (after_quote) throw ParseError(row, "record", "characters after closing quote");
        field.push_back(c);
      }
    }
  }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

bool is_blank(const std::vector<std::string>& fields) { return fields.size() == 1 && fields[0].empty(); }

void require_nonempty(const std::string& value, std::size_t row, std::string_view field) {
  if (value.empty()) throw ParseError(row, std::string(field), "required field is empty");
}

PostRecord make_record(std::array<std::string, 7> values, std::size_t row) {
  PostRecord rec;
  for (std::size_t f = 0; f < 5; ++f) require_nonempty(values[f], row, kRequiredColumns[f]);
  rec.forum_id = std::move(values[0]);
  rec.thread_id = std::move(values[1]);
  rec.post_id = std::move(values[2]);
  rec.username = std::move(values[3]);
  if (!parse_iso_date(values[4], rec.date)) {
    throw ParseError(row, "date", "'" + values[4] + "' is not an ISO-8601 date");
  }
  rec.content = std::move(values[5]);
  rec.title = std::move(values[6]);
  return rec;
}

std::vector<PostRecord> read_csv(std::istream& in) {
  CsvReader reader(std::string(std::istreambuf_iterator<char>(in), {}));
  std::vector<std::string> fields;
  if (!reader.next(fields, 0)) throw ParseError(0, "header", "missing header row");
  const bool has_title = fields.size() == kRequiredColumns.size() + 1;
  if (fields.size() != kRequiredColumns.size() && !has_title) {
    throw ParseError(0, "header", "expected 6 or 7 columns, found " + std::to_string(fields.size()));
  }
  for (std::size_t c = 0; c < fields.size(); ++c) {
    const std::string_view want = c < kRequiredColumns.size() ? kRequiredColumns[c] : kTitleColumn;
    if (fields[c] != want) throw ParseError(0, "header", "column " + std::to_string(c + 1) + " must be '" + std::string(want) + "'");
  }
  std::vector<PostRecord> records;
  for (std::size_t row = 1; reader.next(fields, row); ++row) {
    if (is_blank(fields)) {
      --row;
      continue;
    }
    if (fields.size() != kRequiredColumns.size() && !(has_title && fields.size() == kRequiredColumns.size() + 1)) {
      throw ParseError(row, "record", "expected " + std::to_string(has_title ? 7 : 6) + " fields, found " +
                                          std::to_string(fields.size()));
    }
    std::array<std::string, 7> values;
    for (std::size_t c = 0; c < fields.size(); ++c) values[c] = std::move(fields[c]);
    records.push_back(make_record(std::move(values), row));
  }
  return records;
}

std::vector<PostRecord> read_jsonl(std::istream& in) {
  std::vector<PostRecord> records;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++row;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(row, "record", std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(row, "record", "expected a JSON object");
    std::array<std::string, 7> values;
    for (std::size_t f = 0; f < kRequiredColumns.size(); ++f) {
      const auto it = obj.find(std::string(kRequiredColumns[f]));
      if (it == obj.end()) throw ParseError(row, std::string(kRequiredColumns[f]), "missing field");
      if (!it->is_string()) throw ParseError(row, std::string(kRequiredColumns[f]), "expected a string");
      values[f] = it->get<std::string>();
    }
    if (const auto it = obj.find(std::string(kTitleColumn)); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) throw ParseError(row, "title", "expected a string");
      values[6] = it->get<std::string>();
    }
    records.push_back(make_record(std::move(values), row));
  }
  return records;
}

bool needs_quotes(const std::string& s) {
  return s.find_first_of(",\"\r\n") != std::string::npos || (!s.empty() && (s.front() == ' ' || s.back() == ' '));
}

void write_csv_field(std::ostream& out, const std::string& s) {
  if (!needs_quotes(s)) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

}  // namespace

InputFormat parse_input_format(std::string_view name) {
  if (name == "csv") return InputFormat::csv;
  if (name == "jsonl") return InputFormat::jsonl;
  throw ValidationError("unknown input format '" + std::string(name) + "' (expected csv or jsonl)");
}

EntityIndex::EntityIndex(std::vector<std::string> names) : names_(std::move(names)) {
  std::sort(names_.begin(), names_.end());
  names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
  ids_.reserve(names_.size());
  for (std::size_t i = 0; i < names_.size(); ++i) ids_.emplace(names_[i], static_cast<int>(i));
}

std::optional<int> EntityIndex::find(std::string_view name) const {
  const auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::string PostTable::thread_title(int thread) const {
  const PostRecord& first = first_post_of(thread);
  if (!first.title.empty()) return first.title;
  // Any post of the thread may carry the title.
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (record_thread[r] == thread && !records[r].title.empty()) return records[r].title;
  }
  std::string line = first.content.substr(0, first.content.find_first_of("\r\n"));
  if (line.size() > 120) {
    std::size_t cut = 120;
    // Do not split a UTF-8 sequence.
    while (cut > 0 && (static_cast<unsigned char>(line[cut]) & 0xC0) == 0x80) --cut;
    line.resize(cut);
  }
  return line;
}

PostTable PostTable::from_records(std::vector<PostRecord> records, Date latest_allowed) {
  PostTable t;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  std::vector<std::string> duplicates;
  for (std::size_t r = 0; r < records.size(); ++r) {
    PostRecord& rec = records[r];
    const std::size_t row = r + 1;
    if (rec.date < kEarliestDate) throw ParseError(row, "date", format_date(rec.date) + " precedes 1990-01-01");
    if (rec.date > latest_allowed) throw ParseError(row, "date", format_date(rec.date) + " is after the ingestion date");
    rec.username = text::nfc(rec.username);
    const auto [it, inserted] = seen.emplace(std::make_pair(rec.forum_id, rec.post_id), row);
    if (!inserted) {
      duplicates.push_back("'" + rec.post_id + "' in forum '" + rec.forum_id + "' (rows " + std::to_string(it->second) +
                           " and " + std::to_string(row) + ")");
    }
  }
  if (!duplicates.empty()) {
    std::string msg = "duplicate post_id";
    for (std::size_t d = 0; d < duplicates.size(); ++d) msg += (d == 0 ? ": " : ", ") + duplicates[d];
    throw ValidationError(msg);
  }

  std::vector<std::string> user_names, thread_names;
  user_names.reserve(records.size());
  thread_names.reserve(records.size());
  for (const auto& rec : records) {
    user_names.push_back(rec.username);
    thread_names.push_back(rec.thread_id);
  }
  t.users = EntityIndex(std::move(user_names));
  t.threads = EntityIndex(std::move(thread_names));
  t.record_user.resize(records.size());
  t.record_thread.resize(records.size());
  t.first_post.assign(static_cast<std::size_t>(t.threads.size()), records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    const PostRecord& rec = records[r];
    t.record_user[r] = *t.users.find(rec.username);
    const int j = *t.threads.find(rec.thread_id);
    t.record_thread[r] = j;
    std::size_t& fp = t.first_post[static_cast<std::size_t>(j)];
    if (fp == records.size() ||
        std::tie(rec.date, rec.post_id) < std::tie(records[fp].date, records[fp].post_id)) {
      fp = r;
    }
    if (r == 0 || rec.date < t.min_date) t.min_date = rec.date;
    if (r == 0 || rec.date > t.max_date) t.max_date = rec.date;
  }
  t.records = std::move(records);
  return t;
}

PostTable parse_posts(std::istream& in, InputFormat format, Date latest_allowed) {
  return PostTable::from_records(format == InputFormat::csv ? read_csv(in) : read_jsonl(in), latest_allowed);
}

void write_posts(std::ostream& out, const std::vector<PostRecord>& records, InputFormat format) {
  if (format == InputFormat::csv) {
    out << "forum_id,thread_id,post_id,username,date,content,title\n";
    for (const auto& r : records) {
      for (const std::string* f : {&r.forum_id, &r.thread_id, &r.post_id, &r.username}) {
        write_csv_field(out, *f);
        out << ',';
      }
      out << format_date(r.date) << ',';
      write_csv_field(out, r.content);
      out << ',';
      write_csv_field(out, r.title);
      out << '\n';
    }
    return;
  }
  for (const auto& r : records) {
    nlohmann::ordered_json obj = {{"forum_id", r.forum_id}, {"thread_id", r.thread_id}, {"post_id", r.post_id},
                                  {"username", r.username}, {"date", format_date(r.date)}, {"content", r.content}};
    if (!r.title.empty()) obj["title"] = r.title;
    out << obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
}

Granularity parse_granularity(std::string_view name) {
  if (name == "day") return Granularity::day;
  if (name == "week") return Granularity::week;
  if (name == "month") return Granularity::month;
  throw ValidationError("unknown granularity '" + std::string(name) + "' (expected day, week or month)");
}

const char* granularity_name(Granularity g) {
  switch (g) {
    case Granularity::day: return "day";
    case Granularity::week: return "week";
    case Granularity::month: return "month";
  }
  return "?";
}

namespace {

int month_number(Date d) {
  const std::chrono::year_month_day ymd{d};
  return static_cast<int>(ymd.year()) * 12 + static_cast<int>(static_cast<unsigned>(ymd.month())) - 1;
}

Date month_start(int month_number) {
  return std::chrono::sys_days{std::chrono::year{month_number / 12} / std::chrono::month{static_cast<unsigned>(month_number % 12 + 1)} / 1};
}

long floor_div(long a, long b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); }

}  // namespace

int TimeIndex::slot(Date d) const {
  switch (granularity) {
    case Granularity::day: return static_cast<int>(days_between(origin, d));
    case Granularity::week: return static_cast<int>(floor_div(days_between(origin, d), 7));
    case Granularity::month: return month_number(d) - month_number(origin);
  }
  return 0;
}

Date TimeIndex::slot_start(int s) const {
  switch (granularity) {
    case Granularity::day: return origin + std::chrono::days{s};
    case Granularity::week: return origin + std::chrono::days{7L * s};
    case Granularity::month: return s == 0 ? origin : month_start(month_number(origin) + s);
  }
  return origin;
}

Date TimeIndex::slot_end(int s) const {
  switch (granularity) {
    case Granularity::day: return origin + std::chrono::days{s + 1};
    case Granularity::week: return origin + std::chrono::days{7L * (s + 1)};
    case Granularity::month: return month_start(month_number(origin) + s + 1);
  }
  return origin;
}

TimeIndex discretize(const PostTable& table, Granularity granularity) {
  if (table.empty()) throw ValidationError("no temporal extent");
  TimeIndex t;
  t.granularity = granularity;
  t.origin = table.min_date;
  t.slot_count = t.slot(table.max_date) + 1;
  return t;
}

SparseTensor3<double> build_tensor(const PostTable& table, const TimeIndex& time) {
  std::vector<Entry<double>> triplets;
  triplets.reserve(table.records.size());
  for (std::size_t r = 0; r < table.records.size(); ++r) {
    const int k = time.slot(table.records[r].date);
    if (k < 0 || k >= time.slot_count) throw IndexError("post date outside the time index");
    triplets.push_back({table.record_user[r], table.record_thread[r], k, 1.0});
  }
  return SparseTensor3<double>::from_triplets({table.user_count(), table.thread_count(), time.slot_count},
                                              std::move(triplets));
}

ForumStats forum_stats(const PostTable& table) {
  ForumStats s;
  s.users = table.user_count();
  s.threads = table.thread_count();
  s.posts = table.records.size();
  std::set<Date> days;
  for (const auto& r : table.records) days.insert(r.date);
  s.active_days = days.size();
  return s;
}

}  // namespace forumcp
