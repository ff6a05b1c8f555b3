#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace forumcp {

/// Calendar day. Day resolution is all the pipeline needs; time-of-day is
/// accepted on input and discarded.
using Date = std::chrono::sys_days;

/// Parses `YYYY-MM-DD`, optionally followed by `T` or a space and a time
/// component. Returns false on anything else, including impossible dates.
bool parse_iso_date(std::string_view text, Date& out);

std::string format_date(Date d);

inline long days_between(Date from, Date to) { return (to - from).count(); }

/// Today's date in UTC.
Date today();

}  // namespace forumcp
