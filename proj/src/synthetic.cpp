#include "forumcp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "forumcp/error.hpp"
#include "forumcp/tensor.hpp"

namespace forumcp {

namespace {

const std::vector<std::vector<std::string>> kThemes = {
    {"ransomware", "locker", "encrypt", "decrypt", "bitcoin", "ransom", "victim", "payload", "android", "simplelocker",
     "files", "infection"},
    {"botnet", "ddos", "booter", "stresser", "flood", "amplification", "traffic", "zombies", "panel", "layer", "attack",
     "mirai"},
    {"aimbot", "wallhack", "cheat", "injector", "undetected", "battlefield", "steam", "anticheat", "esp", "radar",
     "triggerbot", "loader"},
    {"phishing", "scampage", "credentials", "spoof", "mailer", "smtp", "template", "login", "victims", "harvest",
     "clone", "redirect"},
    {"crypter", "fud", "stub", "antivirus", "scantime", "runtime", "obfuscation", "packer", "signature", "detection",
     "binder", "payloads"},
    {"sqli", "injection", "dork", "vulnerable", "database", "dump", "union", "sqlmap", "admin", "panel", "tables",
     "columns"},
    {"keylogger", "logs", "stealer", "passwords", "browser", "cookies", "grabber", "upload", "ftp", "webhook",
     "discord", "tokens"},
    {"carding", "cvv", "dumps", "bins", "checker", "merchant", "cashout", "fullz", "shop", "drops", "billing",
     "chargeback"}};

const std::vector<std::string> kBackground = {
    "forum",   "thread",   "question", "problem",  "anyone",   "please",  "thanks",  "help",    "working",
    "method",  "version",  "update",   "download", "link",     "server",  "computer", "windows", "linux",
    "account", "friends",  "game",     "today",    "weekend",  "music",   "movie",   "school",  "random",
    "chat",    "opinion",  "idea",     "better",   "looking",  "release", "issue",   "review",  "guide",
    "software", "hardware", "network", "website"};

// Portable draws: the standard distributions are implementation-defined.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : gen_(seed) {}
  double unit() { return uniform01(gen_); }
  int below(int n) { return std::min(n - 1, static_cast<int>(unit() * n)); }
  int poisson(double mean) {
    const double limit = std::exp(-mean);
    int k = 0;
    for (double p = unit(); p > limit; p *= unit()) ++k;
    return k;
  }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t n = v.size(); n > 1; --n) std::swap(v[n - 1], v[static_cast<std::size_t>(below(static_cast<int>(n)))]);
  }

 private:
  std::mt19937_64 gen_;
};

std::string padded(const char* prefix, long n, long count) {
  std::string digits = std::to_string(n);
  const std::size_t width = std::to_string(std::max(1L, count - 1)).size();
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

std::vector<std::string> theme(std::size_t block) {
  std::vector<std::string> words = kThemes[block % kThemes.size()];
  if (block >= kThemes.size()) {
    for (auto& w : words) w += std::to_string(block / kThemes.size());
  }
  return words;
}

std::string sentence(Draw& draw, const std::vector<std::string>& vocab, int words) {
  std::string s;
  for (int n = 0; n < words; ++n) {
    if (n) s += ' ';
    s += vocab[static_cast<std::size_t>(draw.below(static_cast<int>(vocab.size())))];
  }
  return s;
}

std::string title_case(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

constexpr double kMaxIntensity = 500.0;

}  // namespace

void SyntheticSpec::validate() const {
  if (forum_id.empty()) throw ValidationError("forum_id must not be empty");
  if (users < 1 || threads < 1 || weeks < 1) throw ValidationError("users, threads and weeks must be >= 1");
  if (!(noise_rate >= 0.0)) throw ValidationError("noise_rate must be >= 0");
  if (min_post_words < 1 || max_post_words < min_post_words) throw ValidationError("invalid post word range");
  long block_users = 0, block_threads = 0;
  std::set<int> explicit_threads;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const PlantedBlock& p = blocks[b];
    const std::string name = "block " + std::to_string(b);
    if (p.users < 1 || p.threads < 1 || p.weeks < 1) throw ValidationError(name + ": sizes must be >= 1");
    if (p.week_start < 0 || p.week_start + p.weeks > weeks) throw ValidationError(name + ": week window outside the horizon");
    if (!(p.intensity > noise_rate)) throw ValidationError(name + ": intensity must exceed the noise rate");
    if (p.intensity > kMaxIntensity) throw ValidationError(name + ": intensity above 500");
    if (!p.thread_ids.empty() && static_cast<int>(p.thread_ids.size()) != p.threads) {
      throw ValidationError(name + ": thread_ids must list exactly `threads` indices");
    }
    for (int t : p.thread_ids) {
      if (t < 0 || t >= threads) throw ValidationError(name + ": thread index " + std::to_string(t) + " out of range");
      if (!explicit_threads.insert(t).second) {
        throw ValidationError(name + ": thread " + std::to_string(t) + " already belongs to another block");
      }
    }
    block_users += p.users;
    block_threads += p.threads;
  }
  if (block_users > users) throw ValidationError("blocks need more users than the forum has");
  if (block_threads >= threads) throw ValidationError("blocks need fewer threads than the forum has (one background thread at least)");
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    s.forum_id = j.value("forum_id", s.forum_id);
    s.users = j.value("users", s.users);
    s.threads = j.value("threads", s.threads);
    s.weeks = j.value("weeks", s.weeks);
    if (j.contains("origin") && !parse_iso_date(j.at("origin").get<std::string>(), s.origin)) {
      throw ValidationError("origin is not an ISO date");
    }
    s.noise_rate = j.value("noise_rate", s.noise_rate);
    if (j.contains("total_posts") && !j.at("total_posts").is_null()) s.total_posts = j.at("total_posts").get<long>();
    s.background_vocabulary = j.value("background_vocabulary", s.background_vocabulary);
    s.min_post_words = j.value("min_post_words", s.min_post_words);
    s.max_post_words = j.value("max_post_words", s.max_post_words);
    s.seed = j.value("seed", s.seed);
    for (const auto& b : j.value("blocks", nlohmann::json::array())) {
      PlantedBlock p;
      p.users = b.at("users").get<int>();
      p.threads = b.at("threads").get<int>();
      p.week_start = b.at("week_start").get<int>();
      p.weeks = b.at("weeks").get<int>();
      p.intensity = b.at("intensity").get<double>();
      p.vocabulary = b.value("vocabulary", p.vocabulary);
      p.thread_ids = b.value("thread_ids", p.thread_ids);
      s.blocks.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::ordered_json to_json(const SyntheticSpec& s) {
  nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
  for (const auto& b : s.blocks) {
    nlohmann::ordered_json jb = {{"users", b.users},         {"threads", b.threads},     {"week_start", b.week_start},
                                 {"weeks", b.weeks},         {"intensity", b.intensity}};
    if (!b.vocabulary.empty()) jb["vocabulary"] = b.vocabulary;
    if (!b.thread_ids.empty()) jb["thread_ids"] = b.thread_ids;
    blocks.push_back(std::move(jb));
  }
  nlohmann::ordered_json j = {{"forum_id", s.forum_id},
                              {"users", s.users},
                              {"threads", s.threads},
                              {"weeks", s.weeks},
                              {"origin", format_date(s.origin)},
                              {"noise_rate", s.noise_rate},
                              {"seed", s.seed},
                              {"min_post_words", s.min_post_words},
                              {"max_post_words", s.max_post_words},
                              {"blocks", std::move(blocks)}};
  if (s.total_posts) j["total_posts"] = *s.total_posts;
  if (!s.background_vocabulary.empty()) j["background_vocabulary"] = s.background_vocabulary;
  return j;
}

SyntheticForum generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Draw draw(spec.seed);
  SyntheticForum out;

  std::vector<int> user_order(static_cast<std::size_t>(spec.users));
  for (int u = 0; u < spec.users; ++u) user_order[static_cast<std::size_t>(u)] = u;
  draw.shuffle(user_order);

  std::vector<char> taken(static_cast<std::size_t>(spec.threads), 0);
  for (const auto& b : spec.blocks)
    for (int t : b.thread_ids) taken[static_cast<std::size_t>(t)] = 1;
  std::vector<int> free_threads;
  for (int t = 0; t < spec.threads; ++t)
    if (!taken[static_cast<std::size_t>(t)]) free_threads.push_back(t);
  draw.shuffle(free_threads);

  // Per thread: its vocabulary (block theme or background) and title.
  std::vector<int> thread_block(static_cast<std::size_t>(spec.threads), -1);
  std::vector<std::vector<std::string>> vocab;
  std::size_t next_user = 0, next_thread = 0;
  std::vector<std::vector<int>> block_users(spec.blocks.size()), block_threads(spec.blocks.size());
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const PlantedBlock& p = spec.blocks[b];
    vocab.push_back(p.vocabulary.empty() ? theme(b) : p.vocabulary);
    for (int n = 0; n < p.users; ++n) block_users[b].push_back(user_order[next_user++]);
    block_threads[b] = p.thread_ids;
    while (static_cast<int>(block_threads[b].size()) < p.threads) block_threads[b].push_back(free_threads[next_thread++]);
    for (int t : block_threads[b]) thread_block[static_cast<std::size_t>(t)] = static_cast<int>(b);
  }
  const std::vector<std::string>& background = spec.background_vocabulary.empty() ? kBackground : spec.background_vocabulary;
  std::vector<int> background_threads(free_threads.begin() + static_cast<std::ptrdiff_t>(next_thread), free_threads.end());
  std::sort(background_threads.begin(), background_threads.end());

  std::vector<std::string> titles(static_cast<std::size_t>(spec.threads));
  for (int t = 0; t < spec.threads; ++t) {
    const int b = thread_block[static_cast<std::size_t>(t)];
    titles[static_cast<std::size_t>(t)] =
        title_case(sentence(draw, b < 0 ? background : vocab[static_cast<std::size_t>(b)], 3 + draw.below(4)));
  }

  const auto add_post = [&](int user, int thread, long day, const std::vector<std::string>& words) {
    PostRecord r;
    r.forum_id = spec.forum_id;
    r.thread_id = padded("t", thread, spec.threads);
    r.username = padded("user", user, spec.users);
    r.date = spec.origin + std::chrono::days{day};
    r.content = sentence(draw, words, spec.min_post_words + draw.below(spec.max_post_words - spec.min_post_words + 1));
    r.title = titles[static_cast<std::size_t>(thread)];
    out.posts.push_back(std::move(r));
  };

  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const PlantedBlock& p = spec.blocks[b];
    PlantedTruth truth;
    for (int u : block_users[b]) truth.users.push_back(padded("user", u, spec.users));
    for (int t : block_threads[b]) truth.threads.push_back(padded("t", t, spec.threads));
    for (int w = p.week_start; w < p.week_start + p.weeks; ++w) truth.weeks.push_back(w);
    for (int u : block_users[b])
      for (int t : block_threads[b])
        for (int w = p.week_start; w < p.week_start + p.weeks; ++w) {
          const int n = draw.poisson(p.intensity);
          for (int c = 0; c < n; ++c) add_post(u, t, 7L * w + draw.below(7), vocab[b]);
        }
    out.truth.push_back(std::move(truth));
  }

  const long block_posts = static_cast<long>(out.posts.size());
  long noise = spec.total_posts ? *spec.total_posts - block_posts - 1
                                : std::lround(spec.noise_rate * spec.users * spec.weeks);
  if (noise < 0) {
    throw ValidationError("total_posts " + std::to_string(*spec.total_posts) + " is below the " +
                          std::to_string(block_posts + 1) + " posts the blocks need");
  }
  const int nb = static_cast<int>(background_threads.size());
  add_post(user_order[static_cast<std::size_t>(draw.below(spec.users))], background_threads[static_cast<std::size_t>(draw.below(nb))], 0,
           background);
  std::vector<int> visit_users = user_order;
  draw.shuffle(visit_users);
  for (long n = 0; n < noise; ++n) {
    const int u = n < spec.users ? visit_users[static_cast<std::size_t>(n)] : draw.below(spec.users);
    const int t = n < nb ? background_threads[static_cast<std::size_t>(n)] : background_threads[static_cast<std::size_t>(draw.below(nb))];
    add_post(u, t, draw.below(7 * spec.weeks), background);
  }

  for (std::size_t n = 0; n < out.posts.size(); ++n) {
    out.posts[n].post_id = padded("p", static_cast<long>(n), static_cast<long>(out.posts.size()));
  }
  return out;
}

}  // namespace forumcp
