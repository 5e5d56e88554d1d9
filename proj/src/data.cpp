#include "fedul/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace fedul {

namespace {

using json = nlohmann::ordered_json;

bool parse_i64(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return out;
}

void sort_canonical(std::vector<Interaction>& ints) {
  std::sort(ints.begin(), ints.end(), [](const Interaction& a, const Interaction& b) {
    return std::tie(a.user, a.item) < std::tie(b.user, b.item);
  });
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

ParseResult parse_movielens(const std::filesystem::path& path, MovielensFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("parse_movielens: cannot open " + path.string());
  const std::string sep = format == MovielensFormat::Tab ? "\t" : "::";

  // Dedup keeps the latest timestamp per (user, item) pair.
  std::map<std::pair<UserId, ItemId>, std::int64_t> seen;
  ParseResult res;
  std::string raw;
  while (std::getline(in, raw)) {
    std::string line = strip_cr(std::move(raw));
    if (line.empty()) continue;
    auto fields = split(line, sep);
    std::int64_t u, i, ts;
    if (fields.size() < 4 || !parse_i64(fields[0], u) || !parse_i64(fields[1], i) ||
        !parse_i64(fields[3], ts) || u < 0 || i < 0) {
      ++res.malformed;
      continue;
    }
    auto key = std::make_pair(u, i);
    auto it = seen.find(key);
    if (it == seen.end())
      seen.emplace(key, ts);
    else
      it->second = std::max(it->second, ts);
  }
  if (seen.empty()) throw FormatError("parse_movielens: no valid lines in " + path.string());
  res.interactions.reserve(seen.size());
  for (const auto& [key, ts] : seen)
    res.interactions.push_back({key.first, key.second, ts});
  return res;
}

std::map<UserId, RawAttribute> parse_attributes(const std::filesystem::path& path,
                                                MovielensFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("parse_attributes: cannot open " + path.string());
  const std::string sep = format == MovielensFormat::Tab ? "|" : "::";
  const std::size_t gender_field = format == MovielensFormat::Tab ? 2 : 1;
  const std::size_t age_field = format == MovielensFormat::Tab ? 1 : 2;

  std::map<UserId, RawAttribute> out;
  std::string raw;
  std::size_t valid = 0;
  while (std::getline(in, raw)) {
    std::string line = strip_cr(std::move(raw));
    if (line.empty()) continue;
    auto fields = split(line, sep);
    std::int64_t u, age;
    if (fields.size() < 3 || !parse_i64(fields[0], u) ||
        !parse_i64(fields[age_field], age))
      continue;
    std::string_view g = fields[gender_field];
    int gender;
    if (g == "M" || g == "m")
      gender = 0;
    else if (g == "F" || g == "f")
      gender = 1;
    else
      continue;
    out[u] = RawAttribute{gender, static_cast<int>(age)};
    ++valid;
  }
  if (valid == 0) throw FormatError("parse_attributes: no valid lines in " + path.string());
  return out;
}

std::vector<Interaction> filter_kcore(std::vector<Interaction> ints,
                                      std::size_t min_user, std::size_t min_item) {
  if (min_user < 1 || min_item < 1)
    throw DomainError("filter_kcore: thresholds must be >= 1");
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<UserId, std::size_t> udeg;
    std::unordered_map<ItemId, std::size_t> ideg;
    for (const auto& x : ints) {
      ++udeg[x.user];
      ++ideg[x.item];
    }
    std::vector<Interaction> kept;
    kept.reserve(ints.size());
    for (const auto& x : ints) {
      if (udeg[x.user] >= min_user && ideg[x.item] >= min_item)
        kept.push_back(x);
      else
        changed = true;
    }
    ints = std::move(kept);
  }
  if (ints.empty()) throw EmptyAfterFilterError("filter_kcore: nothing survives thresholds");
  sort_canonical(ints);
  return ints;
}

int discretize_age(int raw_age, std::pair<int, int> thresholds) {
  if (raw_age <= 0) throw DomainError("discretize_age: non-positive age");
  if (thresholds.first >= thresholds.second)
    throw DomainError("discretize_age: thresholds must be strictly increasing");
  if (raw_age < thresholds.first) return 0;
  if (raw_age <= thresholds.second) return 1;
  return 2;
}

Dataset make_dataset(const std::vector<Interaction>& ints,
                     const std::map<UserId, RawAttribute>& attrs,
                     std::pair<int, int> age_thresholds) {
  Dataset ds;
  std::set<UserId> users;
  std::set<ItemId> items;
  for (const auto& x : ints) {
    if (attrs.find(x.user) == attrs.end()) continue;
    ds.train.push_back(x);
    users.insert(x.user);
    items.insert(x.item);
  }
  ds.users.assign(users.begin(), users.end());
  ds.items.assign(items.begin(), items.end());
  for (UserId u : ds.users) {
    const RawAttribute& a = attrs.at(u);
    ds.attrs[u] = UserAttribute{a.gender, discretize_age(a.raw_age, age_thresholds)};
  }
  sort_canonical(ds.train);
  return ds;
}

Dataset balance_gender(Dataset ds, RngStream& rng) {
  std::vector<UserId> by_class[2];
  for (UserId u : ds.users) by_class[ds.attrs.at(u).gender].push_back(u);
  if (by_class[0].empty() || by_class[1].empty())
    throw DomainError("balance_gender: a gender class is empty");

  int majority = by_class[0].size() >= by_class[1].size() ? 0 : 1;
  std::size_t keep = by_class[1 - majority].size();
  std::vector<UserId>& pool = by_class[majority];
  // Partial Fisher-Yates over the sorted majority list, then keep the prefix.
  for (std::size_t i = 0; i < keep; ++i) {
    std::size_t j = i + rng.next_below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  std::set<UserId> retained(by_class[1 - majority].begin(), by_class[1 - majority].end());
  retained.insert(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep));

  Dataset out;
  std::set<ItemId> items;
  for (const auto& x : ds.train)
    if (retained.count(x.user)) {
      out.train.push_back(x);
      items.insert(x.item);
    }
  out.users.assign(retained.begin(), retained.end());
  out.items.assign(items.begin(), items.end());
  for (UserId u : out.users) out.attrs[u] = ds.attrs.at(u);
  for (const auto& [u, i] : ds.test_holdout)
    if (retained.count(u)) out.test_holdout[u] = i;
  sort_canonical(out.train);
  return out;
}

Dataset leave_one_out_split(Dataset ds) {
  std::map<UserId, Interaction> latest;
  std::map<UserId, std::size_t> count;
  for (const auto& x : ds.train) {
    ++count[x.user];
    auto it = latest.find(x.user);
    if (it == latest.end() ||
        std::tie(x.ts, x.item) > std::tie(it->second.ts, it->second.item))
      latest[x.user] = x;
  }
  for (UserId u : ds.users) {
    auto it = count.find(u);
    if (it == count.end() || it->second < 2)
      throw SplitError("leave_one_out_split: user " + std::to_string(u) +
                       " has fewer than 2 interactions");
  }
  std::vector<Interaction> remaining;
  remaining.reserve(ds.train.size() - ds.users.size());
  for (const auto& x : ds.train) {
    const Interaction& held = latest.at(x.user);
    if (x.item == held.item)
      ds.test_holdout[x.user] = x.item;
    else
      remaining.push_back(x);
  }
  ds.train = std::move(remaining);
  sort_canonical(ds.train);
  return ds;
}

Dataset synth_generate(std::size_t n_users, std::size_t n_items, double signal,
                       RngStream& rng) {
  if (n_users < 10 || n_items < 10)
    throw DomainError("synth_generate: need at least 10 users and 10 items");
  if (signal < 0.0 || signal > 1.0)
    throw DomainError("synth_generate: signal must be in [0,1]");

  Dataset ds;
  for (std::size_t u = 0; u < n_users; ++u) ds.users.push_back(static_cast<UserId>(u));
  for (std::size_t i = 0; i < n_items; ++i) ds.items.push_back(static_cast<ItemId>(i));

  // Alternating genders keep the classes balanced; age buckets are uniform.
  for (UserId u : ds.users) {
    int gender = static_cast<int>(u % 2);
    int age = static_cast<int>(rng.next_below(3));
    ds.attrs[u] = UserAttribute{gender, age};
  }

  // Items alternate between the two gender-affinity groups (item id parity),
  // so popularity rank (by id) is decoupled from group membership. Weight
  // 1/(pos+10) gives a heavy-headed popularity curve shared by both groups.
  auto pop_weight = [](std::size_t pos) { return 1.0 / (static_cast<double>(pos) + 10.0); };
  std::vector<double> cum_all(n_items);
  double total_all = 0.0;
  for (std::size_t i = 0; i < n_items; ++i) {
    total_all += pop_weight(i);
    cum_all[i] = total_all;
  }
  std::vector<std::vector<ItemId>> group(2);
  std::vector<std::vector<double>> cum_group(2);
  std::vector<double> total_group(2, 0.0);
  for (std::size_t i = 0; i < n_items; ++i) {
    int g = static_cast<int>(i % 2);
    group[g].push_back(static_cast<ItemId>(i));
    total_group[g] += pop_weight(i);
    cum_group[g].push_back(total_group[g]);
  }

  auto draw_from = [&](const std::vector<double>& cum, double total) {
    double r = rng.next_uniform01() * total;
    auto it = std::lower_bound(cum.begin(), cum.end(), r);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        it - cum.begin(), static_cast<std::ptrdiff_t>(cum.size()) - 1));
  };

  const std::size_t draws_per_user = 30;
  for (UserId u : ds.users) {
    int g = ds.attrs.at(u).gender;
    std::set<ItemId> chosen;
    std::int64_t ts = 0;
    std::vector<Interaction> mine;
    // Cap attempts so a pathological configuration cannot spin forever.
    for (std::size_t attempt = 0; attempt < draws_per_user * 20 && chosen.size() < draws_per_user;
         ++attempt) {
      ItemId item;
      if (rng.next_uniform01() < signal)
        item = group[g][draw_from(cum_group[g], total_group[g])];
      else
        item = static_cast<ItemId>(draw_from(cum_all, total_all));
      if (chosen.insert(item).second) mine.push_back({u, item, ++ts});
    }
    ds.train.insert(ds.train.end(), mine.begin(), mine.end());
  }
  sort_canonical(ds.train);
  return ds;
}

std::string dataset_to_json(const Dataset& ds) {
  json j;
  j["users"] = ds.users;
  j["items"] = ds.items;
  json train = json::array();
  for (const auto& x : ds.train) train.push_back({x.user, x.item, x.ts});
  j["train"] = std::move(train);
  json test = json::object();
  for (const auto& [u, i] : ds.test_holdout) test[std::to_string(u)] = i;
  j["test"] = std::move(test);
  json attrs = json::object();
  for (const auto& [u, a] : ds.attrs)
    attrs[std::to_string(u)] = {{"gender", a.gender}, {"age", a.age_bucket}};
  j["attrs"] = std::move(attrs);
  return j.dump(2);
}

Dataset dataset_from_json(const std::string& text) {
  json j = json::parse(text);
  Dataset ds;
  ds.users = j.at("users").get<std::vector<UserId>>();
  ds.items = j.at("items").get<std::vector<ItemId>>();
  for (const auto& t : j.at("train"))
    ds.train.push_back({t.at(0).get<UserId>(), t.at(1).get<ItemId>(),
                        t.at(2).get<std::int64_t>()});
  for (const auto& [k, v] : j.at("test").items())
    ds.test_holdout[std::stoll(k)] = v.get<ItemId>();
  for (const auto& [k, v] : j.at("attrs").items())
    ds.attrs[std::stoll(k)] =
        UserAttribute{v.at("gender").get<int>(), v.at("age").get<int>()};
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_dataset: cannot write " + path.string());
  out << dataset_to_json(ds) << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_dataset: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return dataset_from_json(ss.str());
}

}  // namespace fedul
